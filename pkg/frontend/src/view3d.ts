/** Orbitable 3D view for the dual-cloud (LiDAR-to-LiDAR) mode: a simple
 * perspective projection around a pivot; the two clouds get fixed
 * contrasting colors. */

export interface OrbitCamera {
  yaw: number;      // rad
  pitch: number;    // rad
  distance: number; // m
  pivot: [number, number, number];
  focal: number;    // px
}

export const CLOUD_COLORS: Record<string, string> = {
  master: "rgb(80,180,255)",
  slave: "rgb(255,150,60)",
};

export function defaultOrbit(points: number[][]): OrbitCamera {
  let cx = 0, cy = 0, cz = 0;
  for (const p of points) {
    cx += p[0];
    cy += p[1];
    cz += p[2];
  }
  const n = Math.max(points.length, 1);
  return {
    yaw: Math.PI / 4,
    pitch: 0.5,
    distance: 60,
    pivot: [cx / n, cy / n, cz / n],
    focal: 500,
  };
}

/** Project world points; returns [x, y, depth] per visible point. */
export function projectOrbit(
  cam: OrbitCamera,
  points: number[][],
  width: number,
  height: number,
): Array<[number, number, number]> {
  const cy = Math.cos(cam.yaw), sy = Math.sin(cam.yaw);
  const cp = Math.cos(cam.pitch), sp = Math.sin(cam.pitch);
  const out: Array<[number, number, number]> = [];
  for (const p of points) {
    const x = p[0] - cam.pivot[0];
    const y = p[1] - cam.pivot[1];
    const z = p[2] - cam.pivot[2];
    // yaw about world z, then pitch about camera x, then push back
    const x1 = cy * x + sy * y;
    const y1 = -sy * x + cy * y;
    const y2 = cp * y1 + sp * z;
    const z2 = -sp * y1 + cp * z;
    const depth = cam.distance - x1;
    if (depth <= 0.1) continue;
    const u = width / 2 + (cam.focal * y2) / depth;
    const v = height / 2 - (cam.focal * z2) / depth;
    if (u < 0 || u >= width || v < 0 || v >= height) continue;
    out.push([u, v, depth]);
  }
  return out;
}
