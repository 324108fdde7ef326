/** Overlay construction. The pixel set drawn is exactly the /project
 * response: every returned pixel becomes one dot at its (u, v), in order,
 * with only the color derived locally. No projection math happens here. */

import { depthColor, intensityColor, Rgb } from "./colors.js";

export interface ProjectedPixel {
  u: number;
  v: number;
  depth: number;
  intensity: number;
}

export interface Dot {
  u: number;
  v: number;
  color: Rgb;
  source: ProjectedPixel;
}

export type OverlayMode = "depth" | "intensity";

export function overlayDots(
  pixels: ProjectedPixel[],
  mode: OverlayMode,
  maxDepth = 60,
): Dot[] {
  return pixels.map((p) => ({
    u: p.u,
    v: p.v,
    color:
      mode === "intensity" ? intensityColor(p.intensity)
        : depthColor(p.depth, maxDepth),
    source: p,
  }));
}

export interface DotSink {
  dot(u: number, v: number, color: Rgb): void;
}

export function renderOverlay(
  sink: DotSink,
  pixels: ProjectedPixel[],
  mode: OverlayMode,
): Dot[] {
  const dots = overlayDots(pixels, mode);
  for (const d of dots) {
    sink.dot(d.u, d.v, d.color);
  }
  return dots;
}

/** Canvas adapter; kept thin so the overlay logic stays testable. */
export function canvasSink(
  ctx: CanvasRenderingContext2D,
  pointSize = 2,
): DotSink {
  return {
    dot(u, v, color) {
      ctx.fillStyle = `rgb(${color.r},${color.g},${color.b})`;
      ctx.fillRect(u - pointSize / 2, v - pointSize / 2, pointSize,
        pointSize);
    },
  };
}
