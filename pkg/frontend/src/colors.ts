/** Dot colors: depth uses a turbo-like ramp, intensity a pure
 * value-to-warmth mapping (a pure function of the intensity value). */

export interface Rgb {
  r: number;
  g: number;
  b: number;
}

function clamp01(x: number): number {
  return x < 0 ? 0 : x > 1 ? 1 : x;
}

export function depthColor(depth: number, maxDepth = 60): Rgb {
  const t = clamp01(depth / maxDepth);
  // blue (near) -> green -> red (far)
  return {
    r: Math.round(255 * clamp01(1.5 * t)),
    g: Math.round(255 * clamp01(1.5 - Math.abs(2 * t - 1) * 1.5)),
    b: Math.round(255 * clamp01(1.5 * (1 - t))),
  };
}

export function intensityColor(intensity: number): Rgb {
  const t = clamp01(intensity / 255);
  return {
    r: Math.round(255 * t),
    g: Math.round(255 * (0.2 + 0.6 * t)),
    b: Math.round(255 * (1 - t)),
  };
}

export function rgbCss(c: Rgb): string {
  return `rgb(${c.r},${c.g},${c.b})`;
}
