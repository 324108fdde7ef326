/** Keyboard bindings for manual calibration.
 *
 * Extrinsic rows (12 bindings): q/a = +-x rotation, w/s = +-y rotation,
 * e/d = +-z rotation (degrees); r/f = +-x, t/g = +-y, y/h = +-z
 * translation (meters). Intrinsic rows: u/j = +-fx, i/k = +-fy (pixels);
 * the published intrinsic table pairs its rows inconsistently, so the
 * fx/fy reading is the one the backend also serves.
 */

export type Axis = "x" | "y" | "z";

export interface KeyAction {
  kind: "rotate" | "translate" | "focal";
  axis: Axis | "fx" | "fy";
  sign: 1 | -1;
}

export const EXTRINSIC_KEYMAP: Record<string, KeyAction> = {
  q: { kind: "rotate", axis: "x", sign: 1 },
  a: { kind: "rotate", axis: "x", sign: -1 },
  w: { kind: "rotate", axis: "y", sign: 1 },
  s: { kind: "rotate", axis: "y", sign: -1 },
  e: { kind: "rotate", axis: "z", sign: 1 },
  d: { kind: "rotate", axis: "z", sign: -1 },
  r: { kind: "translate", axis: "x", sign: 1 },
  f: { kind: "translate", axis: "x", sign: -1 },
  t: { kind: "translate", axis: "y", sign: 1 },
  g: { kind: "translate", axis: "y", sign: -1 },
  y: { kind: "translate", axis: "z", sign: 1 },
  h: { kind: "translate", axis: "z", sign: -1 },
};

export const INTRINSIC_KEYMAP: Record<string, KeyAction> = {
  u: { kind: "focal", axis: "fx", sign: 1 },
  j: { kind: "focal", axis: "fx", sign: -1 },
  i: { kind: "focal", axis: "fy", sign: 1 },
  k: { kind: "focal", axis: "fy", sign: -1 },
};

export const KEYMAP: Record<string, KeyAction> = {
  ...EXTRINSIC_KEYMAP,
  ...INTRINSIC_KEYMAP,
};

export function lookupKey(key: string): KeyAction | null {
  return KEYMAP[key] ?? null;
}
