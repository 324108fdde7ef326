/** Adjustment state for one manual-calibration session, with undo.
 *
 * All projection math lives in the backend; this state only carries the
 * parameters sent to POST /project and POST /save.
 */

import { KeyAction, lookupKey } from "./keymap.js";

export interface AdjustState {
  rotationDeg: { x: number; y: number; z: number };
  translationM: { x: number; y: number; z: number };
  fx: number;
  fy: number;
  steps: { rotDeg: number; transM: number; focalPx: number };
  intensityColor: boolean;
  overlapFilter: boolean;
}

export const DEFAULT_STEPS = { rotDeg: 0.3, transM: 0.05, focalPx: 5 };

export function initialState(partial?: Partial<AdjustState>): AdjustState {
  return {
    rotationDeg: { x: 0, y: 0, z: 0 },
    translationM: { x: 0, y: 0, z: 0 },
    fx: 1000,
    fy: 1000,
    steps: { ...DEFAULT_STEPS },
    intensityColor: false,
    overlapFilter: false,
    ...structuredClonePartial(partial),
  };
}

function structuredClonePartial(p?: Partial<AdjustState>): Partial<AdjustState> {
  return p ? JSON.parse(JSON.stringify(p)) : {};
}

export function applyAction(state: AdjustState, action: KeyAction): AdjustState {
  const next: AdjustState = JSON.parse(JSON.stringify(state));
  if (action.kind === "rotate") {
    next.rotationDeg[action.axis as "x" | "y" | "z"] +=
      action.sign * state.steps.rotDeg;
  } else if (action.kind === "translate") {
    next.translationM[action.axis as "x" | "y" | "z"] +=
      action.sign * state.steps.transM;
  } else if (action.axis === "fx") {
    next.fx += action.sign * state.steps.focalPx;
  } else {
    next.fy += action.sign * state.steps.focalPx;
  }
  return next;
}

/** Extrinsic payload in the backend schema (euler order z, y, x). */
export function extrinsicJson(state: AdjustState): {
  euler_zyx_deg: number[];
  translation_m: number[];
} {
  return {
    euler_zyx_deg: [
      state.rotationDeg.z,
      state.rotationDeg.y,
      state.rotationDeg.x,
    ],
    translation_m: [
      state.translationM.x,
      state.translationM.y,
      state.translationM.z,
    ],
  };
}

export function stateFromExtrinsic(
  extrinsic: { euler_zyx_deg: number[]; translation_m: number[] },
  base?: AdjustState,
): AdjustState {
  const state = base ? JSON.parse(JSON.stringify(base)) : initialState();
  state.rotationDeg = {
    z: extrinsic.euler_zyx_deg[0],
    y: extrinsic.euler_zyx_deg[1],
    x: extrinsic.euler_zyx_deg[2],
  };
  state.translationM = {
    x: extrinsic.translation_m[0],
    y: extrinsic.translation_m[1],
    z: extrinsic.translation_m[2],
  };
  return state;
}

export const UNDO_DEPTH = 50;

/** Session store: applies keys, keeps >= UNDO_DEPTH undo steps. */
export class StateStore {
  private history: AdjustState[] = [];
  state: AdjustState;

  constructor(initial?: AdjustState) {
    this.state = initial ?? initialState();
  }

  /** Returns true when the key was bound and the state changed. */
  handleKey(key: string): boolean {
    const action = lookupKey(key);
    if (!action) return false;
    this.push(applyAction(this.state, action));
    return true;
  }

  push(next: AdjustState): void {
    this.history.push(this.state);
    if (this.history.length > UNDO_DEPTH) {
      this.history.shift();
    }
    this.state = next;
  }

  undo(): boolean {
    const prev = this.history.pop();
    if (!prev) return false;
    this.state = prev;
    return true;
  }

  get undoDepth(): number {
    return this.history.length;
  }
}
