/** Typed wrappers over the serve endpoints, plus a latest-wins queue so at
 * most one /project request is in flight. */

import { ProjectedPixel } from "./overlay.js";
import { AdjustState, extrinsicJson } from "./state.js";

export type FetchLike = (
  url: string,
  init?: { method?: string; body?: string; headers?: Record<string, string> },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export interface SessionInfo {
  mode: string;
  keymap: { extrinsic: Record<string, string>; intrinsic: Record<string, string> };
  overlap_filter_depth_m: number;
  extrinsic: { euler_zyx_deg?: number[]; translation_m?: number[] };
  intrinsics?: Record<string, number>;
  image?: { width: number; height: number; url: string };
  clouds: Record<string, { count: number; stride: number }>;
  output: string;
}

export interface ProjectResponse {
  pixels: ProjectedPixel[];
  intensity_color: boolean;
}

export class ApiClient {
  constructor(
    private base: string,
    private fetchImpl: FetchLike = fetch as unknown as FetchLike,
  ) {}

  async session(): Promise<SessionInfo> {
    const r = await this.fetchImpl(`${this.base}/session`);
    if (!r.ok) throw new Error(`GET /session failed: ${r.status}`);
    return (await r.json()) as SessionInfo;
  }

  async cloud(which: "master" | "slave" = "master"):
      Promise<{ points: number[][] }> {
    const suffix = which === "slave" ? "?which=slave" : "";
    const r = await this.fetchImpl(`${this.base}/cloud${suffix}`);
    if (!r.ok) throw new Error(`GET /cloud failed: ${r.status}`);
    return (await r.json()) as { points: number[][] };
  }

  projectBody(state: AdjustState): string {
    return JSON.stringify({
      extrinsic: extrinsicJson(state),
      intrinsics: { fx: state.fx, fy: state.fy },
      overlap_filter: state.overlapFilter,
      intensity_color: state.intensityColor,
    });
  }

  async project(state: AdjustState,
                intrinsics?: Record<string, number>):
      Promise<ProjectResponse> {
    const body = {
      extrinsic: extrinsicJson(state),
      overlap_filter: state.overlapFilter,
      intensity_color: state.intensityColor,
    } as Record<string, unknown>;
    if (intrinsics) {
      body.intrinsics = { ...intrinsics, fx: state.fx, fy: state.fy };
    }
    const r = await this.fetchImpl(`${this.base}/project`, {
      method: "POST",
      body: JSON.stringify(body),
      headers: { "Content-Type": "application/json" },
    });
    if (!r.ok) throw new Error(`POST /project failed: ${r.status}`);
    return (await r.json()) as ProjectResponse;
  }

  async save(state: AdjustState): Promise<{ ok: boolean; path: string }> {
    const r = await this.fetchImpl(`${this.base}/save`, {
      method: "POST",
      body: JSON.stringify({ extrinsic: extrinsicJson(state) }),
      headers: { "Content-Type": "application/json" },
    });
    if (!r.ok) throw new Error(`POST /save failed: ${r.status}`);
    return (await r.json()) as { ok: boolean; path: string };
  }

  async result(): Promise<{ extrinsic: { euler_zyx_deg: number[];
                                         translation_m: number[] } }> {
    const r = await this.fetchImpl(`${this.base}/result`);
    if (!r.ok) throw new Error(`GET /result failed: ${r.status}`);
    return (await r.json()) as {
      extrinsic: { euler_zyx_deg: number[]; translation_m: number[] };
    };
  }
}

/** Latest-wins debounce: one request in flight, at most one pending. */
export class ProjectQueue {
  private inflight = false;
  private pending: AdjustState | null = null;

  constructor(
    private run: (state: AdjustState) => Promise<void>,
  ) {}

  request(state: AdjustState): void {
    if (this.inflight) {
      this.pending = state;
      return;
    }
    this.inflight = true;
    void this.run(state).finally(() => {
      this.inflight = false;
      const next = this.pending;
      this.pending = null;
      if (next) this.request(next);
    });
  }
}
