/** Session state machine: slider values, debounced requests, render flags.
 *
 * Framework-free so the request contract (single debounced in-flight
 * request, stale-response guard, range clamping) is testable with a mocked
 * API and fake timers.
 */

import type { Api, Info, ParamName, Prediction, VesselSurface } from "./api";
import { PARAM_ORDER } from "./api";

export interface RenderOptions {
  uncertainty: boolean;
  /** Posterior ghost count requested when the uncertainty overlay is on. */
  samples: number;
  /** Wire-thickness magnification for visibility (2x by default). */
  magnification: number;
}

export interface SessionState {
  info: Info | null;
  mu: Record<ParamName, number>;
  /** Set when the last input had to be clamped into range. */
  clampedHint: ParamName | null;
  inFlight: boolean;
  /** Last successfully completed prediction (retained across errors). */
  prediction: Prediction | null;
  /** The mu values of the last completed request. */
  sentMu: number[] | null;
  /** Posterior ghost node sets currently shown. */
  ghosts: number[][];
  /** Whether the deployed-stent render is allowed. */
  showDeployed: boolean;
  failureBadge: boolean;
  toast: string | null;
  vessel: VesselSurface | null;
  options: RenderOptions;
}

const GEOMETRY_PARAMS: ParamName[] = ["y_P1", "z_P1", "D_v", "D_a", "y_Ca"];

export class SessionController {
  readonly state: SessionState;
  private listener: (s: SessionState) => void;
  private api: Api;
  private debounceMs: number;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private seq = 0;
  private vesselDirty = false;

  constructor(api: Api, listener: (s: SessionState) => void = () => {}, debounceMs = 150) {
    this.api = api;
    this.listener = listener;
    this.debounceMs = debounceMs;
    this.state = {
      info: null,
      mu: { y_P1: 0, z_P1: 0, D_v: 0, D_a: 0, y_Ca: 0, eta: 0 },
      clampedHint: null,
      inFlight: false,
      prediction: null,
      sentMu: null,
      ghosts: [],
      showDeployed: false,
      failureBadge: false,
      toast: null,
      vessel: null,
      options: { uncertainty: false, samples: 20, magnification: 2 },
    };
  }

  private emit(): void {
    this.listener(this.state);
  }

  /** Load metadata and issue the initial prediction at mid-range values. */
  async init(): Promise<void> {
    const info = await this.api.info();
    this.state.info = info;
    for (const name of PARAM_ORDER) {
      const [lo, hi] = info.ranges[name];
      this.state.mu[name] = 0.5 * (lo + hi);
    }
    this.vesselDirty = true;
    this.emit();
    await this.flush();
  }

  clamp(name: ParamName, value: number): number {
    const info = this.state.info;
    if (!info) return value;
    const [lo, hi] = info.ranges[name];
    return Math.min(Math.max(value, lo), hi);
  }

  /** Set one parameter (clamped into range) and schedule a single request. */
  setParam(name: ParamName, value: number): number {
    const clamped = this.clamp(name, Number.isFinite(value) ? value : this.state.mu[name]);
    this.state.clampedHint = clamped !== value ? name : null;
    this.state.mu[name] = clamped;
    if (GEOMETRY_PARAMS.includes(name)) this.vesselDirty = true;
    this.schedule();
    this.emit();
    return clamped;
  }

  setUncertainty(on: boolean): void {
    this.state.options.uncertainty = on;
    if (!on) {
      // dropping the overlay restores the base render without a new request
      this.state.ghosts = [];
      this.emit();
      return;
    }
    this.schedule();
    this.emit();
  }

  setSampleCount(n: number): void {
    this.state.options.samples = Math.max(0, Math.round(n));
    if (this.state.options.uncertainty) this.schedule();
    this.emit();
  }

  private schedule(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.flush();
    }, this.debounceMs);
  }

  /** Issue the pending request immediately; superseded replies are dropped. */
  async flush(): Promise<void> {
    const id = ++this.seq;
    const mu = PARAM_ORDER.map((name) => this.state.mu[name]);
    const samples = this.state.options.uncertainty ? this.state.options.samples : 0;
    const wantVessel = this.vesselDirty;
    this.vesselDirty = false;
    this.state.inFlight = true;
    this.emit();
    try {
      const vesselReq = wantVessel
        ? this.api.vessel({ y_P1: mu[0], z_P1: mu[1], D_v: mu[2], D_a: mu[3], y_Ca: mu[4] })
        : null;
      const prediction = await this.api.predict({ mu, samples });
      const vessel = vesselReq ? await vesselReq : null;
      if (id !== this.seq) return; // superseded by a newer request
      this.apply(prediction, mu, vessel);
    } catch (err) {
      if (id !== this.seq) return;
      if (wantVessel) this.vesselDirty = true;
      this.state.inFlight = false;
      this.state.toast = err instanceof Error ? err.message : String(err);
      this.emit(); // last good render is retained
    }
  }

  private apply(prediction: Prediction, mu: number[], vessel: VesselSurface | null): void {
    this.state.inFlight = false;
    this.state.toast = null;
    this.state.prediction = prediction;
    this.state.sentMu = mu;
    this.state.ghosts = prediction.samples ?? [];
    this.state.failureBadge = prediction.label === "failure";
    this.state.showDeployed =
      prediction.nodes !== undefined && (prediction.label === "success" || prediction.forced === true);
    if (vessel) this.state.vessel = vessel;
    this.emit();
  }
}
