/** Typed client for the stentrom prediction service. */

export type ParamName = "y_P1" | "z_P1" | "D_v" | "D_a" | "y_Ca" | "eta";

/** Parameter order used by every `mu` array on the wire. */
export const PARAM_ORDER: ParamName[] = ["y_P1", "z_P1", "D_v", "D_a", "y_Ca", "eta"];

export interface StentInfo {
  n_nodes: number;
  n_beams: number;
  R_w: number;
  R_s: number;
  L_s: number;
  /** Flattened undeformed node positions (3 * n_nodes). */
  nodes: number[];
  /** Flattened beam connectivity (2 * n_beams node indices). */
  beams: number[];
}

export interface Info {
  schema_version: number;
  predictor_kind: string;
  n_cl: number;
  L: number;
  classifier: string;
  classifiers: string[];
  ranges: Record<ParamName, [number, number]>;
  z_end: number;
  stent: StentInfo;
}

export interface PredictRequest {
  mu: number[];
  samples?: number;
  force?: boolean;
  f64?: boolean;
  seed?: number;
}

export interface Prediction {
  schema_version: number;
  label: "success" | "failure";
  score: number;
  classifier: string;
  u_p?: number[];
  nodes?: number[];
  node_std?: number[];
  samples?: number[][];
  forced?: boolean;
}

export interface VesselRequest {
  y_P1: number;
  z_P1: number;
  D_v: number;
  D_a: number;
  y_Ca: number;
}

export interface VesselSurface {
  schema_version: number;
  vertices: number[];
  triangles: number[];
  centerline: number[];
}

export interface Api {
  info(): Promise<Info>;
  predict(req: PredictRequest): Promise<Prediction>;
  vessel(req: VesselRequest): Promise<VesselSurface>;
}

async function post<T>(url: string, body: unknown): Promise<T> {
  const res = await fetch(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!res.ok) {
    let detail = `${res.status}`;
    try {
      const err = (await res.json()) as { error?: string };
      if (err.error) detail = err.error;
    } catch {
      /* non-JSON error body */
    }
    throw new Error(detail);
  }
  return (await res.json()) as T;
}

export class HttpApi implements Api {
  constructor(private base: string = "") {}

  async info(): Promise<Info> {
    const res = await fetch(`${this.base}/api/info`);
    if (!res.ok) throw new Error(`info failed: ${res.status}`);
    return (await res.json()) as Info;
  }

  predict(req: PredictRequest): Promise<Prediction> {
    return post(`${this.base}/api/predict`, req);
  }

  vessel(req: VesselRequest): Promise<VesselSurface> {
    return post(`${this.base}/api/vessel`, req);
  }
}
