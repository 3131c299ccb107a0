// Wire schema of the privacy service, mirrored field-for-field.

export type Mechanism = "plm" | "psm" | "trpsm";
export type Density = "sparse" | "dense";
export type Decision = "initial" | "released" | "reused";

export interface WireLocation {
  lat: number;
  lon: number;
}

export interface PrivArRequest {
  v: 1;
  session_id: string;
  mechanism: Mechanism;
  epsilon: number;
  epsilon_total?: number;
  delta?: number;
  density?: Density;
  true_location: WireLocation;
  timestamp: string;
  seed?: number;
}

export interface WireObject {
  id: string;
  lat: number;
  lon: number;
}

export interface WireTimings {
  perturb_ms: number;
  objects_ms: number;
  serialize_ms: number;
  total_ms: number;
}

export interface PrivArResponse {
  v: 1;
  released_location: WireLocation;
  decision: Decision;
  budget_spent: number | null;
  budget_left: number | null;
  objects: WireObject[];
  catchable_pct: number | null;
  timings: WireTimings;
}

export interface TopupResponse {
  v: 1;
  session_id: string;
  budget_left: number;
  epsilon_total: number;
}

export interface EndResponse {
  v: 1;
  session_id: string;
  releases: number;
  spend: number;
  epsilon: number;
  epsilon_total: number;
}

// Privacy-level presets; the slider maps to these epsilons exactly.
export const PRIVACY_LEVELS = { low: 0.5, medium: 0.2, high: 0.1 } as const;
export type PrivacyLevel = keyof typeof PRIVACY_LEVELS;

// Session-budget default for trpsm when the advanced field is left empty.
export const DEFAULT_BUDGET_MULTIPLE = 12;
export const DEFAULT_DELTA_M = 5;
export const VISIBILITY_RADIUS_M = 100;
