// UI state machine: one session at a time, one request in flight at a time.
// Everything shown to the user comes verbatim from the latest response; the
// controller computes nothing about privacy itself.

import { BudgetExhaustedError, PrivArClient, ServiceError } from "./client.js";
import { toPlanar, toWire, type Planar } from "./geo.js";
import {
  DEFAULT_BUDGET_MULTIPLE,
  DEFAULT_DELTA_M,
  PRIVACY_LEVELS,
  type Decision,
  type Density,
  type EndResponse,
  type Mechanism,
  type PrivacyLevel,
  type PrivArRequest,
  type WireLocation,
  type WireObject,
} from "./types.js";

// Rejected configure() input; the form shows the message inline.
export class ConfigError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ConfigError";
  }
}

export interface ConfigureInput {
  mechanism: Mechanism;
  level?: PrivacyLevel;
  epsilon?: number; // advanced field; overrides the level preset
  epsilonTotal?: number; // trpsm only
  delta?: number; // trpsm only
  density?: Density;
  seed?: number; // pins the service's noise stream for reproducible demos
}

export interface ActiveConfig {
  mechanism: Mechanism;
  epsilon: number;
  epsilonTotal?: number;
  delta?: number;
  density?: Density;
  seed?: number;
}

export interface ExhaustedInfo {
  spend: number;
  epsilonTotal: number;
}

export interface UiState {
  sessionId: string | null;
  config: ActiveConfig | null;
  avatar: Planar; // true position, local meters
  released: Planar | null; // last released position, local meters
  releasedWire: WireLocation | null;
  objects: WireObject[];
  catchablePct: number | null;
  decision: Decision | null;
  budgetLeft: number | null;
  epsilonTotal: number | null;
  spentTotal: number; // sum of budget_spent fields received
  releasedMoves: number; // times the released marker changed position
  responses: number;
  banner: string | null; // network / service failure notice
  exhausted: ExhaustedInfo | null; // budget modal when set
  lastLedger: EndResponse | null; // final ledger of the previous session
}

function freshState(): UiState {
  return {
    sessionId: null,
    config: null,
    avatar: { x: 0, y: 0 },
    released: null,
    releasedWire: null,
    objects: [],
    catchablePct: null,
    decision: null,
    budgetLeft: null,
    epsilonTotal: null,
    spentTotal: 0,
    releasedMoves: 0,
    responses: 0,
    banner: null,
    exhausted: null,
    lastLedger: null,
  };
}

function defaultId(): string {
  return typeof crypto !== "undefined" && "randomUUID" in crypto
    ? crypto.randomUUID()
    : `s${Math.random().toString(36).slice(2)}`;
}

export class DemoController {
  readonly state: UiState = freshState();

  private flight: Promise<void> | null = null;
  private queued = false;

  constructor(
    private readonly client: PrivArClient,
    private readonly origin: WireLocation,
    private readonly now: () => string = () => new Date().toISOString(),
    private readonly newId: () => string = defaultId,
  ) {}

  // Ends any prior session (keeping its final ledger) and opens a new one.
  async configure(input: ConfigureInput): Promise<void> {
    const epsilon = input.epsilon ?? PRIVACY_LEVELS[input.level ?? "high"];
    if (!Number.isFinite(epsilon) || epsilon <= 0) {
      throw new ConfigError(`epsilon must be a positive number, got ${input.epsilon}`);
    }
    const config: ActiveConfig = {
      mechanism: input.mechanism,
      epsilon,
      density: input.density,
      seed: input.seed,
    };
    if (input.mechanism === "trpsm") {
      const delta = input.delta ?? DEFAULT_DELTA_M;
      if (!Number.isFinite(delta) || delta < 0) {
        throw new ConfigError(`delta must be >= 0 meters, got ${input.delta}`);
      }
      const epsilonTotal = input.epsilonTotal ?? DEFAULT_BUDGET_MULTIPLE * epsilon;
      if (!Number.isFinite(epsilonTotal) || epsilonTotal < 2 * epsilon) {
        throw new ConfigError(`session budget must be at least 2x epsilon, got ${input.epsilonTotal}`);
      }
      config.delta = delta;
      config.epsilonTotal = epsilonTotal;
    } else if (input.epsilonTotal != null || input.delta != null) {
      throw new ConfigError("session budget and threshold apply to trpsm only");
    }

    const ledger = await this.endCurrent();
    const s = this.state;
    Object.assign(s, freshState(), {
      avatar: s.avatar, // the avatar stays where the user left it
      lastLedger: ledger ?? s.lastLedger,
      sessionId: this.newId(),
      config,
      epsilonTotal: config.epsilonTotal ?? null,
    });
  }

  // Move the avatar and report the new position. Returns once the latest
  // position has been reported (or its failure is shown).
  steer(dx: number, dy: number): Promise<void> {
    this.state.avatar = { x: this.state.avatar.x + dx, y: this.state.avatar.y + dy };
    return this.send();
  }

  // Re-report the current position (auto-ping cadence).
  ping(): Promise<void> {
    return this.send();
  }

  // Grow the session budget, dismiss the modal, and retry the pending move.
  async topUp(additional: number): Promise<void> {
    const s = this.state;
    if (!s.sessionId) return;
    try {
      const ack = await this.client.topup(s.sessionId, additional);
      s.epsilonTotal = ack.epsilon_total;
      s.budgetLeft = ack.budget_left;
      s.exhausted = null;
    } catch (err) {
      s.banner = describeFailure(err);
      return;
    }
    await this.send();
  }

  // Close the session and report its final ledger.
  async endSession(): Promise<EndResponse | null> {
    const ledger = await this.endCurrent();
    const s = this.state;
    if (ledger) s.lastLedger = ledger;
    s.sessionId = null;
    s.config = null;
    s.exhausted = null;
    return ledger;
  }

  // epsilon_total - budget_left from the latest response, never negative.
  // Stateless mechanisms have no session ledger; show accumulated spend.
  budgetGauge(): number {
    const s = this.state;
    if (s.epsilonTotal != null && s.budgetLeft != null) {
      return Math.max(0, s.epsilonTotal - s.budgetLeft);
    }
    return s.spentTotal;
  }

  private async endCurrent(): Promise<EndResponse | null> {
    const s = this.state;
    if (!s.sessionId || !s.config || s.config.mechanism !== "trpsm" || s.responses === 0) {
      return null;
    }
    try {
      return await this.client.end(s.sessionId);
    } catch (err) {
      // an expired or unknown session has no ledger left to report
      if (err instanceof ServiceError && err.status === 404) return null;
      s.banner = describeFailure(err);
      return null;
    }
  }

  private send(): Promise<void> {
    if (!this.state.sessionId || !this.state.config) {
      return Promise.resolve();
    }
    if (this.flight) {
      // coalesce: the running loop will re-report the latest position
      this.queued = true;
      return this.flight;
    }
    this.flight = (async () => {
      try {
        do {
          this.queued = false;
          await this.reportOnce();
        } while (this.queued);
      } finally {
        this.flight = null;
      }
    })();
    return this.flight;
  }

  private async reportOnce(): Promise<void> {
    const s = this.state;
    if (!s.sessionId || !s.config) return;
    const req: PrivArRequest = {
      v: 1,
      session_id: s.sessionId,
      mechanism: s.config.mechanism,
      epsilon: s.config.epsilon,
      true_location: toWire(this.origin, s.avatar),
      timestamp: this.now(),
    };
    if (s.config.mechanism === "trpsm") {
      req.epsilon_total = s.config.epsilonTotal;
      req.delta = s.config.delta;
    }
    if (s.config.density) req.density = s.config.density;
    if (s.config.seed != null) req.seed = s.config.seed;

    try {
      const resp = await this.client.privar(req);
      const moved =
        s.releasedWire == null ||
        s.releasedWire.lat !== resp.released_location.lat ||
        s.releasedWire.lon !== resp.released_location.lon;
      if (moved) s.releasedMoves += 1;
      s.releasedWire = resp.released_location;
      s.released = toPlanar(this.origin, resp.released_location);
      s.objects = resp.objects;
      s.catchablePct = resp.catchable_pct;
      s.decision = resp.decision;
      s.budgetLeft = resp.budget_left;
      if (resp.budget_spent != null) s.spentTotal += resp.budget_spent;
      s.responses += 1;
      s.banner = null;
    } catch (err) {
      if (err instanceof BudgetExhaustedError) {
        s.exhausted = { spend: err.spend, epsilonTotal: err.epsilonTotal };
      } else {
        // the avatar stays moved locally; the released state is untouched
        s.banner = describeFailure(err);
      }
    }
  }
}

function describeFailure(err: unknown): string {
  if (err instanceof ServiceError) {
    const detail = (err.payload as { error?: string } | null)?.error;
    return `service error ${err.status}${detail ? `: ${detail}` : ""}`;
  }
  return "network failure: released location not updated";
}
