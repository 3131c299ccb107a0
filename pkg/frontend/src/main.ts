// Browser wiring: form controls, keyboard steering, canvas loop, auto-ping.

import { PrivArClient } from "./client.js";
import { render, type Ctx2d } from "./render.js";
import { ConfigError, DemoController, type ConfigureInput } from "./state.js";
import { PRIVACY_LEVELS, type Density, type Mechanism, type PrivacyLevel } from "./types.js";

const ORIGIN = { lat: 40.0, lon: -74.0 };
const AUTO_PING_MS = 4000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function numberOrUndefined(value: string): number | undefined {
  const trimmed = value.trim();
  if (trimmed === "") return undefined;
  return Number(trimmed);
}

function main(): void {
  const canvas = el<HTMLCanvasElement>("map");
  const ctx = canvas.getContext("2d") as unknown as Ctx2d;

  const baseUrl = el<HTMLInputElement>("base-url");
  const mechanism = el<HTMLSelectElement>("mechanism");
  const level = el<HTMLSelectElement>("level");
  const epsilon = el<HTMLInputElement>("epsilon");
  const epsilonTotal = el<HTMLInputElement>("epsilon-total");
  const delta = el<HTMLInputElement>("delta");
  const density = el<HTMLSelectElement>("density");
  const seed = el<HTMLInputElement>("seed");
  const stepInput = el<HTMLInputElement>("step");
  const autoPing = el<HTMLInputElement>("auto-ping");
  const applyBtn = el<HTMLButtonElement>("apply");
  const endBtn = el<HTMLButtonElement>("end");
  const configError = el<HTMLElement>("config-error");
  const banner = el<HTMLElement>("banner");
  const modal = el<HTMLElement>("modal");
  const modalText = el<HTMLElement>("modal-text");
  const topupAmount = el<HTMLInputElement>("topup-amount");
  const topupBtn = el<HTMLButtonElement>("topup");
  const modalEndBtn = el<HTMLButtonElement>("modal-end");
  const status = el<HTMLElement>("status");

  let controller = new DemoController(new PrivArClient(baseUrl.value), ORIGIN);
  let pingTimer: number | null = null;

  const refresh = () => {
    const s = controller.state;
    render(ctx, s, { widthPx: canvas.width, heightPx: canvas.height, metersPerPx: 1 }, ORIGIN);
    banner.textContent = s.banner ?? "";
    banner.hidden = s.banner == null;
    modal.hidden = s.exhausted == null;
    if (s.exhausted) {
      modalText.textContent =
        `Budget exhausted: spent ${s.exhausted.spend.toFixed(3)} of ` +
        `${s.exhausted.epsilonTotal.toFixed(3)}. Top up or end the session.`;
    }
    const parts = [
      s.sessionId ? `session ${s.sessionId.slice(0, 8)}` : "no session",
      s.decision ? `decision ${s.decision}` : "",
      s.catchablePct != null ? `catchable ${s.catchablePct.toFixed(1)}%` : "catchable -",
      `budget spent ${controller.budgetGauge().toFixed(3)}`,
      s.budgetLeft != null ? `left ${s.budgetLeft.toFixed(3)}` : "",
      s.lastLedger ? `prev session: ${s.lastLedger.releases} releases, spend ${s.lastLedger.spend.toFixed(3)}` : "",
    ];
    status.textContent = parts.filter(Boolean).join(" | ");
  };

  const configure = async () => {
    configError.textContent = "";
    const input: ConfigureInput = {
      mechanism: mechanism.value as Mechanism,
      level: level.value as PrivacyLevel,
      epsilon: numberOrUndefined(epsilon.value),
      epsilonTotal: numberOrUndefined(epsilonTotal.value),
      delta: numberOrUndefined(delta.value),
      density: (density.value || undefined) as Density | undefined,
      seed: numberOrUndefined(seed.value),
    };
    if (input.mechanism !== "trpsm") {
      delete input.epsilonTotal;
      delete input.delta;
    }
    controller = new DemoController(new PrivArClient(baseUrl.value), ORIGIN);
    try {
      await controller.configure(input);
      await controller.ping(); // open the session at the current position
    } catch (err) {
      if (err instanceof ConfigError) {
        configError.textContent = err.message;
      } else {
        throw err;
      }
    }
    refresh();
  };

  applyBtn.addEventListener("click", () => void configure());
  endBtn.addEventListener("click", async () => {
    await controller.endSession();
    refresh();
  });
  topupBtn.addEventListener("click", async () => {
    await controller.topUp(Number(topupAmount.value) || 0);
    refresh();
  });
  modalEndBtn.addEventListener("click", async () => {
    await controller.endSession();
    refresh();
  });

  // preset hint: show the epsilon a level maps to
  level.addEventListener("change", () => {
    epsilon.placeholder = String(PRIVACY_LEVELS[level.value as PrivacyLevel]);
  });

  window.addEventListener("keydown", (ev) => {
    const step = (Number(stepInput.value) || 1) * (ev.shiftKey ? 25 : 1);
    const moves: Record<string, [number, number]> = {
      ArrowUp: [0, step],
      ArrowDown: [0, -step],
      ArrowLeft: [-step, 0],
      ArrowRight: [step, 0],
      w: [0, step],
      s: [0, -step],
      a: [-step, 0],
      d: [step, 0],
    };
    const move = moves[ev.key];
    if (!move) return;
    ev.preventDefault();
    void controller.steer(move[0], move[1]).then(refresh);
    refresh(); // the avatar moves immediately, the release follows
  });

  canvas.addEventListener("click", (ev) => {
    const rect = canvas.getBoundingClientRect();
    const dx = ev.clientX - rect.left - canvas.width / 2;
    const dy = -(ev.clientY - rect.top - canvas.height / 2);
    void controller.steer(dx, dy).then(refresh);
    refresh();
  });

  autoPing.addEventListener("change", () => {
    if (pingTimer != null) {
      window.clearInterval(pingTimer);
      pingTimer = null;
    }
    if (autoPing.checked) {
      pingTimer = window.setInterval(() => void controller.ping().then(refresh), AUTO_PING_MS);
    }
  });

  refresh();
}

main();
