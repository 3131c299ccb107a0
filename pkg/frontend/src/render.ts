// Plain 2D-canvas map in the local planar frame. No tiles, no dependencies.

import { toPlanar } from "./geo.js";
import type { UiState } from "./state.js";
import { VISIBILITY_RADIUS_M, type WireLocation } from "./types.js";

// The slice of CanvasRenderingContext2D the renderer uses; tests record it.
export interface Ctx2d {
  fillStyle: string | CanvasGradient | CanvasPattern;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  globalAlpha: number;
  clearRect(x: number, y: number, w: number, h: number): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  fill(): void;
  stroke(): void;
  clip(): void;
  save(): void;
  restore(): void;
  fillText(text: string, x: number, y: number): void;
}

export interface View {
  widthPx: number;
  heightPx: number;
  metersPerPx: number;
}

const COLORS = {
  background: "#101418",
  grid: "#1d242b",
  trueCircle: "#4fc3f7",
  releasedCircle: "#ffb74d",
  intersection: "rgba(129, 199, 132, 0.25)",
  object: "#81c784",
  avatar: "#ffffff",
  released: "#ffb74d",
  text: "#c5cdd4",
};

const GRID_STEP_M = 50;
const SCALE_BAR_M = 100;

export function render(ctx: Ctx2d, state: UiState, view: View, origin: WireLocation): void {
  const { widthPx, heightPx, metersPerPx } = view;
  // camera follows the avatar
  const cam = state.avatar;
  const px = (p: { x: number; y: number }) => ({
    x: widthPx / 2 + (p.x - cam.x) / metersPerPx,
    y: heightPx / 2 - (p.y - cam.y) / metersPerPx,
  });
  const rPx = VISIBILITY_RADIUS_M / metersPerPx;

  ctx.fillStyle = COLORS.background;
  ctx.clearRect(0, 0, widthPx, heightPx);
  ctx.fillRect(0, 0, widthPx, heightPx);

  // lattice grid
  ctx.strokeStyle = COLORS.grid;
  ctx.lineWidth = 1;
  const stepPx = GRID_STEP_M / metersPerPx;
  const x0 = ((widthPx / 2 - cam.x / metersPerPx) % stepPx + stepPx) % stepPx;
  const y0 = ((heightPx / 2 + cam.y / metersPerPx) % stepPx + stepPx) % stepPx;
  ctx.beginPath();
  for (let x = x0; x <= widthPx; x += stepPx) {
    ctx.moveTo(x, 0);
    ctx.lineTo(x, heightPx);
  }
  for (let y = y0; y <= heightPx; y += stepPx) {
    ctx.moveTo(0, y);
    ctx.lineTo(widthPx, y);
  }
  ctx.stroke();

  const a = px(state.avatar);
  const z = state.released ? px(state.released) : null;

  // intersection of the two visibility disks, filled first
  if (z) {
    ctx.save();
    ctx.beginPath();
    ctx.arc(a.x, a.y, rPx, 0, 2 * Math.PI);
    ctx.clip();
    ctx.beginPath();
    ctx.arc(z.x, z.y, rPx, 0, 2 * Math.PI);
    ctx.fillStyle = COLORS.intersection;
    ctx.fill();
    ctx.restore();
  }

  // visibility circles
  ctx.lineWidth = 1.5;
  ctx.strokeStyle = COLORS.trueCircle;
  ctx.beginPath();
  ctx.arc(a.x, a.y, rPx, 0, 2 * Math.PI);
  ctx.stroke();
  if (z) {
    ctx.strokeStyle = COLORS.releasedCircle;
    ctx.beginPath();
    ctx.arc(z.x, z.y, rPx, 0, 2 * Math.PI);
    ctx.stroke();
  }

  // objects, verbatim from the latest response
  ctx.fillStyle = COLORS.object;
  for (const o of state.objects) {
    const p = px(toPlanar(origin, { lat: o.lat, lon: o.lon }));
    ctx.beginPath();
    ctx.arc(p.x, p.y, 3, 0, 2 * Math.PI);
    ctx.fill();
  }

  // markers: true avatar, then released
  ctx.fillStyle = COLORS.avatar;
  ctx.beginPath();
  ctx.arc(a.x, a.y, 5, 0, 2 * Math.PI);
  ctx.fill();
  if (z) {
    ctx.fillStyle = COLORS.released;
    ctx.beginPath();
    ctx.arc(z.x, z.y, 5, 0, 2 * Math.PI);
    ctx.fill();
  }

  // scale bar, bottom left
  const barPx = SCALE_BAR_M / metersPerPx;
  ctx.strokeStyle = COLORS.text;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(16, heightPx - 16);
  ctx.lineTo(16 + barPx, heightPx - 16);
  ctx.stroke();
  ctx.fillStyle = COLORS.text;
  ctx.font = "12px system-ui";
  ctx.fillText(`${SCALE_BAR_M} m`, 16, heightPx - 22);
}
