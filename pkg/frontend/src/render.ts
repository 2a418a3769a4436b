// Canvas drawing.  All geometry and scaling decisions live in the pure
// modules (arm.ts, pca.ts); this file only puts pixels on screen.

import { armSegments, tauBarLength } from './arm.js';
import { clampToBound } from './pca.js';
import type { UiSessionState } from './state.js';

const MODE_COLOR = { active: '#2a7a2a', compliant: '#c77f00' } as const;
const TAU_BAR_MAX_PX = 40;

export function renderArm(
  ctx: CanvasRenderingContext2D,
  state: UiSessionState,
  nowMs: number,
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);

  if (state.isStale(nowMs) || state.snapshot === null || state.config === null) {
    ctx.fillStyle = '#b00020';
    ctx.font = '16px sans-serif';
    ctx.fillText('disconnected — no fresh state', 20, height / 2);
    return;
  }

  const snap = state.snapshot;
  const n = state.config.joints;
  const linkLength = Math.min(width, height) / (n + 1.5);
  const origin = { x: 40, y: height / 2 };

  // network prediction (intention) in red underneath, plant (behavior) on top
  drawChain(ctx, snap.state.theta_net, linkLength, origin, '#d04040', 2);
  drawChain(ctx, snap.state.theta, linkLength, origin, '#3060d0', 4);

  const segments = armSegments(snap.state.theta, linkLength, origin);
  for (let j = 0; j < n; j++) {
    const p = segments[j].from;
    // joint dot, highlighted when selected
    ctx.beginPath();
    ctx.arc(p.x, p.y, j === state.selectedJoint ? 8 : 5, 0, 2 * Math.PI);
    ctx.fillStyle = j === state.selectedJoint ? '#111' : '#666';
    ctx.fill();
    // mode badge
    ctx.fillStyle = MODE_COLOR[snap.state.modes[j]];
    ctx.font = '10px sans-serif';
    ctx.fillText(snap.state.modes[j], p.x - 12, p.y - 12);
    // external-torque bar, clamped at the safety bound
    const len = tauBarLength(snap.state.tau_ext[j], state.config.torque_bound, TAU_BAR_MAX_PX);
    ctx.fillStyle = snap.state.tau_ext[j] >= 0 ? '#3060d0' : '#d04040';
    ctx.fillRect(p.x - 2, p.y + 10, 4, len);
  }
}

function drawChain(
  ctx: CanvasRenderingContext2D,
  angles: number[],
  linkLength: number,
  origin: { x: number; y: number },
  color: string,
  width: number,
): void {
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  for (const seg of armSegments(angles, linkLength, origin)) {
    ctx.moveTo(seg.from.x, seg.from.y);
    ctx.lineTo(seg.to.x, seg.to.y);
  }
  ctx.stroke();
}

export function renderPcaScatter(
  ctx: CanvasRenderingContext2D,
  state: UiSessionState,
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  if (state.config === null) return;
  const bound = state.config.pca.bound;
  const toPx = (p: [number, number]): [number, number] => {
    const [cx, cy] = clampToBound(p, bound);
    return [((cx / bound) * 0.5 + 0.5) * width, (0.5 - (cy / bound) * 0.5) * height];
  };
  ctx.strokeStyle = '#ccc';
  ctx.strokeRect(0, 0, width, height);
  state.pcaTrail.forEach((p, i) => {
    const [x, y] = toPx(p);
    const alpha = 0.2 + 0.8 * (i / Math.max(1, state.pcaTrail.length - 1));
    ctx.fillStyle = `rgba(48, 96, 208, ${alpha.toFixed(2)})`;
    ctx.beginPath();
    ctx.arc(x, y, 3, 0, 2 * Math.PI);
    ctx.fill();
  });
}

const STRIP_COLORS = ['#d04040', '#2a7a2a', '#3060d0'];

export function renderStrip(
  ctx: CanvasRenderingContext2D,
  samples: { scores: number[] }[],
  classes: string[],
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  if (samples.length === 0) return;
  const dx = width / Math.max(1, samples.length - 1);
  for (let c = 0; c < classes.length; c++) {
    ctx.strokeStyle = STRIP_COLORS[c % STRIP_COLORS.length];
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    samples.forEach((s, i) => {
      const y = height * (1 - s.scores[c]);
      if (i === 0) ctx.moveTo(0, y);
      else ctx.lineTo(i * dx, y);
    });
    ctx.stroke();
  }
}

export function renderTorqueSeries(
  ctx: CanvasRenderingContext2D,
  series: { sumAbsTauExt: number }[],
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  if (series.length === 0) return;
  const max = Math.max(0.1, ...series.map((s) => s.sumAbsTauExt));
  const dx = width / Math.max(1, series.length - 1);
  ctx.strokeStyle = '#7030a0';
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  series.forEach((s, i) => {
    const y = height * (1 - s.sumAbsTauExt / max);
    if (i === 0) ctx.moveTo(0, y);
    else ctx.lineTo(i * dx, y);
  });
  ctx.stroke();
}
