// Entry point: wires the socket client, the session model, the drag
// handlers and the single rendering loop together.

import { armSegments } from './arm.js';
import { SessionClient } from './client.js';
import { projectLatent } from './pca.js';
import { renderArm, renderPcaScatter, renderStrip, renderTorqueSeries } from './render.js';
import { UiSessionState } from './state.js';
import { DragTracker } from './torque.js';

const WS_URL = `ws://${location.hostname}:${location.port || 8000}/ws`;

function canvasCtx(id: string): CanvasRenderingContext2D {
  const canvas = document.getElementById(id) as HTMLCanvasElement | null;
  if (canvas === null) throw new Error(`missing canvas #${id}`);
  const ctx = canvas.getContext('2d');
  if (ctx === null) throw new Error(`no 2d context for #${id}`);
  return ctx;
}

function main(): void {
  const state = new UiSessionState();
  const drag = new DragTracker({ nmPerPixel: 0.05, bound: 1 });
  const arm = canvasCtx('arm');
  const pca = canvasCtx('pca');
  const intentStrip = canvasCtx('intent-strip');
  const behaviorStrip = canvasCtx('behavior-strip');
  const torquePlot = canvasCtx('torque-plot');
  const banner = document.getElementById('banner')!;
  const errors = document.getElementById('errors')!;

  const client = new SessionClient(WS_URL, {
    onConfig: (config) => {
      state.applyConfig(config, performance.now());
      drag.setBound(config.torque_bound);
      buildIntentButtons(config.primitives);
    },
    onError: (reason) => {
      errors.textContent = reason;
      console.warn('server error:', reason);
    },
    onStatus: (status) => {
      state.status = status;
    },
  });

  function buildIntentButtons(primitives: string[]): void {
    const holder = document.getElementById('intents')!;
    holder.textContent = '';
    for (const name of primitives) {
      const btn = document.createElement('button');
      btn.textContent = name;
      btn.onclick = () => client.sendIntent(name);
      holder.appendChild(btn);
    }
  }

  // --- drag-to-torque on the arm canvas -----------------------------------
  function jointAt(x: number, y: number): number | null {
    if (state.snapshot === null || state.config === null) return null;
    const n = state.config.joints;
    const canvas = arm.canvas;
    const linkLength = Math.min(canvas.width, canvas.height) / (n + 1.5);
    const segments = armSegments(state.snapshot.state.theta, linkLength, {
      x: 40,
      y: canvas.height / 2,
    });
    for (let j = 0; j < n; j++) {
      const p = segments[j].from;
      if (Math.hypot(p.x - x, p.y - y) < 14) return j;
    }
    return null;
  }

  arm.canvas.addEventListener('mousedown', (e) => {
    const rect = arm.canvas.getBoundingClientRect();
    const joint = jointAt(e.clientX - rect.left, e.clientY - rect.top);
    if (joint !== null) state.selectJoint(joint);
    drag.press(joint, e.clientY);
  });
  window.addEventListener('mousemove', (e) => {
    const cmd = drag.move(e.clientY);
    if (cmd !== null) client.sendTorque(cmd.joint, cmd.torque, performance.now());
  });
  window.addEventListener('mouseup', () => {
    const cmd = drag.release();
    if (cmd !== null) client.sendTorque(cmd.joint, cmd.torque, performance.now());
  });

  // --- single rendering loop ----------------------------------------------
  function frame(): void {
    const now = performance.now();
    const snap = client.coalescer.take(); // coalesced to the latest tick
    if (snap !== null) {
      state.applySnapshot(snap, now);
      if (snap.latent !== null && state.config !== null) {
        const dHigh = snap.latent.d[snap.latent.d.length - 1];
        state.pushPcaPoint(projectLatent(dHigh, state.config.pca));
      }
    }
    banner.hidden = !(state.status === 'disconnected' || state.isStale(now));
    renderArm(arm, state, now);
    renderPcaScatter(pca, state);
    const classes = state.config?.classes ?? [];
    renderStrip(intentStrip, state.intentStrip, classes);
    renderStrip(behaviorStrip, state.behaviorStrip, classes);
    renderTorqueSeries(torquePlot, state.torqueSeries);
    requestAnimationFrame(frame);
  }

  client.connect();
  requestAnimationFrame(frame);
}

main();
