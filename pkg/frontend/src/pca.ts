// Projection of the high-layer deterministic state onto the 2-D plane
// announced by the server in the config message.  The UI never computes its
// own axes: mean, axes and bound all come from the server.

import type { PcaConfig } from './messages.js';

export function projectLatent(dHigh: number[], pca: PcaConfig): [number, number] {
  const n = pca.mean.length;
  if (dHigh.length !== n) {
    throw new Error(`latent dim ${dHigh.length} does not match pca mean dim ${n}`);
  }
  let x = 0;
  let y = 0;
  for (let i = 0; i < n; i++) {
    const c = dHigh[i] - pca.mean[i];
    x += c * pca.axes[0][i];
    y += c * pca.axes[1][i];
  }
  return [x, y];
}

/** Clamp a projected point into the server-announced square bound. */
export function clampToBound(p: [number, number], bound: number): [number, number] {
  const clip = (v: number) => Math.min(bound, Math.max(-bound, v));
  return [clip(p[0]), clip(p[1])];
}
