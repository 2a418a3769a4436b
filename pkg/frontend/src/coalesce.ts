// Socket events arrive in bursts (state, latent, metrics per network tick).
// The render loop must never mix fields from different ticks, so incoming
// messages are buffered here and handed out as one consistent snapshot for
// the newest tick that has a state message.

import type {
  Envelope,
  LatentPayload,
  MetricsPayload,
  StatePayload,
} from './messages.js';

export interface TickSnapshot {
  t: number;
  state: StatePayload;
  latent: LatentPayload | null;
  metrics: MetricsPayload | null;
}

export class TickCoalescer {
  private pending = new Map<
    number,
    { state?: StatePayload; latent?: LatentPayload; metrics?: MetricsPayload }
  >();
  private lastRendered = -1;

  push(msg: Envelope): void {
    if (msg.type !== 'state' && msg.type !== 'latent' && msg.type !== 'metrics') {
      return;
    }
    if (msg.t <= this.lastRendered) return; // stale burst, already rendered past it
    const slot = this.pending.get(msg.t) ?? {};
    if (msg.type === 'state') slot.state = msg.payload as StatePayload;
    else if (msg.type === 'latent') slot.latent = msg.payload as LatentPayload;
    else slot.metrics = msg.payload as MetricsPayload;
    this.pending.set(msg.t, slot);
  }

  /**
   * Newest complete-enough tick (a state message is mandatory, latent and
   * metrics ride along when present).  Older buffered ticks are dropped:
   * the UI renders the latest tick only.
   */
  take(): TickSnapshot | null {
    let best = -1;
    for (const [t, slot] of this.pending) {
      if (slot.state !== undefined && t > best) best = t;
    }
    if (best < 0) return null;
    const slot = this.pending.get(best)!;
    for (const t of [...this.pending.keys()]) {
      if (t <= best) this.pending.delete(t);
    }
    this.lastRendered = best;
    return {
      t: best,
      state: slot.state!,
      latent: slot.latent ?? null,
      metrics: slot.metrics ?? null,
    };
  }

  get bufferedTicks(): number {
    return this.pending.size;
  }
}
