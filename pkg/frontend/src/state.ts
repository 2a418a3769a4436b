// Client-side session model: connection status, the latest coalesced tick,
// joint selection and rolling dashboard series.  Every number rendered by
// the UI comes out of this object, and everything in it traces back to a
// received message field.

import type { TickSnapshot } from './coalesce.js';
import type { ConfigPayload } from './messages.js';

export type ConnectionStatus = 'connecting' | 'connected' | 'disconnected';

export const STALE_AFTER_MS = 2000;

export interface StripSample {
  t: number;
  scores: number[];
}

export interface TorqueSample {
  t: number;
  sumAbsTauExt: number;
}

export class UiSessionState {
  status: ConnectionStatus = 'connecting';
  config: ConfigPayload | null = null;
  snapshot: TickSnapshot | null = null;
  selectedJoint = 0;
  lastMessageAt = -Infinity;

  intentStrip: StripSample[] = [];
  behaviorStrip: StripSample[] = [];
  torqueSeries: TorqueSample[] = [];
  pcaTrail: [number, number][] = [];

  constructor(private readonly historyLimit = 300) {}

  applyConfig(config: ConfigPayload, nowMs: number): void {
    this.config = config;
    this.status = 'connected';
    this.lastMessageAt = nowMs;
  }

  applySnapshot(snap: TickSnapshot, nowMs: number): void {
    this.snapshot = snap;
    this.lastMessageAt = nowMs;
    if (snap.state.intent_scores) {
      this.pushCapped(this.intentStrip, { t: snap.t, scores: snap.state.intent_scores });
    }
    if (snap.state.behavior_scores) {
      this.pushCapped(this.behaviorStrip, { t: snap.t, scores: snap.state.behavior_scores });
    }
    if (snap.metrics) {
      this.pushCapped(this.torqueSeries, {
        t: snap.t,
        sumAbsTauExt: snap.metrics.sum_abs_tau_ext,
      });
    }
  }

  pushPcaPoint(p: [number, number]): void {
    this.pushCapped(this.pcaTrail, p);
  }

  /** Stale stream (no message for 2 s) renders the disconnected banner. */
  isStale(nowMs: number): boolean {
    return nowMs - this.lastMessageAt > STALE_AFTER_MS;
  }

  selectJoint(joint: number): void {
    const n = this.config?.joints ?? 0;
    if (joint >= 0 && joint < n) this.selectedJoint = joint;
  }

  private pushCapped<T>(arr: T[], item: T): void {
    arr.push(item);
    if (arr.length > this.historyLimit) arr.shift();
  }
}
