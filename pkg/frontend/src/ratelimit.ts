// Client-side command rate limiter: outbound commands are capped at the
// controller's fast tick rate so a busy mouse cannot flood the socket.

export class RateLimiter {
  private readonly minIntervalMs: number;
  private lastSent = -Infinity;

  constructor(tickHz: number) {
    if (!(tickHz > 0)) throw new Error(`tickHz must be positive, got ${tickHz}`);
    this.minIntervalMs = 1000 / tickHz;
  }

  /** True when a command may be sent at time nowMs (and records the send). */
  allow(nowMs: number): boolean {
    if (nowMs - this.lastSent < this.minIntervalMs) return false;
    this.lastSent = nowMs;
    return true;
  }
}
