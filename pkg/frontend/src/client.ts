// WebSocket client: parses frames, feeds the coalescer, rate-limits
// outbound commands to the fast tick rate, reconnects with a fixed delay.

import { TickCoalescer } from './coalesce.js';
import {
  envelope,
  parseMessage,
  type ConfigPayload,
  type Envelope,
  type IntentCmdPayload,
  type TorqueCmdPayload,
} from './messages.js';
import { RateLimiter } from './ratelimit.js';

const RECONNECT_DELAY_MS = 2000;

export interface ClientHooks {
  onConfig(config: ConfigPayload): void;
  onError(reason: string): void;
  onStatus(status: 'connecting' | 'connected' | 'disconnected'): void;
}

export class SessionClient {
  readonly coalescer = new TickCoalescer();
  private ws: WebSocket | null = null;
  private limiter = new RateLimiter(50);
  private closed = false;

  constructor(private readonly url: string, private readonly hooks: ClientHooks) {}

  connect(): void {
    this.closed = false;
    this.hooks.onStatus('connecting');
    this.ws = new WebSocket(this.url);
    this.ws.onmessage = (event: MessageEvent) => this.handleFrame(String(event.data));
    this.ws.onopen = () => console.log('session socket open');
    this.ws.onerror = (e: Event) => console.error('session socket error', e);
    this.ws.onclose = () => {
      this.hooks.onStatus('disconnected');
      if (!this.closed) {
        setTimeout(() => this.connect(), RECONNECT_DELAY_MS);
      }
    };
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }

  private handleFrame(raw: string): void {
    const msg = parseMessage(raw);
    if (msg === null) {
      console.warn('dropping malformed frame');
      return;
    }
    switch (msg.type) {
      case 'hello':
        this.hooks.onStatus('connected');
        break;
      case 'config': {
        const config = msg.payload as ConfigPayload;
        this.limiter = new RateLimiter(config.tick_hz);
        this.hooks.onConfig(config);
        break;
      }
      case 'error':
        this.hooks.onError((msg.payload as { reason: string }).reason);
        break;
      default:
        this.coalescer.push(msg);
    }
  }

  /** Rate-limited; returns false when the command was dropped. */
  sendTorque(joint: number, torque: number, nowMs: number): boolean {
    // zero (release) always goes through so a joint is never left loaded
    if (torque !== 0 && !this.limiter.allow(nowMs)) return false;
    return this.send(envelope<TorqueCmdPayload>('torque_cmd', { joint, torque }));
  }

  sendIntent(primitive: string): boolean {
    return this.send(envelope<IntentCmdPayload>('intent_cmd', { primitive }));
  }

  private send(msg: Envelope): boolean {
    if (this.ws === null || this.ws.readyState !== WebSocket.OPEN) return false;
    this.ws.send(JSON.stringify(msg));
    return true;
  }
}
