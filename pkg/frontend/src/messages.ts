// Message types for the live-session WebSocket protocol (schema_version 1).
// Mirrors schemas/session_messages.schema.json on the server side.

export const SCHEMA_VERSION = 1;

export type MessageType =
  | 'hello'
  | 'config'
  | 'state'
  | 'torque_cmd'
  | 'intent_cmd'
  | 'latent'
  | 'metrics'
  | 'error';

export interface Envelope<T = unknown> {
  type: MessageType;
  t: number; // network tick counter
  schema_version: number;
  payload: T;
}

export interface PcaConfig {
  mean: number[];
  axes: [number[], number[]];
  bound: number;
}

export interface ConfigPayload {
  joints: number;
  joint_names: string[];
  limits: [number, number][];
  primitives: string[];
  profile: string;
  torque_bound: number;
  network_hz: number;
  tick_hz: number;
  classes: string[];
  pca: PcaConfig;
}

export type JointMode = 'active' | 'compliant';

export interface StatePayload {
  theta: number[];
  theta_net: number[];
  tau_ext: number[];
  modes: JointMode[];
  applied_torque: number[];
  intent: string;
  intent_scores?: number[];
  behavior_scores?: number[];
}

export interface LatentPayload {
  t: number;
  d: number[][];
  mu_p: number[][];
  sig_p: number[][];
  mu_q: number[][];
  sig_q: number[][];
}

export interface MetricsPayload {
  sum_abs_tau_ext: number;
  tracking_error: number;
}

export interface ErrorPayload {
  reason: string;
}

export interface TorqueCmdPayload {
  joint: number;
  torque: number;
}

export interface IntentCmdPayload {
  primitive: string;
}

export function envelope<T>(type: MessageType, payload: T): Envelope<T> {
  return { type, t: 0, schema_version: SCHEMA_VERSION, payload };
}

/** Parse one raw socket frame; returns null for anything malformed. */
export function parseMessage(raw: string): Envelope | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== 'object' || doc === null) return null;
  const m = doc as Record<string, unknown>;
  if (typeof m.type !== 'string' || typeof m.t !== 'number') return null;
  if (m.schema_version !== SCHEMA_VERSION) return null;
  if (typeof m.payload !== 'object' || m.payload === null) return null;
  return m as unknown as Envelope;
}
