// Drag gesture -> torque command mapping.  Pure functions so the mapping,
// clamping and release behaviour are all unit-testable.

export interface DragParams {
  /** Newtons-metre per pixel of vertical drag. */
  nmPerPixel: number;
  /** Safety bound announced by the server in the config message. */
  bound: number;
}

export function clampTorque(torque: number, bound: number): number {
  return Math.min(bound, Math.max(-bound, torque));
}

/**
 * Linear map from drag displacement (pixels, + = up = + torque) to torque,
 * clamped client-side to the server-announced bound.
 */
export function dragToTorque(displacementPx: number, params: DragParams): number {
  return clampTorque(displacementPx * params.nmPerPixel, params.bound);
}

export interface DragGesture {
  joint: number;
  startY: number;
}

/** Tracks one press-drag-release cycle on a selected joint. */
export class DragTracker {
  private gesture: DragGesture | null = null;

  constructor(private params: DragParams) {}

  setBound(bound: number): void {
    this.params = { ...this.params, bound };
  }

  /** Returns false when the press is on no selectable joint (ignored). */
  press(joint: number | null, y: number): boolean {
    if (joint === null || joint < 0) return false;
    this.gesture = { joint, startY: y };
    return true;
  }

  /** Current torque for a move event; null when no gesture is active. */
  move(y: number): { joint: number; torque: number } | null {
    if (this.gesture === null) return null;
    // screen y grows downward; dragging up should be positive torque
    const displacement = this.gesture.startY - y;
    return {
      joint: this.gesture.joint,
      torque: dragToTorque(displacement, this.params),
    };
  }

  /** Release always commands zero torque on the dragged joint. */
  release(): { joint: number; torque: number } | null {
    if (this.gesture === null) return null;
    const joint = this.gesture.joint;
    this.gesture = null;
    return { joint, torque: 0 };
  }

  get active(): boolean {
    return this.gesture !== null;
  }
}
