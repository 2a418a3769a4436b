// 2-D schematic arm geometry.  Joint angles are chained into a planar
// linkage; pure math here, canvas drawing lives in render.ts.

export interface Point {
  x: number;
  y: number;
}

export interface Segment {
  from: Point;
  to: Point;
}

/**
 * Chain the joint angles into planar linkage segments.  Angle 0 for every
 * joint gives a straight horizontal arm (the neutral posture); each joint
 * bends the chain by its angle relative to the previous link.
 */
export function armSegments(
  angles: number[],
  linkLength: number,
  origin: Point = { x: 0, y: 0 },
): Segment[] {
  const segments: Segment[] = [];
  let heading = 0;
  let from = { ...origin };
  for (const angle of angles) {
    heading += angle;
    const to = {
      x: from.x + linkLength * Math.cos(heading),
      y: from.y - linkLength * Math.sin(heading), // screen y grows downward
    };
    segments.push({ from, to });
    from = to;
  }
  return segments;
}

/**
 * External-torque bar length in pixels, proportional to |tau| and clamped
 * at the safety bound (full bar = bound).
 */
export function tauBarLength(tauExt: number, bound: number, maxPx: number): number {
  const frac = Math.min(Math.abs(tauExt), bound) / bound;
  return frac * maxPx;
}
