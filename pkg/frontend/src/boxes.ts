/**
 * Box arithmetic for the editor. Everything works in image pixel
 * coordinates and snaps to integers so edited boxes match the wire
 * format exactly.
 */

import type { Box } from './api';

export type Handle = 'nw' | 'ne' | 'sw' | 'se' | 'move';

export const MIN_SIZE = 4;

export function boxesEqual(a: Box | null, b: Box | null): boolean {
  if (a === null || b === null) return a === b;
  return a.x === b.x && a.y === b.y && a.w === b.w && a.h === b.h;
}

/** Round to integers and clip into a width x height image, keeping area > 0. */
export function snapToImage(box: Box, width: number, height: number): Box {
  let x0 = Math.round(box.x);
  let y0 = Math.round(box.y);
  let x1 = Math.round(box.x + box.w);
  let y1 = Math.round(box.y + box.h);
  x0 = Math.max(0, Math.min(x0, width - 1));
  y0 = Math.max(0, Math.min(y0, height - 1));
  x1 = Math.max(x0 + 1, Math.min(x1, width));
  y1 = Math.max(y0 + 1, Math.min(y1, height));
  return { x: x0, y: y0, w: x1 - x0, h: y1 - y0 };
}

/** Corner handle positions in image coordinates. */
export function handlePositions(box: Box): Record<Exclude<Handle, 'move'>, { x: number; y: number }> {
  return {
    nw: { x: box.x, y: box.y },
    ne: { x: box.x + box.w, y: box.y },
    sw: { x: box.x, y: box.y + box.h },
    se: { x: box.x + box.w, y: box.y + box.h },
  };
}

/** Which handle a pointer at (px, py) grabs, if any; corners win over moves. */
export function hitTest(box: Box, px: number, py: number, tolerance: number): Handle | null {
  const corners = handlePositions(box);
  for (const name of ['nw', 'ne', 'sw', 'se'] as const) {
    const c = corners[name];
    if (Math.abs(px - c.x) <= tolerance && Math.abs(py - c.y) <= tolerance) {
      return name;
    }
  }
  if (px >= box.x && px <= box.x + box.w && py >= box.y && py <= box.y + box.h) {
    return 'move';
  }
  return null;
}

/**
 * Apply a drag of (dx, dy) image pixels to a handle. Whole-box moves are
 * clamped inside the image; corner resizes keep at least MIN_SIZE.
 */
export function applyDrag(
  box: Box,
  handle: Handle,
  dx: number,
  dy: number,
  width: number,
  height: number,
): Box {
  if (handle === 'move') {
    const x = Math.min(Math.max(box.x + dx, 0), width - box.w);
    const y = Math.min(Math.max(box.y + dy, 0), height - box.h);
    return snapToImage({ x, y, w: box.w, h: box.h }, width, height);
  }
  let { x, y } = box;
  let x1 = box.x + box.w;
  let y1 = box.y + box.h;
  if (handle === 'nw' || handle === 'sw') {
    x = Math.min(box.x + dx, x1 - MIN_SIZE);
  } else {
    x1 = Math.max(x1 + dx, x + MIN_SIZE);
  }
  if (handle === 'nw' || handle === 'ne') {
    y = Math.min(box.y + dy, y1 - MIN_SIZE);
  } else {
    y1 = Math.max(y1 + dy, y + MIN_SIZE);
  }
  return snapToImage({ x, y, w: x1 - x, h: y1 - y }, width, height);
}
