import { describe, expect, it } from 'vitest';

import { applyDrag, boxesEqual, hitTest, snapToImage } from '../src/boxes';
import { fitTransform, imageToScreen, screenToImage, zoomAt } from '../src/overlay';

describe('snapToImage', () => {
  it('rounds to integers', () => {
    expect(snapToImage({ x: 1.4, y: 2.6, w: 9.8, h: 10.2 }, 100, 100)).toEqual({
      x: 1,
      y: 3,
      w: 10,
      h: 10,
    });
  });

  it('clips into the image', () => {
    expect(snapToImage({ x: -5, y: -5, w: 20, h: 20 }, 100, 100)).toEqual({
      x: 0,
      y: 0,
      w: 15,
      h: 15,
    });
    expect(snapToImage({ x: 90, y: 95, w: 30, h: 30 }, 100, 100)).toEqual({
      x: 90,
      y: 95,
      w: 10,
      h: 5,
    });
  });

  it('never collapses to zero area', () => {
    const out = snapToImage({ x: 99.6, y: 99.6, w: 0.2, h: 0.2 }, 100, 100);
    expect(out.w).toBeGreaterThan(0);
    expect(out.h).toBeGreaterThan(0);
    expect(out.x + out.w).toBeLessThanOrEqual(100);
  });
});

describe('hitTest', () => {
  const box = { x: 10, y: 10, w: 40, h: 30 };

  it('grabs corners within tolerance', () => {
    expect(hitTest(box, 10, 10, 3)).toBe('nw');
    expect(hitTest(box, 50, 10, 3)).toBe('ne');
    expect(hitTest(box, 10, 40, 3)).toBe('sw');
    expect(hitTest(box, 51, 41, 3)).toBe('se');
  });

  it('grabs the interior as a move', () => {
    expect(hitTest(box, 30, 25, 3)).toBe('move');
  });

  it('misses far away', () => {
    expect(hitTest(box, 80, 80, 3)).toBeNull();
  });
});

describe('applyDrag', () => {
  const box = { x: 10, y: 10, w: 40, h: 30 };

  it('moves the whole box and clamps at the border', () => {
    expect(applyDrag(box, 'move', 5, -3, 100, 100)).toEqual({ x: 15, y: 7, w: 40, h: 30 });
    expect(applyDrag(box, 'move', 500, 500, 100, 100)).toEqual({ x: 60, y: 70, w: 40, h: 30 });
  });

  it('resizes from a corner', () => {
    expect(applyDrag(box, 'se', 10, 5, 100, 100)).toEqual({ x: 10, y: 10, w: 50, h: 35 });
    expect(applyDrag(box, 'nw', 5, 5, 100, 100)).toEqual({ x: 15, y: 15, w: 35, h: 25 });
  });

  it('keeps a minimum size when over-dragged', () => {
    const out = applyDrag(box, 'se', -200, -200, 100, 100);
    expect(out.w).toBeGreaterThanOrEqual(1);
    expect(out.h).toBeGreaterThanOrEqual(1);
  });
});

describe('view transforms', () => {
  it('fit centers the image', () => {
    const t = fitTransform(100, 50, 200, 200);
    expect(t.scale).toBe(2);
    expect(t.offsetY).toBe(50);
  });

  it('round-trips image and screen coordinates', () => {
    const t = fitTransform(640, 480, 1100, 780);
    const p = imageToScreen(t, 123, 45);
    const back = screenToImage(t, p.x, p.y);
    expect(back.x).toBeCloseTo(123, 9);
    expect(back.y).toBeCloseTo(45, 9);
  });

  it('full-image box covers the whole drawn image at any zoom', () => {
    let t = fitTransform(200, 100, 800, 600);
    for (const factor of [1, 2, 0.5]) {
      t = zoomAt(t, factor, 400, 300);
      const tl = imageToScreen(t, 0, 0);
      const br = imageToScreen(t, 200, 100);
      expect(br.x - tl.x).toBeCloseTo(200 * t.scale, 6);
      expect(br.y - tl.y).toBeCloseTo(100 * t.scale, 6);
    }
  });

  it('zoom keeps the pivot fixed', () => {
    const t = fitTransform(500, 500, 700, 700);
    const before = screenToImage(t, 350, 350);
    const t2 = zoomAt(t, 2, 350, 350);
    const after = screenToImage(t2, 350, 350);
    expect(after.x).toBeCloseTo(before.x, 9);
    expect(after.y).toBeCloseTo(before.y, 9);
  });
});

describe('boxesEqual', () => {
  it('compares values and nulls', () => {
    expect(boxesEqual({ x: 1, y: 2, w: 3, h: 4 }, { x: 1, y: 2, w: 3, h: 4 })).toBe(true);
    expect(boxesEqual({ x: 1, y: 2, w: 3, h: 4 }, { x: 1, y: 2, w: 3, h: 5 })).toBe(false);
    expect(boxesEqual(null, null)).toBe(true);
    expect(boxesEqual(null, { x: 1, y: 2, w: 3, h: 4 })).toBe(false);
  });
});
