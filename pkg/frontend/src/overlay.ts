/**
 * Canvas overlay: zoom/pan transforms between screen and image pixels,
 * and drawing of the image with its box and resize handles. The box is
 * always defined in image coordinates; zoom only affects presentation.
 */

import type { Box } from './api';
import { handlePositions } from './boxes';

export interface ViewTransform {
  scale: number;   // screen pixels per image pixel
  offsetX: number; // screen position of image pixel (0, 0)
  offsetY: number;
}

export function fitTransform(
  imgW: number,
  imgH: number,
  canvasW: number,
  canvasH: number,
): ViewTransform {
  const scale = Math.min(canvasW / imgW, canvasH / imgH);
  return {
    scale,
    offsetX: (canvasW - imgW * scale) / 2,
    offsetY: (canvasH - imgH * scale) / 2,
  };
}

export function imageToScreen(t: ViewTransform, x: number, y: number): { x: number; y: number } {
  return { x: t.offsetX + x * t.scale, y: t.offsetY + y * t.scale };
}

export function screenToImage(t: ViewTransform, x: number, y: number): { x: number; y: number } {
  return { x: (x - t.offsetX) / t.scale, y: (y - t.offsetY) / t.scale };
}

export function zoomAt(t: ViewTransform, factor: number, sx: number, sy: number): ViewTransform {
  const scale = Math.min(Math.max(t.scale * factor, 0.05), 40);
  const pivot = screenToImage(t, sx, sy);
  return {
    scale,
    offsetX: sx - pivot.x * scale,
    offsetY: sy - pivot.y * scale,
  };
}

const HANDLE_PX = 7; // constant screen size regardless of zoom

export function drawOverlay(
  ctx: CanvasRenderingContext2D,
  image: CanvasImageSource | null,
  imgW: number,
  imgH: number,
  t: ViewTransform,
  box: Box | null,
  edited: boolean,
): void {
  ctx.save();
  ctx.fillStyle = '#14161a';
  ctx.fillRect(0, 0, ctx.canvas.width, ctx.canvas.height);
  if (image) {
    ctx.imageSmoothingEnabled = t.scale < 3;
    ctx.drawImage(image, t.offsetX, t.offsetY, imgW * t.scale, imgH * t.scale);
  }
  if (box) {
    const tl = imageToScreen(t, box.x, box.y);
    ctx.strokeStyle = edited ? '#ffb347' : '#4fd47a';
    ctx.lineWidth = 2;
    ctx.strokeRect(tl.x, tl.y, box.w * t.scale, box.h * t.scale);
    ctx.fillStyle = ctx.strokeStyle;
    for (const corner of Object.values(handlePositions(box))) {
      const p = imageToScreen(t, corner.x, corner.y);
      ctx.fillRect(p.x - HANDLE_PX / 2, p.y - HANDLE_PX / 2, HANDLE_PX, HANDLE_PX);
    }
  }
  ctx.restore();
}
