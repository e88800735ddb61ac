/**
 * DOM wiring: canvas viewer with drag/resize box editing, keyboard-first
 * review flow, status filter, and live progress counters.
 *
 * Keys: a accept · r reject · c submit corrected box · e reset edit
 *       n/→ next · p/← previous · +/- zoom · 0 fit
 */

import { ApiClient, type Status } from './api';
import { applyDrag, hitTest, type Handle } from './boxes';
import { drawOverlay, fitTransform, screenToImage, zoomAt, type ViewTransform } from './overlay';
import { ReviewSession } from './session';

const api = new ApiClient('');
const reviewer =
  new URLSearchParams(location.search).get('reviewer') ?? 'expert';
const session = new ReviewSession(api, reviewer);

const canvas = document.getElementById('viewer') as HTMLCanvasElement;
const ctx = canvas.getContext('2d')!;
const statusLine = document.getElementById('status')!;
const progressLine = document.getElementById('progress')!;
const messageLine = document.getElementById('message')!;
const filterSelect = document.getElementById('filter') as HTMLSelectElement;

let view: ViewTransform = { scale: 1, offsetX: 0, offsetY: 0 };
let image: HTMLImageElement | null = null;
let dragging: { handle: Handle; lastX: number; lastY: number } | null = null;

function currentFilter(): Set<Status> {
  if (filterSelect.value === 'all') {
    return new Set<Status>(['proposed', 'accepted', 'corrected', 'rejected']);
  }
  return new Set<Status>([filterSelect.value as Status]);
}

function setMessage(text: string, isError = false): void {
  messageLine.textContent = text;
  messageLine.className = isError ? 'error' : '';
}

function redraw(): void {
  const item = session.current;
  if (!item) {
    drawOverlay(ctx, null, 0, 0, view, null, false);
    statusLine.textContent = 'queue complete';
    return;
  }
  drawOverlay(ctx, image, item.width, item.height, view, session.visibleBox, session.edited);
  const record = session.currentRecord;
  statusLine.textContent =
    `${session.cursor + 1}/${session.queue.length}  ${item.imageId}` +
    (record ? `  [${record.status}${session.edited ? ', edited' : ''}]` : '');
}

function renderProgress(): void {
  const p = session.progress;
  if (!p) return;
  progressLine.textContent =
    `proposed ${p.proposed} · accepted ${p.accepted} · ` +
    `corrected ${p.corrected} · rejected ${p.rejected} · total ${p.total}`;
}

async function showCurrent(): Promise<void> {
  const item = session.current;
  image = null;
  if (item) {
    const img = new Image();
    img.src = api.imageUrl(item.imageId);
    try {
      await img.decode();
      image = img;
    } catch {
      setMessage(`cannot load image ${item.imageId}`, true);
    }
    view = fitTransform(item.width, item.height, canvas.width, canvas.height);
  }
  renderProgress();
  redraw();
}

async function reload(): Promise<void> {
  try {
    await session.load(currentFilter());
    setMessage('');
  } catch (err) {
    setMessage(`cannot reach the review service: ${String(err)} — retry with R`, true);
    return;
  }
  await showCurrent();
}

async function act(kind: 'accept' | 'reject' | 'correct'): Promise<void> {
  const outcome =
    kind === 'accept'
      ? await session.accept()
      : kind === 'reject'
        ? await session.reject()
        : await session.correct();
  switch (outcome.kind) {
    case 'ok':
      setMessage('');
      await showCurrent();
      break;
    case 'conflict':
      setMessage('updated elsewhere; the record was reloaded — review again', true);
      redraw();
      break;
    case 'invalid':
      setMessage(outcome.message, true);
      break;
    case 'noop':
      setMessage(outcome.reason);
      break;
  }
}

canvas.addEventListener('mousedown', (ev) => {
  const item = session.current;
  const box = session.visibleBox;
  if (!item || !box) return;
  const p = screenToImage(view, ev.offsetX, ev.offsetY);
  const tolerance = 8 / view.scale;
  const handle = hitTest(box, p.x, p.y, tolerance);
  if (handle) {
    dragging = { handle, lastX: p.x, lastY: p.y };
  }
});

canvas.addEventListener('mousemove', (ev) => {
  if (!dragging) return;
  const item = session.current;
  const box = session.visibleBox;
  if (!item || !box) return;
  const p = screenToImage(view, ev.offsetX, ev.offsetY);
  const next = applyDrag(
    box,
    dragging.handle,
    p.x - dragging.lastX,
    p.y - dragging.lastY,
    item.width,
    item.height,
  );
  dragging.lastX = p.x;
  dragging.lastY = p.y;
  session.setPendingEdit(next);
  redraw();
});

window.addEventListener('mouseup', () => {
  dragging = null;
});

canvas.addEventListener('wheel', (ev) => {
  ev.preventDefault();
  view = zoomAt(view, ev.deltaY < 0 ? 1.15 : 1 / 1.15, ev.offsetX, ev.offsetY);
  redraw();
});

window.addEventListener('keydown', (ev) => {
  if (ev.target instanceof HTMLInputElement || ev.target instanceof HTMLSelectElement) {
    return;
  }
  switch (ev.key) {
    case 'a':
      void act('accept');
      break;
    case 'r':
      void act('reject');
      break;
    case 'c':
      void act('correct');
      break;
    case 'e':
      session.discardEdit();
      redraw();
      break;
    case 'n':
    case 'ArrowRight':
      void session.next().then(showCurrent);
      break;
    case 'p':
    case 'ArrowLeft':
      void session.prev().then(showCurrent);
      break;
    case 'R':
      void reload();
      break;
    case '+':
    case '=':
      view = zoomAt(view, 1.25, canvas.width / 2, canvas.height / 2);
      redraw();
      break;
    case '-':
      view = zoomAt(view, 0.8, canvas.width / 2, canvas.height / 2);
      redraw();
      break;
    case '0': {
      const item = session.current;
      if (item) view = fitTransform(item.width, item.height, canvas.width, canvas.height);
      redraw();
      break;
    }
  }
});

filterSelect.addEventListener('change', () => void reload());

void reload();
