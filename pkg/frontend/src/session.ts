/**
 * Review session: a filtered queue of images walked with a cursor, one
 * pending box edit at a time, optimistic concurrency via the version
 * token of each record. Pure of DOM concerns so it runs headless.
 */

import type { AnnotationRecord, ApiClient, Box, Progress, Status } from './api';
import { boxesEqual, snapToImage } from './boxes';

export type SubmitOutcome =
  | { kind: 'ok'; record: AnnotationRecord }
  | { kind: 'conflict'; record: AnnotationRecord } // record reloaded, re-prompt
  | { kind: 'invalid'; message: string }
  | { kind: 'noop'; reason: string };

export interface QueueItem {
  imageId: string;
  width: number;
  height: number;
}

export class ReviewSession {
  queue: QueueItem[] = [];
  cursor = 0;
  pendingEdit: Box | null = null;
  progress: Progress | null = null;
  private record: AnnotationRecord | null = null;
  private versions = new Map<string, number>();

  constructor(
    private readonly api: ApiClient,
    readonly reviewer: string,
  ) {}

  /** Build the queue from the server, ordered by image id. */
  async load(filter: ReadonlySet<Status>): Promise<void> {
    const images = await this.api.listImages();
    this.queue = images
      .filter((e) => e.status !== null && filter.has(e.status))
      .map((e) => ({ imageId: e.image_id, width: e.width, height: e.height }))
      .sort((a, b) => (a.imageId < b.imageId ? -1 : a.imageId > b.imageId ? 1 : 0));
    this.cursor = 0;
    this.pendingEdit = null;
    this.record = null;
    this.progress = await this.api.progress();
    if (!this.done) {
      await this.fetchCurrent();
    }
  }

  get done(): boolean {
    return this.cursor >= this.queue.length;
  }

  get current(): QueueItem | null {
    return this.done ? null : this.queue[this.cursor];
  }

  get currentRecord(): AnnotationRecord | null {
    return this.record;
  }

  /** The box the reviewer is looking at: pending edit, else the server's. */
  get visibleBox(): Box | null {
    if (this.pendingEdit) return this.pendingEdit;
    if (!this.record) return null;
    return this.record.final_box ?? this.record.proposed_box;
  }

  get edited(): boolean {
    return this.pendingEdit !== null;
  }

  private async fetchCurrent(): Promise<void> {
    const item = this.current;
    if (!item) {
      this.record = null;
      return;
    }
    this.record = await this.api.getAnnotation(item.imageId);
    this.versions.set(item.imageId, this.record.version);
  }

  /** Stage an edited box; coordinates snap to integers inside the image. */
  setPendingEdit(box: Box): Box {
    const item = this.current;
    if (!item) throw new Error('no current image');
    this.pendingEdit = snapToImage(box, item.width, item.height);
    return this.pendingEdit;
  }

  discardEdit(): void {
    this.pendingEdit = null;
  }

  async next(): Promise<void> {
    if (this.cursor < this.queue.length) {
      this.cursor += 1;
    }
    this.pendingEdit = null; // navigation discards unsaved edits
    await this.fetchCurrent();
  }

  async prev(): Promise<void> {
    if (this.cursor > 0) {
      this.cursor -= 1;
    }
    this.pendingEdit = null;
    await this.fetchCurrent();
  }

  accept(): Promise<SubmitOutcome> {
    return this.submit('accept', undefined);
  }

  reject(): Promise<SubmitOutcome> {
    return this.submit('reject', undefined);
  }

  /** Submit the pending edit (or explicit box) as a correction. */
  correct(box?: Box): Promise<SubmitOutcome> {
    const chosen = box ?? this.pendingEdit;
    if (!chosen) {
      return Promise.resolve({ kind: 'noop', reason: 'no edited box to submit' });
    }
    return this.submit('correct', chosen);
  }

  private async submit(
    decision: 'accept' | 'reject' | 'correct',
    box: Box | undefined,
  ): Promise<SubmitOutcome> {
    const item = this.current;
    if (!item || !this.record) {
      return { kind: 'noop', reason: 'queue complete' };
    }
    if (decision === 'correct' && box && boxesEqual(box, this.record.proposed_box)) {
      return { kind: 'noop', reason: 'box equals the proposal; use accept' };
    }
    const version = this.versions.get(item.imageId) ?? this.record.version;
    const result = await this.api.putDecision(item.imageId, {
      decision,
      ...(box ? { box } : {}),
      reviewer: this.reviewer,
      version,
    });
    if (result.kind === 'ok') {
      this.record = result.record;
      this.versions.set(item.imageId, result.record.version);
      this.progress = await this.api.progress();
      this.pendingEdit = null;
      await this.next();
      return { kind: 'ok', record: result.record };
    }
    if (result.kind === 'conflict') {
      // someone else touched this image: reload and re-prompt, keep cursor
      await this.fetchCurrent();
      return { kind: 'conflict', record: this.record };
    }
    return { kind: 'invalid', message: result.message };
  }
}
