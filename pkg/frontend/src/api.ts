/**
 * Typed client for the review service API. The fetch implementation is
 * injectable so the session logic can run in the browser, in tests with a
 * stub, or in node against a live server.
 */

export interface Box {
  x: number;
  y: number;
  w: number;
  h: number;
}

export type Status = 'proposed' | 'accepted' | 'corrected' | 'rejected';
export type Decision = 'accept' | 'reject' | 'correct';

export interface ImageEntry {
  image_id: string;
  status: Status | null;
  width: number;
  height: number;
}

export interface AnnotationRecord {
  image_id: string;
  proposed_box: Box | null;
  status: Status;
  final_box: Box | null;
  reviewer: string | null;
  reviewed_at: string | null;
  source: string;
  note: string | null;
  version: number;
}

export interface Progress {
  proposed: number;
  accepted: number;
  corrected: number;
  rejected: number;
  total: number;
}

export interface DecisionBody {
  decision: Decision;
  box?: Box;
  reviewer: string;
  version: number;
}

export type PutResult =
  | { kind: 'ok'; record: AnnotationRecord }
  | { kind: 'conflict'; currentVersion: number }
  | { kind: 'invalid'; message: string };

export class ApiError extends Error {
  constructor(message: string, readonly status: number) {
    super(message);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path);
    if (!resp.ok) {
      throw new ApiError(`GET ${path} failed: ${resp.status}`, resp.status);
    }
    return (await resp.json()) as T;
  }

  listImages(): Promise<ImageEntry[]> {
    return this.getJson<ImageEntry[]>('/api/images');
  }

  getAnnotation(imageId: string): Promise<AnnotationRecord> {
    return this.getJson<AnnotationRecord>(`/api/annotations/${imageId}`);
  }

  progress(): Promise<Progress> {
    return this.getJson<Progress>('/api/progress');
  }

  imageUrl(imageId: string): string {
    return `${this.baseUrl}/api/images/${imageId}/file`;
  }

  async putDecision(imageId: string, body: DecisionBody): Promise<PutResult> {
    const resp = await this.fetchImpl(`${this.baseUrl}/api/annotations/${imageId}`, {
      method: 'PUT',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(body),
    });
    if (resp.ok) {
      return { kind: 'ok', record: (await resp.json()) as AnnotationRecord };
    }
    if (resp.status === 409) {
      const detail = (await resp.json()) as {
        detail?: { current_version?: number };
      };
      return { kind: 'conflict', currentVersion: detail.detail?.current_version ?? -1 };
    }
    if (resp.status === 422) {
      let message = 'invalid decision';
      try {
        message = JSON.stringify((await resp.json()) as unknown);
      } catch {
        /* body not json: keep the generic message */
      }
      return { kind: 'invalid', message };
    }
    throw new ApiError(`PUT failed: ${resp.status}`, resp.status);
  }
}
