// Thin client over the session HTTP API. Every mutation waits for the
// server's confirmation; callers re-render from the returned payloads.

import type {
  FootSide,
  FrameBody,
  Report,
  ScribbleRecord,
  SessionInfo,
  SessionMeta,
} from './types';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function parseError(resp: Response): Promise<ApiError> {
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (typeof body.detail === 'string') detail = body.detail;
    else if (body.detail) detail = JSON.stringify(body.detail);
    else if (body.message) detail = String(body.message);
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(resp.status, detail);
}

export class ServiceClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? {} : { 'Content-Type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) throw await parseError(resp);
    return (await resp.json()) as T;
  }

  createSession(body: {
    calibration?: Record<string, unknown>;
    config?: Record<string, unknown>;
    subject?: Record<string, unknown>;
  }): Promise<SessionInfo> {
    return this.request('POST', '/sessions', body);
  }

  getSession(id: string): Promise<SessionMeta> {
    return this.request('GET', `/sessions/${id}`);
  }

  uploadFrame(id: string, frame: FrameBody): Promise<{ state: string; view: string }> {
    return this.request('POST', `/sessions/${id}/frames`, frame);
  }

  postScribbles(
    id: string,
    scribbles: ScribbleRecord[],
  ): Promise<{ state: string; scribble_count: number }> {
    return this.request('POST', `/sessions/${id}/scribbles`, { scribbles });
  }

  postLandmarks(
    id: string,
    left: number[][],
    right: number[][],
  ): Promise<{ state: string }> {
    return this.request('POST', `/sessions/${id}/landmarks`, { left, right });
  }

  analyze(id: string): Promise<Report> {
    return this.request('POST', `/sessions/${id}/analyze`);
  }

  getReport(id: string): Promise<Report> {
    return this.request('GET', `/sessions/${id}/report`);
  }

  postReviewNote(
    id: string,
    hotspotIndex: number,
    action: 'accept' | 'dismiss',
    note = '',
  ): Promise<{ state: string; audit_entries: number }> {
    return this.request('POST', `/sessions/${id}/notes`, {
      hotspot_index: hotspotIndex,
      action,
      note,
    });
  }

  renderUrl(id: string, view: string, overlay?: 'mask' | 'hotspots'): string {
    const suffix = overlay ? `?overlay=${overlay}` : '';
    return `${this.baseUrl}/sessions/${id}/render/${view}${suffix}`;
  }
}

export type { FootSide };
