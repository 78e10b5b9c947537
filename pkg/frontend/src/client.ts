// Transport layer. Both the fetch function and the WebSocket constructor are
// injectable so tests can run against a scripted fake, and the e2e suite can
// plug in the node "ws" client where no browser WebSocket exists.

import type {
  ApiErrorBody,
  FaultInfo,
  LayoutResponse,
  ModuleInfo,
  MotionResponse,
  PlacementReport,
  PushEvent,
  ScanResponse,
  SchemaInfo,
} from './types.js';
import { isPushEvent } from './types.js';

export type FetchLike = (url: string, init?: {
  method?: string;
  headers?: Record<string, string>;
  body?: string;
}) => Promise<{ status: number; json(): Promise<unknown> }>;

export interface ApiResult<T> {
  ok: boolean;
  status: number;
  body: T;
  error: ApiErrorBody | null;
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private sessionId: string,
    private fetchFn: FetchLike = fetch as unknown as FetchLike,
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<ApiResult<T>> {
    const headers: Record<string, string> = { 'X-Session-Id': this.sessionId };
    if (body !== undefined) headers['Content-Type'] = 'application/json';
    const resp = await this.fetchFn(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const parsed = (await resp.json()) as T;
    if (resp.status >= 400) {
      return {
        ok: false,
        status: resp.status,
        body: parsed,
        error: parsed as unknown as ApiErrorBody,
      };
    }
    return { ok: true, status: resp.status, body: parsed, error: null };
  }

  schema() {
    return this.request<SchemaInfo>('GET', '/api/schema');
  }

  layout() {
    return this.request<LayoutResponse>('GET', '/api/layout');
  }

  scan() {
    return this.request<ScanResponse>('GET', '/api/scan');
  }

  placeModule(site: string, address: number, kind = 'imu') {
    return this.request<ModuleInfo>('POST', '/api/modules', { site, address, kind });
  }

  removeModule(id: string) {
    return this.request<{ removed: string }>('DELETE', `/api/modules/${id}`);
  }

  runMotion(motion: string, trials?: number) {
    const body: Record<string, unknown> = { motion };
    if (trials !== undefined) body.trials = trials;
    return this.request<MotionResponse>('POST', '/api/motion', body);
  }

  placementEval(seeds?: number) {
    const body: Record<string, unknown> = {};
    if (seeds !== undefined) body.seeds = seeds;
    return this.request<PlacementReport>('POST', '/api/placement-eval', body);
  }

  injectFault(fault: Omit<FaultInfo, 'id'>) {
    return this.request<FaultInfo>('POST', '/api/faults', fault);
  }

  clearFault(id: string) {
    return this.request<{ removed: string }>('DELETE', `/api/faults/${id}`);
  }
}

// Minimal slice of the browser WebSocket surface; the node "ws" package
// implements the same event attributes.
export interface SocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  close(): void;
}

export type SocketFactory = (url: string) => SocketLike;

const RECONNECT_CAP_MS = 15000;

/**
 * Push subscription with cursor-based recovery: every (re)connect passes the
 * last applied seq as ?after=, so the server replays exactly the missed
 * events and the store's ordering guard drops any overlap.
 */
export class EventChannel {
  private socket: SocketLike | null = null;
  private attempts = 0;
  private closed = false;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private wsBase: string,
    private sessionId: string,
    private makeSocket: SocketFactory,
    private onEvent: (ev: PushEvent) => void,
    private cursor: () => number,
  ) {}

  connect(): void {
    if (this.closed) return;
    const url =
      `${this.wsBase}/api/events?session=${encodeURIComponent(this.sessionId)}` +
      `&after=${this.cursor()}`;
    const socket = this.makeSocket(url);
    this.socket = socket;
    socket.onopen = () => {
      this.attempts = 0;
    };
    socket.onmessage = (ev) => {
      let parsed: unknown;
      try {
        parsed = JSON.parse(String(ev.data));
      } catch {
        return; // not ours; ignore rather than tear down the channel
      }
      if (isPushEvent(parsed)) this.onEvent(parsed);
    };
    socket.onclose = () => {
      if (this.closed) return;
      const backoff = Math.min(500 * 2 ** this.attempts, RECONNECT_CAP_MS);
      this.attempts += 1;
      this.timer = setTimeout(() => this.connect(), backoff);
    };
  }

  close(): void {
    this.closed = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.socket?.close();
  }
}
