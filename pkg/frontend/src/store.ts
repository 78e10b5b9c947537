// Server-state mirror. The model is a pure function of the initial scan
// snapshot plus the ordered push stream: applyEvent never mutates its input,
// and out-of-order arrivals sit in a buffer until the gap closes. That is
// what makes replay-equality testable and reconnects safe.

import type {
  DetachedModule,
  ModuleInfo,
  FaultInfo,
  PushEvent,
  ScanResponse,
  ScanSnapshot,
} from './types.js';

export interface MarkerModel {
  id: string;
  site: string;
  address: number;
  kind: string | null; // null when inferred from a snapshot, which lacks kind
}

export interface StudioModel {
  seq: number;
  scan: ScanSnapshot;
  modules: Record<string, MarkerModel>;
  faults: Record<string, FaultInfo>;
  detachLog: DetachedModule[];
}

const DETACH_LOG_LIMIT = 20;

export function modelFromSnapshot(snapshot: ScanResponse): StudioModel {
  const modules: Record<string, MarkerModel> = {};
  for (const row of snapshot.sites) {
    if (row.module_id !== null && row.address !== null) {
      modules[row.module_id] = {
        id: row.module_id,
        site: row.site,
        address: row.address,
        kind: null,
      };
    }
  }
  return {
    seq: snapshot.seq,
    scan: { addresses: snapshot.addresses, sites: snapshot.sites },
    modules,
    faults: {},
    detachLog: [],
  };
}

export function applyEvent(model: StudioModel, ev: PushEvent): StudioModel {
  const next: StudioModel = {
    ...model,
    seq: ev.seq,
    modules: { ...model.modules },
    faults: { ...model.faults },
    detachLog: model.detachLog,
  };
  switch (ev.type) {
    case 'module_attached':
      next.modules[ev.data.id] = {
        id: ev.data.id,
        site: ev.data.site,
        address: ev.data.address,
        kind: ev.data.kind,
      };
      break;
    case 'module_detached':
      delete next.modules[ev.data.id];
      next.detachLog = [...model.detachLog, ev.data].slice(-DETACH_LOG_LIMIT);
      break;
    case 'scan_changed':
      next.scan = ev.data;
      break;
    case 'fault_injected':
      next.faults[ev.data.id] = ev.data;
      break;
    case 'fault_cleared':
      delete next.faults[ev.data.id];
      break;
  }
  return next;
}

export class StudioStore {
  private model: StudioModel;
  private pending = new Map<number, PushEvent>();

  constructor(snapshot: ScanResponse) {
    this.model = modelFromSnapshot(snapshot);
  }

  get state(): StudioModel {
    return this.model;
  }

  /** Highest applied sequence number; the reconnect cursor. */
  get seq(): number {
    return this.model.seq;
  }

  /**
   * Feed one push event. Events at or below the applied cursor are dropped
   * (duplicates from a replayed reconnect); gaps hold later events until the
   * missing one arrives. Returns true when at least one event applied.
   */
  ingest(ev: PushEvent): boolean {
    if (ev.seq <= this.model.seq) return false; // stale or duplicate
    this.pending.set(ev.seq, ev);
    let applied = false;
    for (;;) {
      const next = this.pending.get(this.model.seq + 1);
      if (next === undefined) break;
      this.pending.delete(next.seq);
      this.model = applyEvent(this.model, next);
      applied = true;
    }
    return applied;
  }

  get bufferedCount(): number {
    return this.pending.size;
  }
}

/** Rebuild the model from scratch; must equal a live store fed the same log. */
export function replay(snapshot: ScanResponse, events: PushEvent[]): StudioModel {
  const store = new StudioStore(snapshot);
  for (const ev of events) store.ingest(ev);
  return store.state;
}
