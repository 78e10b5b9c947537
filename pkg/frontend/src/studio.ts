// Studio controller: optimistic mutations against the HTTP API, reconciled
// by the push stream. Nothing here touches simulator internals; a conforming
// mock server satisfies every code path.

import { ApiClient, EventChannel, SocketFactory } from './client.js';
import { emptyUi, renderModel, UiState, ViewModel } from './render.js';
import { StudioStore } from './store.js';
import type {
  FaultInfo,
  LayoutResponse,
  PushEvent,
  SchemaInfo,
} from './types.js';

const ADDRESS_FLOOR = 0x10;
const TOAST_LIMIT = 5;

export class Studio {
  readonly store: StudioStore;
  readonly ui: UiState;
  private channel: EventChannel | null = null;
  private nextTag = 1;
  private listeners: Array<() => void> = [];

  private constructor(
    private client: ApiClient,
    readonly layout: LayoutResponse,
    readonly schema: SchemaInfo,
    store: StudioStore,
  ) {
    this.store = store;
    this.ui = emptyUi();
  }

  /** Snapshot first, then subscribe from the snapshot's seq: no gap, no gap-filling guesswork. */
  static async boot(
    client: ApiClient,
    wsBase: string,
    sessionId: string,
    makeSocket: SocketFactory,
  ): Promise<Studio> {
    const schema = (await client.schema()).body;
    const layout = (await client.layout()).body;
    const snapshot = (await client.scan()).body;
    const studio = new Studio(client, layout, schema, new StudioStore(snapshot));
    studio.channel = new EventChannel(
      wsBase,
      sessionId,
      makeSocket,
      (ev) => studio.onPush(ev),
      () => studio.store.seq,
    );
    studio.channel.connect();
    return studio;
  }

  close(): void {
    this.channel?.close();
  }

  view(): ViewModel {
    return renderModel(
      this.store.state,
      this.ui,
      this.layout,
      this.schema.heatmap_thresholds_v,
    );
  }

  onChange(fn: () => void): void {
    this.listeners.push(fn);
  }

  private changed(): void {
    for (const fn of this.listeners) fn();
  }

  onPush(ev: PushEvent): void {
    if (!this.store.ingest(ev)) return;
    // confirmed server state supersedes optimistic overlays
    const modules = this.store.state.modules;
    this.ui.optimistic = this.ui.optimistic.filter(
      (opt) =>
        !Object.values(modules).some(
          (m) => m.site === opt.site && m.address === opt.address,
        ),
    );
    this.ui.hiddenModules = this.ui.hiddenModules.filter((id) => id in modules);
    this.changed();
  }

  select(key: string | null): void {
    this.ui.selection = key;
    this.changed();
  }

  toast(kind: 'error' | 'info', text: string): void {
    this.ui.toasts = [...this.ui.toasts, { kind, text }].slice(-TOAST_LIMIT);
    this.changed();
  }

  dismissToast(index: number): void {
    this.ui.toasts = this.ui.toasts.filter((_, i) => i !== index);
    this.changed();
  }

  freeAddress(): number {
    const used = new Set<number>(this.store.state.scan.addresses);
    for (const m of Object.values(this.store.state.modules)) used.add(m.address);
    for (const opt of this.ui.optimistic) used.add(opt.address);
    let addr = ADDRESS_FLOOR;
    while (used.has(addr)) addr += 1;
    return addr;
  }

  siteExists(site: string): boolean {
    return this.layout.layout.sites.some((s) => s.id === site);
  }

  async placeModule(site: string, address?: number, kind = 'imu'): Promise<boolean> {
    if (!this.siteExists(site)) {
      this.toast('error', `no attachment site '${site}'`);
      return false;
    }
    const addr = address ?? this.freeAddress();
    const tag = `pending-${this.nextTag++}`;
    this.ui.optimistic = [...this.ui.optimistic, { tag, site, address: addr, kind }];
    this.changed();

    const result = await this.client.placeModule(site, addr, kind);
    if (!result.ok) {
      this.ui.optimistic = this.ui.optimistic.filter((o) => o.tag !== tag);
      this.toast('error', result.error?.message ?? `place failed (${result.status})`);
      this.changed();
      return false;
    }
    return true;
  }

  async removeModule(id: string): Promise<boolean> {
    if (!(id in this.store.state.modules)) return false;
    this.ui.hiddenModules = [...this.ui.hiddenModules, id];
    if (this.ui.selection === id) this.ui.selection = null;
    this.changed();

    const result = await this.client.removeModule(id);
    if (!result.ok) {
      this.ui.hiddenModules = this.ui.hiddenModules.filter((h) => h !== id);
      this.toast('error', result.error?.message ?? `remove failed (${result.status})`);
      this.changed();
      return false;
    }
    return true;
  }

  /**
   * Drag an existing module to another site: detach, then attach at the
   * target with the same address. A rejected attach re-attaches at the
   * origin so the marker snaps back instead of vanishing.
   */
  async dragModule(id: string, toSite: string): Promise<boolean> {
    const current = this.store.state.modules[id];
    if (current === undefined) return false;
    if (!this.siteExists(toSite)) {
      this.toast('error', `no attachment site '${toSite}'`);
      return false;
    }
    const kind = current.kind ?? 'imu';
    const tag = `pending-${this.nextTag++}`;
    this.ui.hiddenModules = [...this.ui.hiddenModules, id];
    this.ui.optimistic = [
      ...this.ui.optimistic,
      { tag, site: toSite, address: current.address, kind, origin: current.site },
    ];
    this.changed();

    const dropOptimistic = () => {
      this.ui.optimistic = this.ui.optimistic.filter((o) => o.tag !== tag);
      this.ui.hiddenModules = this.ui.hiddenModules.filter((h) => h !== id);
    };

    const removed = await this.client.removeModule(id);
    if (!removed.ok) {
      dropOptimistic();
      this.toast('error', removed.error?.message ?? 'drag failed');
      this.changed();
      return false;
    }
    const placed = await this.client.placeModule(toSite, current.address, kind);
    if (placed.ok) return true;

    // snap back: restore at the origin site, surface the conflict
    this.ui.optimistic = this.ui.optimistic.map((o) =>
      o.tag === tag ? { ...o, site: current.site } : o,
    );
    this.toast('error', placed.error?.message ?? `drop rejected (${placed.status})`);
    this.changed();
    const restored = await this.client.placeModule(current.site, current.address, kind);
    if (!restored.ok) {
      this.ui.optimistic = this.ui.optimistic.filter((o) => o.tag !== tag);
      this.toast('error', 'module lost while snapping back; refresh the scan');
      this.changed();
      return false;
    }
    return false;
  }

  async runMotion(motion: string, trials?: number): Promise<boolean> {
    this.ui.busy = true;
    this.changed();
    const result = await this.client.runMotion(motion, trials);
    this.ui.busy = false;
    if (!result.ok) {
      this.toast('error', result.error?.message ?? 'motion failed');
      this.changed();
      return false;
    }
    this.ui.motion = result.body;
    this.changed();
    return true;
  }

  async runPlacementEval(seeds?: number): Promise<boolean> {
    this.ui.busy = true;
    this.changed();
    const result = await this.client.placementEval(seeds);
    this.ui.busy = false;
    if (!result.ok) {
      this.toast('error', result.error?.message ?? 'placement eval failed');
      this.changed();
      return false;
    }
    this.ui.placement = result.body;
    this.changed();
    return true;
  }

  async injectFault(fault: Omit<FaultInfo, 'id'>): Promise<boolean> {
    const result = await this.client.injectFault(fault);
    if (!result.ok) {
      this.toast('error', result.error?.message ?? 'fault rejected');
      this.changed();
      return false;
    }
    return true;
  }

  async clearFault(id: string): Promise<boolean> {
    const result = await this.client.clearFault(id);
    if (!result.ok) {
      this.toast('error', result.error?.message ?? 'clear failed');
      this.changed();
      return false;
    }
    return true;
  }
}
