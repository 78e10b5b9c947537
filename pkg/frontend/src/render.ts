// Pure view-model construction: (server model, ui state, geometry) -> the
// tree the DOM layer paints. No fetches, no sockets, no globals in here.

import { heatmapClass } from './heatmap.js';
import type { StudioModel } from './store.js';
import type {
  FaultInfo,
  LayoutResponse,
  MotionResponse,
  PlacementReport,
} from './types.js';

export interface Toast {
  kind: 'error' | 'info';
  text: string;
}

export interface OptimisticMarker {
  tag: string; // client-side key until the server assigns an id
  site: string;
  address: number;
  kind: string;
  origin?: string; // set while dragging an existing module
}

export interface UiState {
  selection: string | null; // module id or site id
  optimistic: OptimisticMarker[];
  hiddenModules: string[]; // optimistic removals awaiting the server
  toasts: Toast[];
  motion: MotionResponse | null;
  placement: PlacementReport | null;
  busy: boolean;
}

export function emptyUi(): UiState {
  return {
    selection: null,
    optimistic: [],
    hiddenModules: [],
    toasts: [],
    motion: null,
    placement: null,
    busy: false,
  };
}

export interface SiteView {
  site: string;
  x_cm: number;
  y_cm: number;
  heat: number;
  margin_v: number | null;
  reachable: boolean;
  occupied: boolean;
  isHub: boolean;
  selected: boolean;
}

export interface MarkerView {
  key: string;
  site: string;
  address: number;
  kind: string;
  x_cm: number;
  y_cm: number;
  state: 'live' | 'pending';
  selected: boolean;
}

export interface GhostView {
  site: string;
  address: number;
  reason: string;
}

export interface ScanPanelRow {
  address: number;
  site: string;
  marginLabel: string;
}

export interface PlacementBar {
  index: number;
  region: string;
  mpjre_deg: number;
  highlighted: boolean;
}

export interface ViewModel {
  hub: string;
  sites: SiteView[];
  markers: MarkerView[];
  ghosts: GhostView[];
  faults: FaultInfo[];
  scanPanel: {
    addresses: number[];
    rows: ScanPanelRow[];
  };
  motionPanel: {
    motion: string;
    survived: number;
    total: number;
  } | null;
  placementPanel: {
    argmin: number;
    bars: PlacementBar[];
  } | null;
  toasts: Toast[];
  busy: boolean;
}

function siteCoords(layout: LayoutResponse): Map<string, { x: number; y: number }> {
  const groupY = new Map(layout.layout.groups.map((g) => [g.id, g.y_cm]));
  const out = new Map<string, { x: number; y: number }>();
  for (const site of layout.layout.sites) {
    out.set(site.id, { x: site.x_cm, y: groupY.get(site.group) ?? 0 });
  }
  return out;
}

export function renderModel(
  model: StudioModel,
  ui: UiState,
  layout: LayoutResponse,
  thresholds: readonly number[],
): ViewModel {
  const coords = siteCoords(layout);
  const hidden = new Set(ui.hiddenModules);

  const occupiedSites = new Set<string>();
  for (const m of Object.values(model.modules)) {
    if (!hidden.has(m.id)) occupiedSites.add(m.site);
  }
  for (const opt of ui.optimistic) occupiedSites.add(opt.site);

  const sites: SiteView[] = model.scan.sites.map((row) => {
    const pos = coords.get(row.site) ?? { x: 0, y: 0 };
    return {
      site: row.site,
      x_cm: pos.x,
      y_cm: pos.y,
      heat: heatmapClass(row.margin_v, row.decodable, thresholds),
      margin_v: row.margin_v,
      reachable: row.reachable,
      occupied: occupiedSites.has(row.site),
      isHub: row.site === layout.hub_site,
      selected: ui.selection === row.site,
    };
  });

  const markers: MarkerView[] = [];
  for (const m of Object.values(model.modules)) {
    if (hidden.has(m.id)) continue;
    const pos = coords.get(m.site) ?? { x: 0, y: 0 };
    markers.push({
      key: m.id,
      site: m.site,
      address: m.address,
      kind: m.kind ?? 'imu',
      x_cm: pos.x,
      y_cm: pos.y,
      state: 'live',
      selected: ui.selection === m.id,
    });
  }
  for (const opt of ui.optimistic) {
    const pos = coords.get(opt.site) ?? { x: 0, y: 0 };
    markers.push({
      key: opt.tag,
      site: opt.site,
      address: opt.address,
      kind: opt.kind,
      x_cm: pos.x,
      y_cm: pos.y,
      state: 'pending',
      selected: false,
    });
  }
  markers.sort((a, b) => (a.key < b.key ? -1 : a.key > b.key ? 1 : 0));

  // recently shaken-off modules stay visible, greyed, at their old site
  const ghosts: GhostView[] = model.detachLog
    .filter((d) => d.reason === 'motion')
    .slice(-5)
    .map((d) => ({ site: d.site, address: d.address, reason: d.motion ?? d.reason }));

  const marginBySite = new Map(
    model.scan.sites.map((row) => [row.site, row.margin_v]),
  );
  const siteByAddress = new Map<number, string>();
  for (const row of model.scan.sites) {
    if (row.address !== null) siteByAddress.set(row.address, row.site);
  }

  const rows: ScanPanelRow[] = model.scan.addresses.map((addr) => {
    const site = siteByAddress.get(addr) ?? '?';
    const margin = marginBySite.get(site);
    return {
      address: addr,
      site,
      marginLabel:
        margin === null || margin === undefined ? 'n/a' : `${margin.toFixed(3)} V`,
    };
  });

  return {
    hub: layout.hub_site,
    sites,
    markers,
    ghosts,
    faults: Object.values(model.faults),
    scanPanel: { addresses: [...model.scan.addresses], rows },
    motionPanel: ui.motion
      ? {
          motion: ui.motion.motion,
          survived: ui.motion.results.filter((r) => !r.detached).length,
          total: ui.motion.results.length,
        }
      : null,
    placementPanel: ui.placement
      ? {
          argmin: ui.placement.argmin_index,
          bars: ui.placement.positions.map((p) => ({
            index: p.index,
            region: p.region,
            mpjre_deg: p.mpjre_deg,
            highlighted: p.index === ui.placement!.argmin_index,
          })),
        }
      : null,
    toasts: [...ui.toasts],
    busy: ui.busy,
  };
}
