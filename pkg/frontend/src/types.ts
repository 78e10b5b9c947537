// Wire types for the simulator API. Shapes mirror the JSON published by the
// server; /api/schema carries the negotiable bits (thresholds, push types).

export interface SchemaInfo {
  schema: number;
  push_types: string[];
  heatmap_thresholds_v: number[];
  event_retention: number;
  session_header: string;
  endpoints: string[];
}

export interface SiteRow {
  site: string;
  margin_v: number | null;
  decodable: boolean;
  reachable: boolean;
  heatmap_class: number;
  module_id: string | null;
  address: number | null;
}

export interface ScanSnapshot {
  addresses: number[];
  sites: SiteRow[];
}

export interface ScanResponse extends ScanSnapshot {
  seq: number;
}

export interface LayoutGroup {
  id: string;
  y_cm: number;
  x_start_cm: number;
  x_end_cm: number;
  ohm_per_m: number;
}

export interface LayoutStrip {
  id: string;
  x_cm: number;
  spans: string[];
  ohm_per_m: number;
  offsets_mm: Record<string, number[]>;
}

export interface LayoutSite {
  id: string;
  group: string;
  x_cm: number;
  occupant: string | null;
}

export interface GarmentLayout {
  schema: number;
  tolerance_mm: number;
  thread_ohm_per_m: number;
  groups: LayoutGroup[];
  strips: LayoutStrip[];
  sites: LayoutSite[];
}

export interface LayoutResponse {
  layout: GarmentLayout;
  hub_site: string;
  occupancy: Record<string, string | null>;
}

export interface ModuleInfo {
  id: string;
  site: string;
  address: number;
  kind: string;
}

export interface MotionRow extends ModuleInfo {
  remaining: number;
  trials: number;
  detached: boolean;
}

export interface MotionResponse {
  motion: string;
  peak_accel_mps2: number;
  results: MotionRow[];
}

export interface PlacementPosition {
  index: number;
  distance_cm: number;
  region: string;
  mpjre_deg: number;
}

export interface PlacementReport {
  positions: PlacementPosition[];
  ranking: number[];
  argmin_index: number;
}

export interface FaultInfo {
  id: string;
  kind: string;
  channels: number[];
  group_id: string;
  x_start_cm: number;
  x_end_cm: number;
}

export interface ApiErrorBody {
  code: string;
  message: string;
}

export interface DetachedModule extends ModuleInfo {
  reason: string;
  motion?: string;
  remaining?: number;
}

export type PushEvent =
  | { seq: number; type: 'module_attached'; data: ModuleInfo }
  | { seq: number; type: 'module_detached'; data: DetachedModule }
  | { seq: number; type: 'scan_changed'; data: ScanSnapshot }
  | { seq: number; type: 'fault_injected'; data: FaultInfo }
  | { seq: number; type: 'fault_cleared'; data: FaultInfo };

export function isPushEvent(raw: unknown): raw is PushEvent {
  if (raw == null || typeof raw !== 'object') return false;
  const msg = raw as { seq?: unknown; type?: unknown; data?: unknown };
  return (
    typeof msg.seq === 'number' &&
    typeof msg.type === 'string' &&
    msg.data != null &&
    typeof msg.data === 'object'
  );
}
