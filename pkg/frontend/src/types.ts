export type PmParameter = "pm25" | "pm10";

export interface DashboardConfig {
  server_url: string;
  sim_control_url: string | null;
  poll_seconds: number;
  parameter: PmParameter;
  /** Channel ids to show; empty means: discover via GET /channels. */
  channels: number[];
  /** Upper bounds of the first five bands per parameter; above the last is band 5. */
  bands: Record<PmParameter, number[]>;
  band_colors: string[];
  band_labels: string[];
  grid: { rows: number; cols: number };
}

export interface ChannelInfo {
  channel_id: number;
  node_id: string;
  display_name: string;
  lat: number;
  lon: number;
  kind: string;
  entries: number;
}

/** GET /channels/{id}/feeds/last.json; empty object when no data yet. */
export interface LatestEntry {
  created_at?: string;
  entry_id?: number;
  field1?: number | null;
  field2?: number | null;
  field3?: number | null;
  field4?: number | null;
}

export interface MarkerState {
  node_id: string;
  display_name: string;
  channel_id: number;
  lat: number;
  lon: number;
  /** Displayed parameter's latest value; null before any data arrives. */
  value: number | null;
  pm25: number | null;
  pm10: number | null;
  created_at: string | null;
  /** 0..5 per the band table; null renders gray. */
  band: number | null;
  color: string;
  label: string;
  /** Consecutive failed polls for this channel. */
  missed_polls: number;
  /** Rendered distinctly after more than two missed polls. */
  stale: boolean;
}

export interface GridCellProperties {
  parameter: string;
  value: number;
  timestamp: number;
  row: number;
  col: number;
}

export interface GridPayload {
  meta: {
    bbox: [number, number, number, number];
    rows: number;
    cols: number;
    power: number;
    parameter: string;
    timestamp: number;
    stations: { node_id: string; lat: number; lon: number; value: number }[];
    excluded: string[];
  };
  cells: {
    type: "FeatureCollection";
    features: {
      geometry: { type: "Point"; coordinates: [number, number] };
      properties: GridCellProperties;
    }[];
  };
}

export interface SimStatus {
  sim_time: number;
  sim_time_iso: string;
  online: Record<string, boolean>;
  nodes: Record<string, { sent: number; failed: number }>;
  events: { event_id: number; lat: number; lon: number; active: boolean }[];
}
