import { DEFAULT_BANDS, DEFAULT_BAND_COLORS, DEFAULT_BAND_LABELS } from "./bands";
import type { DashboardConfig } from "./types";

export const DEFAULT_CONFIG: DashboardConfig = {
  server_url: "http://127.0.0.1:8100",
  sim_control_url: null,
  poll_seconds: 300,
  parameter: "pm25",
  channels: [],
  bands: DEFAULT_BANDS,
  band_colors: DEFAULT_BAND_COLORS,
  band_labels: DEFAULT_BAND_LABELS,
  grid: { rows: 24, cols: 24 },
};

/** Merge a partial config document over the defaults. */
export function mergeConfig(raw: Partial<DashboardConfig>): DashboardConfig {
  return {
    ...DEFAULT_CONFIG,
    ...raw,
    bands: { ...DEFAULT_CONFIG.bands, ...(raw.bands ?? {}) },
    grid: { ...DEFAULT_CONFIG.grid, ...(raw.grid ?? {}) },
  };
}

export async function loadConfig(url = "config.json"): Promise<DashboardConfig> {
  try {
    const resp = await fetch(url, { cache: "no-store" });
    if (!resp.ok) {
      return DEFAULT_CONFIG;
    }
    return mergeConfig((await resp.json()) as Partial<DashboardConfig>);
  } catch {
    return DEFAULT_CONFIG;
  }
}
