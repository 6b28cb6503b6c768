import type { DashboardConfig, PmParameter } from "./types";

// Indian national AQI breakpoints for PM2.5 and PM10 (ug/m3): six bands from
// good to severe. Values above the last breakpoint fall in the final band.
export const DEFAULT_BANDS: Record<PmParameter, number[]> = {
  pm25: [30, 60, 90, 120, 250],
  pm10: [50, 100, 250, 350, 430],
};

export const DEFAULT_BAND_COLORS = [
  "#2e9e4f", // good
  "#a3c853", // satisfactory
  "#fff024", // moderate
  "#f29c33", // poor
  "#e93f33", // very poor
  "#8f1d1d", // severe
];

export const DEFAULT_BAND_LABELS = [
  "good",
  "satisfactory",
  "moderate",
  "poor",
  "very poor",
  "severe",
];

export const NO_DATA_COLOR = "#9aa0a6";

/** Band index 0..5 for a concentration, per the configured breakpoints. */
export function bandIndex(value: number, breakpoints: number[]): number {
  for (let i = 0; i < breakpoints.length; i++) {
    if (value <= breakpoints[i]) {
      return i;
    }
  }
  return breakpoints.length;
}

export function bandColor(band: number | null, config: DashboardConfig): string {
  if (band === null) {
    return NO_DATA_COLOR;
  }
  return config.band_colors[Math.min(band, config.band_colors.length - 1)];
}

export function bandLabel(band: number | null, config: DashboardConfig): string {
  if (band === null) {
    return "no data";
  }
  return config.band_labels[Math.min(band, config.band_labels.length - 1)];
}
