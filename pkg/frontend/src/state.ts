import { bandColor, bandIndex, bandLabel } from "./bands";
import type { ChannelInfo, DashboardConfig, LatestEntry, MarkerState } from "./types";

export type PollResult = LatestEntry | "failed";

const FIELD_BY_PARAMETER = { pm25: "field1", pm10: "field2" } as const;

/** How many consecutive missed polls a marker tolerates before it is
 * rendered as stale. */
export const STALE_AFTER_MISSED = 2;

export function emptyMarker(info: ChannelInfo, config: DashboardConfig): MarkerState {
  return {
    node_id: info.node_id,
    display_name: info.display_name,
    channel_id: info.channel_id,
    lat: info.lat,
    lon: info.lon,
    value: null,
    pm25: null,
    pm10: null,
    created_at: null,
    band: null,
    color: bandColor(null, config),
    label: bandLabel(null, config),
    missed_polls: 0,
    stale: false,
  };
}

/** Fold one poll cycle's results into the marker set.
 *
 * Pure: the output depends only on the previous markers, the results, and
 * the band table, so feeding the same snapshot twice renders identically.
 * A failed fetch keeps the previous values and bumps the missed-poll count;
 * after more than STALE_AFTER_MISSED misses the marker turns stale.
 */
export function applyPollCycle(
  previous: MarkerState[],
  results: Map<number, PollResult>,
  config: DashboardConfig,
): MarkerState[] {
  return previous.map((marker) => {
    const result = results.get(marker.channel_id);
    if (result === undefined) {
      return marker;
    }
    if (result === "failed") {
      const missed = marker.missed_polls + 1;
      return { ...marker, missed_polls: missed, stale: missed > STALE_AFTER_MISSED };
    }
    const pm25 = result.field1 ?? null;
    const pm10 = result.field2 ?? null;
    const value = result[FIELD_BY_PARAMETER[config.parameter]] ?? null;
    const band = value === null ? null : bandIndex(value, config.bands[config.parameter]);
    return {
      ...marker,
      value,
      pm25,
      pm10,
      created_at: result.created_at ?? null,
      band,
      color: bandColor(band, config),
      label: bandLabel(band, config),
      missed_polls: 0,
      stale: false,
    };
  });
}
