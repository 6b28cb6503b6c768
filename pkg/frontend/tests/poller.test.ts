import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { buildOverlay, hottestCell, rampColor } from "../src/overlay";
import { Poller } from "../src/poller";
import { DEFAULT_CONFIG } from "../src/config";
import type { ChannelInfo, GridPayload } from "../src/types";

function channel(id: number): ChannelInfo {
  return {
    channel_id: id, node_id: `n${id}`, display_name: `N${id}`,
    lat: 17.44 + id * 0.001, lon: 78.35, kind: "developed", entries: 1,
  };
}

function gridPayload(): GridPayload {
  return {
    meta: {
      bbox: [17.44, 78.34, 17.46, 78.36], rows: 2, cols: 2, power: 2,
      parameter: "pm25", timestamp: 600,
      stations: [{ node_id: "n1", lat: 17.45, lon: 78.35, value: 30 }],
      excluded: [],
    },
    cells: {
      type: "FeatureCollection",
      features: [0, 1, 2, 3].map((i) => ({
        geometry: { type: "Point", coordinates: [78.345 + (i % 2) * 0.01, 17.455 - Math.floor(i / 2) * 0.01] },
        properties: { parameter: "pm25", value: [10, 40, 20, 30][i], timestamp: 600, row: Math.floor(i / 2), col: i % 2 },
      })),
    },
  };
}

/** A scriptable fetch that counts requests per URL. */
function mockServer(options: { failChannels?: Set<number>; failAll?: boolean } = {}) {
  const counts = new Map<string, number>();
  const fetchImpl = async (input: RequestInfo | URL): Promise<Response> => {
    const url = String(input);
    counts.set(url, (counts.get(url) ?? 0) + 1);
    if (options.failAll) {
      throw new Error("connection refused");
    }
    const lastMatch = url.match(/\/channels\/(\d+)\/feeds\/last\.json$/);
    if (lastMatch) {
      const id = Number(lastMatch[1]);
      if (options.failChannels?.has(id)) {
        throw new Error("connection reset");
      }
      return new Response(
        JSON.stringify({ created_at: "t", entry_id: 1, field1: 20 + id, field2: 40 }),
        { status: 200 },
      );
    }
    if (url.includes("/analysis/idw.json")) {
      return new Response(JSON.stringify(gridPayload()), { status: 200 });
    }
    return new Response(JSON.stringify({ error: "nope" }), { status: 404 });
  };
  return { counts, fetchImpl };
}

function lastJsonCounts(counts: Map<string, number>): number[] {
  return [...counts.entries()]
    .filter(([url]) => url.includes("last.json"))
    .map(([, n]) => n);
}

describe("poll cadence", () => {
  it("issues exactly one latest-fetch per channel per cycle", async () => {
    const { counts, fetchImpl } = mockServer();
    const api = new ApiClient("http://server", null, fetchImpl);
    const channels = [channel(1), channel(2), channel(3)];
    const updates: number[] = [];
    const poller = new Poller(api, DEFAULT_CONFIG, channels, (u) => updates.push(u.cycle));

    await poller.cycle();
    expect(lastJsonCounts(counts)).toEqual([1, 1, 1]);
    expect(lastJsonCounts(counts).length).toBe(3);

    await poller.cycle();
    expect(lastJsonCounts(counts)).toEqual([2, 2, 2]);
    expect(updates).toEqual([1, 2]);
  });

  it("failures do not trigger extra requests within a cycle", async () => {
    const { counts, fetchImpl } = mockServer({ failChannels: new Set([2]) });
    const api = new ApiClient("http://server", null, fetchImpl);
    const channels = [channel(1), channel(2)];
    let banner: string | null = null;
    const poller = new Poller(api, DEFAULT_CONFIG, channels, (u) => (banner = u.banner));

    const update = await poller.cycle();
    expect(lastJsonCounts(counts)).toEqual([1, 1]); // no retry for the failed one
    expect(update.markers.find((m) => m.channel_id === 2)?.missed_polls).toBe(1);
    expect(update.markers.find((m) => m.channel_id === 1)?.value).toBe(21);
    expect(banner).toContain("1 channel(s) failed");
  });

  it("total outage keeps previous values and raises the banner", async () => {
    const good = mockServer();
    const api1 = new ApiClient("http://server", null, good.fetchImpl);
    const channels = [channel(1)];
    const poller = new Poller(api1, DEFAULT_CONFIG, channels, () => undefined);
    const first = await poller.cycle();
    expect(first.markers[0].value).toBe(21);

    // swap in a dead server via a second poller sharing state is overkill;
    // instead check the banner from an all-failing API
    const dead = mockServer({ failAll: true });
    const api2 = new ApiClient("http://server", null, dead.fetchImpl);
    const poller2 = new Poller(api2, DEFAULT_CONFIG, channels, () => undefined);
    const update = await poller2.cycle();
    expect(update.banner).toContain("unreachable");
    expect(update.overlay).toBeNull();
  });

  it("fetches one raster per cycle and builds the overlay", async () => {
    const { counts, fetchImpl } = mockServer();
    const api = new ApiClient("http://server", null, fetchImpl);
    const poller = new Poller(api, DEFAULT_CONFIG, [channel(1)], () => undefined);
    const update = await poller.cycle();
    const gridCalls = [...counts.keys()].filter((u) => u.includes("idw.json"));
    expect(gridCalls.length).toBe(1);
    expect(update.overlay).not.toBeNull();
    expect(update.overlay?.min).toBe(10);
    expect(update.overlay?.max).toBe(40);
    expect(update.overlay?.cells.length).toBe(4);
  });
});

describe("overlay model", () => {
  it("legend range is the grid's own min/max and the hot cell is found", () => {
    const model = buildOverlay(gridPayload());
    expect(model.min).toBe(10);
    expect(model.max).toBe(40);
    expect(hottestCell(model).value).toBe(40);
  });

  it("cells tile the bbox", () => {
    const model = buildOverlay(gridPayload());
    const cell = model.cells[0]; // row 0, col 0: north-west corner
    const [[south, west], [north, east]] = cell.bounds;
    expect(north).toBeCloseTo(17.46, 10);
    expect(west).toBeCloseTo(78.34, 10);
    expect(north - south).toBeCloseTo(0.01, 10);
    expect(east - west).toBeCloseTo(0.01, 10);
  });

  it("color ramp endpoints and midpoint", () => {
    expect(rampColor(0)).toBe("rgb(44,123,182)");
    expect(rampColor(1)).toBe("rgb(215,25,28)");
    expect(rampColor(0.5)).toBe("rgb(255,255,191)");
  });
});
