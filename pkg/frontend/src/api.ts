import type { ChannelInfo, GridPayload, LatestEntry, SimStatus } from "./types";

export type FetchLike = typeof fetch;

/** Thin client over the feed server and the simulator control API.
 * `fetchImpl` is injectable so tests can count and script requests. */
export class ApiClient {
  constructor(
    private serverUrl: string,
    private controlUrl: string | null = null,
    private fetchImpl: FetchLike = fetch.bind(globalThis),
  ) {}

  private async getJson<T>(url: string): Promise<T> {
    const resp = await this.fetchImpl(url);
    if (!resp.ok) {
      let detail = `${resp.status}`;
      try {
        const body = (await resp.json()) as { error?: string };
        if (body.error) detail = body.error;
      } catch {
        // non-JSON error body: status alone is enough
      }
      throw new Error(detail);
    }
    return (await resp.json()) as T;
  }

  channels(): Promise<{ channels: ChannelInfo[] }> {
    return this.getJson(`${this.serverUrl}/channels`);
  }

  latest(channelId: number): Promise<LatestEntry> {
    return this.getJson(`${this.serverUrl}/channels/${channelId}/feeds/last.json`);
  }

  grid(parameter: string, rows: number, cols: number): Promise<GridPayload> {
    const query = `parameter=${parameter}&at=latest&rows=${rows}&cols=${cols}`;
    return this.getJson(`${this.serverUrl}/analysis/idw.json?${query}`);
  }

  get hasControl(): boolean {
    return this.controlUrl !== null;
  }

  simStatus(): Promise<SimStatus> {
    if (!this.controlUrl) throw new Error("control endpoint not configured");
    return this.getJson(`${this.controlUrl}/sim/status`);
  }

  async injectEvent(body: {
    lat: number;
    lon: number;
    amplitude_pm25: number;
    amplitude_pm10: number;
    sigma?: number;
    ramp?: number;
    half_life?: number;
  }): Promise<{ event_id: number }> {
    if (!this.controlUrl) throw new Error("control endpoint not configured");
    const resp = await this.fetchImpl(`${this.controlUrl}/sim/events`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    const payload = (await resp.json()) as { event_id?: number; error?: string };
    if (!resp.ok || payload.event_id === undefined) {
      throw new Error(payload.error ?? `${resp.status}`);
    }
    return { event_id: payload.event_id };
  }

  async setNodeOnline(nodeId: string, online: boolean): Promise<void> {
    if (!this.controlUrl) throw new Error("control endpoint not configured");
    const resp = await this.fetchImpl(`${this.controlUrl}/sim/nodes/${nodeId}/online`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ online }),
    });
    if (!resp.ok) {
      const payload = (await resp.json().catch(() => ({}))) as { error?: string };
      throw new Error(payload.error ?? `${resp.status}`);
    }
  }
}
