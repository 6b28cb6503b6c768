import type { ApiClient } from "./api";
import { applyPollCycle, emptyMarker, type PollResult } from "./state";
import { buildOverlay, type OverlayModel } from "./overlay";
import type { ChannelInfo, DashboardConfig, MarkerState } from "./types";

export interface PollUpdate {
  markers: MarkerState[];
  overlay: OverlayModel | null;
  /** Non-null when the cycle had trouble; shown as a banner and retried on
   * the next cycle. */
  banner: string | null;
  cycle: number;
}

export type UpdateListener = (update: PollUpdate) => void;

/** Fetches exactly one latest-value per channel per cycle (plus one raster),
 * folds the results into marker state, and notifies the renderer. Failures
 * never queue extra requests: the next attempt is the next cycle. */
export class Poller {
  private markers: MarkerState[];
  private timer: ReturnType<typeof setInterval> | null = null;
  private cycleCount = 0;
  private running = false;

  constructor(
    private api: ApiClient,
    private config: DashboardConfig,
    private channels: ChannelInfo[],
    private listener: UpdateListener,
  ) {
    this.markers = channels.map((info) => emptyMarker(info, config));
  }

  get currentMarkers(): MarkerState[] {
    return this.markers;
  }

  async cycle(): Promise<PollUpdate> {
    this.cycleCount += 1;
    const results = new Map<number, PollResult>();
    let failures = 0;
    await Promise.all(
      this.channels.map(async (info) => {
        try {
          results.set(info.channel_id, await this.api.latest(info.channel_id));
        } catch {
          results.set(info.channel_id, "failed");
          failures += 1;
        }
      }),
    );
    this.markers = applyPollCycle(this.markers, results, this.config);

    let overlay: OverlayModel | null = null;
    let overlayError = false;
    try {
      const payload = await this.api.grid(
        this.config.parameter,
        this.config.grid.rows,
        this.config.grid.cols,
      );
      overlay = buildOverlay(payload);
    } catch {
      overlayError = true; // no data yet, or server unreachable
    }

    let banner: string | null = null;
    if (failures === this.channels.length && this.channels.length > 0) {
      banner = "server unreachable: showing last known values";
    } else if (failures > 0) {
      banner = `${failures} channel(s) failed to refresh`;
    } else if (overlayError) {
      banner = "no interpolated field available yet";
    }
    const update: PollUpdate = { markers: this.markers, overlay, banner, cycle: this.cycleCount };
    this.listener(update);
    return update;
  }

  start(): void {
    if (this.running) return;
    this.running = true;
    void this.cycle();
    this.timer = setInterval(() => void this.cycle(), this.config.poll_seconds * 1000);
  }

  stop(): void {
    this.running = false;
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
