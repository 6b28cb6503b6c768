import { ApiClient } from "./api";
import { loadConfig } from "./config";
import { MapView } from "./map";
import { Poller } from "./poller";
import type { ChannelInfo, DashboardConfig } from "./types";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setBanner(text: string | null): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = text ?? "";
  banner.style.display = text ? "block" : "none";
}

async function discoverChannels(api: ApiClient, config: DashboardConfig): Promise<ChannelInfo[]> {
  const { channels } = await api.channels();
  if (config.channels.length === 0) {
    return channels;
  }
  const wanted = new Set(config.channels);
  return channels.filter((c) => wanted.has(c.channel_id));
}

function renderNodeList(
  api: ApiClient,
  channels: ChannelInfo[],
  controlsEnabled: boolean,
): void {
  const list = el<HTMLUListElement>("nodes");
  list.innerHTML = "";
  for (const channel of channels) {
    const item = document.createElement("li");
    const label = document.createElement("span");
    label.textContent = `${channel.display_name} (ch ${channel.channel_id})`;
    item.appendChild(label);
    if (controlsEnabled) {
      for (const [text, online] of [
        ["off", false],
        ["on", true],
      ] as const) {
        const button = document.createElement("button");
        button.textContent = text;
        button.onclick = async () => {
          try {
            await api.setNodeOnline(channel.node_id, online);
            setBanner(null);
          } catch (err) {
            setBanner(`toggle failed: ${(err as Error).message}`);
          }
        };
        item.appendChild(button);
      }
    }
    list.appendChild(item);
  }
}

async function start(): Promise<void> {
  const config = await loadConfig();
  const api = new ApiClient(config.server_url, config.sim_control_url);
  const view = new MapView("map", config);

  let channels: ChannelInfo[] = [];
  try {
    channels = await discoverChannels(api, config);
  } catch (err) {
    setBanner(`cannot reach ${config.server_url}: ${(err as Error).message}`);
  }

  let controlsEnabled = false;
  if (api.hasControl) {
    try {
      await api.simStatus();
      controlsEnabled = true;
    } catch {
      controlsEnabled = false;
    }
  }
  const controlNote = el<HTMLParagraphElement>("control-note");
  if (!api.hasControl) {
    controlNote.textContent = "Simulation controls disabled: no control endpoint configured.";
  } else if (!controlsEnabled) {
    controlNote.textContent =
      "Simulation controls disabled: control endpoint is not responding (is a simulation running?).";
  } else {
    controlNote.textContent = "Click the map to inject a pollution burst at that point.";
  }
  renderNodeList(api, channels, controlsEnabled);

  const poller = new Poller(api, config, channels, (update) => {
    view.renderMarkers(update.markers);
    view.renderOverlay(update.overlay);
    setBanner(update.banner);
    el<HTMLSpanElement>("cycle").textContent =
      `cycle ${update.cycle}, every ${config.poll_seconds}s`;
  });

  if (channels.length > 0) {
    view.fitTo(poller.currentMarkers);
  }

  if (controlsEnabled) {
    view.onMapClick(async (lat, lon) => {
      const amplitude = Number(el<HTMLInputElement>("amplitude").value);
      const halfLife = Number(el<HTMLInputElement>("half-life").value);
      try {
        const { event_id } = await api.injectEvent({
          lat,
          lon,
          amplitude_pm25: amplitude,
          amplitude_pm10: amplitude * 5 / 3,
          sigma: 80,
          ramp: 0,
          half_life: halfLife,
        });
        view.addEventBadge(lat, lon, event_id);
        setBanner(null);
      } catch (err) {
        setBanner(`event rejected: ${(err as Error).message}`);
      }
    });
  }

  el<HTMLButtonElement>("refresh").onclick = () => void poller.cycle();
  poller.start();
}

void start();
