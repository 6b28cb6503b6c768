import L from "leaflet";
import "leaflet/dist/leaflet.css";

import type { OverlayModel } from "./overlay";
import type { DashboardConfig, MarkerState } from "./types";

export interface MapClickHandler {
  (lat: number, lon: number): void;
}

/** All leaflet state in one place; everything above this layer is pure. */
export class MapView {
  private map: L.Map;
  private markerLayer = L.layerGroup();
  private overlayLayer = L.layerGroup();
  private eventLayer = L.layerGroup();
  private markersById = new Map<string, L.CircleMarker>();
  private legend: HTMLElement;

  constructor(container: string, private config: DashboardConfig) {
    this.map = L.map(container, { zoomControl: true });
    this.map.setView([17.4455, 78.349], 16);
    L.tileLayer("https://tile.openstreetmap.org/{z}/{x}/{y}.png", {
      maxZoom: 19,
      attribution: "&copy; OpenStreetMap contributors",
    }).addTo(this.map);
    this.overlayLayer.addTo(this.map);
    this.markerLayer.addTo(this.map);
    this.eventLayer.addTo(this.map);

    const legendControl = new L.Control({ position: "bottomright" });
    const legendDiv = L.DomUtil.create("div", "legend");
    legendControl.onAdd = () => legendDiv;
    legendControl.addTo(this.map);
    this.legend = legendDiv;
    this.legend.innerHTML = "<em>waiting for data</em>";
  }

  onMapClick(handler: MapClickHandler): void {
    this.map.on("click", (event: L.LeafletMouseEvent) => {
      handler(event.latlng.lat, event.latlng.lng);
    });
  }

  fitTo(markers: MarkerState[]): void {
    if (markers.length === 0) return;
    const bounds = L.latLngBounds(markers.map((m) => [m.lat, m.lon] as [number, number]));
    this.map.fitBounds(bounds.pad(0.25));
  }

  renderMarkers(markers: MarkerState[]): void {
    for (const marker of markers) {
      let circle = this.markersById.get(marker.node_id);
      if (!circle) {
        circle = L.circleMarker([marker.lat, marker.lon], { radius: 11, weight: 2 });
        circle.addTo(this.markerLayer);
        this.markersById.set(marker.node_id, circle);
      }
      circle.setStyle({
        fillColor: marker.color,
        fillOpacity: marker.stale ? 0.25 : 0.9,
        color: marker.stale ? "#777777" : "#222222",
        dashArray: marker.stale ? "4 4" : undefined,
      });
      const parameter = this.config.parameter;
      const value = marker.value === null ? "no data" : `${marker.value.toFixed(1)} ug/m3`;
      const age = marker.created_at ? `<br>at ${marker.created_at}` : "";
      const staleNote = marker.stale
        ? `<br><b>stale: ${marker.missed_polls} missed polls</b>`
        : "";
      circle.bindTooltip(
        `<b>${marker.display_name}</b><br>${parameter}: ${value} (${marker.label})` +
          `${age}${staleNote}`,
      );
    }
  }

  renderOverlay(model: OverlayModel | null): void {
    this.overlayLayer.clearLayers();
    if (!model) {
      this.legend.innerHTML = "<em>no interpolated field</em>";
      return;
    }
    for (const cell of model.cells) {
      L.rectangle(cell.bounds, {
        stroke: false,
        fillColor: cell.color,
        fillOpacity: 0.35,
        interactive: false,
      }).addTo(this.overlayLayer);
    }
    // the legend tracks this grid's own range: scales differ between frames
    this.legend.innerHTML =
      `<b>${model.parameter}</b> (interpolated)<br>` +
      `min ${model.min.toFixed(1)} to max ${model.max.toFixed(1)} ug/m3`;
  }

  addEventBadge(lat: number, lon: number, eventId: number): void {
    const icon = L.divIcon({ className: "event-badge", html: `&#10006; ${eventId}` });
    L.marker([lat, lon], { icon, interactive: false }).addTo(this.eventLayer);
  }
}
