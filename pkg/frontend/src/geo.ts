// Local planar frame around a fixed origin: x east, y north, in meters.
// Equirectangular is accurate to well under a meter at demo scale (a few km).

import type { WireLocation } from "./types.js";

const EARTH_RADIUS_M = 6371000;
const DEG = Math.PI / 180;

export interface Planar {
  x: number;
  y: number;
}

export function toWire(origin: WireLocation, p: Planar): WireLocation {
  const lat = origin.lat + p.y / (EARTH_RADIUS_M * DEG);
  const lon = origin.lon + p.x / (EARTH_RADIUS_M * DEG * Math.cos(origin.lat * DEG));
  return { lat, lon };
}

export function toPlanar(origin: WireLocation, loc: WireLocation): Planar {
  const y = (loc.lat - origin.lat) * DEG * EARTH_RADIUS_M;
  const x = (loc.lon - origin.lon) * DEG * EARTH_RADIUS_M * Math.cos(origin.lat * DEG);
  return { x, y };
}

export function planarDistance(a: Planar, b: Planar): number {
  return Math.hypot(a.x - b.x, a.y - b.y);
}
