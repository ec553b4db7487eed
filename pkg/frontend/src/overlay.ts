// Hotspot rectangle geometry. Derived purely from the report's bounding
// boxes and the integer zoom factor, so what the clinician sees is the
// server's geometry, nothing recomputed.

import { assertIntegerZoom } from './coords';
import type { HotspotReport, Report } from './types';

export interface HotspotRect {
  index: number;
  x: number;
  y: number;
  width: number;
  height: number;
  verdict: HotspotReport['verdict'];
  referenceFoot: string;
  dashed: boolean;
}

export function hotspotRect(spot: HotspotReport, index: number, zoom: number): HotspotRect {
  assertIntegerZoom(zoom);
  const [r0, c0, r1, c1] = spot.bbox;
  return {
    index,
    x: c0 * zoom,
    y: r0 * zoom,
    width: (c1 - c0 + 1) * zoom,
    height: (r1 - r0 + 1) * zoom,
    verdict: spot.verdict,
    referenceFoot: spot.reference_foot,
    dashed: spot.verdict !== 'confirmed',
  };
}

export function hotspotRects(report: Report, zoom: number): HotspotRect[] {
  return report.hotspots.map((spot, i) => hotspotRect(spot, i, zoom));
}

export function verdictBadge(spot: HotspotReport): string {
  if (spot.verdict === 'confirmed') {
    return spot.degenerate_context ? 'CONFIRMED (no surround)' : 'CONFIRMED';
  }
  if (spot.verdict === 'rejected_cold_contralateral') return 'REJECTED: cold contralateral';
  return 'UNVALIDATED';
}
