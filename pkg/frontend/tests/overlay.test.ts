import { describe, expect, it } from 'vitest';

import { hotspotRects, verdictBadge } from '../src/overlay';
import { fixture } from './mock_service';
import type { Report } from '../src/types';

const report = fixture.report as unknown as Report;

describe('hotspot overlay geometry', () => {
  it('rectangles come exactly from the report bounding boxes', () => {
    for (const zoom of [1, 2, 3]) {
      const rects = hotspotRects(report, zoom);
      expect(rects.length).toBe(report.hotspots.length);
      rects.forEach((rect, i) => {
        const [r0, c0, r1, c1] = report.hotspots[i].bbox;
        expect(rect.x).toBe(c0 * zoom);
        expect(rect.y).toBe(r0 * zoom);
        expect(rect.width).toBe((c1 - c0 + 1) * zoom);
        expect(rect.height).toBe((r1 - r0 + 1) * zoom);
      });
    }
  });

  it('confirmed hotspots are solid, rejected ones dashed', () => {
    const rects = hotspotRects(report, 1);
    for (const rect of rects) {
      expect(rect.dashed).toBe(rect.verdict !== 'confirmed');
    }
    const verdicts = new Set(rects.map((r) => r.verdict));
    expect(verdicts.has('confirmed')).toBe(true);
    expect(verdicts.has('rejected_cold_contralateral')).toBe(true);
  });

  it('badges name the verdict', () => {
    expect(
      verdictBadge({ ...report.hotspots[0], verdict: 'confirmed', degenerate_context: false }),
    ).toBe('CONFIRMED');
    expect(
      verdictBadge({ ...report.hotspots[0], verdict: 'confirmed', degenerate_context: true }),
    ).toBe('CONFIRMED (no surround)');
    expect(
      verdictBadge({
        ...report.hotspots[0],
        verdict: 'rejected_cold_contralateral',
        degenerate_context: false,
      }),
    ).toBe('REJECTED: cold contralateral');
  });
});
