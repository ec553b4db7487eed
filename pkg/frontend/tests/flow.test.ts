// @vitest-environment jsdom
//
// Scripted clinician flow: scribble -> landmarks -> analyze -> review, on a
// phantom session. Runs against the real HTTP service when
// THERMOFOOT_SERVICE_URL is set, otherwise against the in-process mock
// whose analyze response is a frozen real-pipeline report. Either way the
// assertions read the DOM the clinician would see.

import { beforeEach, describe, expect, it } from 'vitest';

import { ServiceClient } from '../src/api';
import { ClinicianApp } from '../src/app';
import { createMockService, fixture } from './mock_service';
import type { Report } from '../src/types';

const SERVICE_URL = process.env.THERMOFOOT_SERVICE_URL;

function makeApp(): { app: ClinicianApp; root: HTMLElement } {
  const root = document.createElement('div');
  document.body.appendChild(root);
  const client = SERVICE_URL
    ? new ServiceClient(SERVICE_URL)
    : new ServiceClient('http://mock', createMockService().fetchFn);
  return { app: new ClinicianApp(client, root), root };
}

function button(root: HTMLElement, role: string): HTMLButtonElement {
  return root.querySelector(`[data-role="${role}"]`) as HTMLButtonElement;
}

async function runScriptedFlow(app: ClinicianApp, root: HTMLElement): Promise<Report> {
  await app.newSession(fixture.calibration as Record<string, unknown>);
  await app.uploadFrame(fixture.frame as never);

  // scribble phase: pin a few background pixels and push them
  app.setTool('BackgroundScribble');
  for (const [row, col] of fixture.scribbles as [number, number, string][]) {
    app.handleImageClick(col, row); // zoom 1: x = col, y = row
  }
  expect(root.querySelectorAll('[data-role="scribble-dot"]').length).toBe(
    fixture.scribbles.length,
  );
  await app.sendScribbles();
  expect(app.state.scribbles.length).toBe(0); // server confirmed, local cleared

  // landmark phase: submit stays disabled until 4 points per foot
  app.setTool('LandmarkPicker');
  const submit = button(root, 'submit-landmarks');
  expect(submit.disabled).toBe(true);
  const picks: Record<'left' | 'right', number[][]> = {
    left: (fixture.landmarks.left as number[][]).map(([r, c]) => [
      Math.floor(r),
      Math.floor(c),
    ]),
    right: (fixture.landmarks.right as number[][]).map(([r, c]) => [
      Math.floor(r),
      Math.floor(c),
    ]),
  };
  for (const foot of ['left', 'right'] as const) {
    app.setFoot(foot);
    for (const [i, [row, col]] of picks[foot].entries()) {
      expect(button(root, 'submit-landmarks').disabled).toBe(true);
      app.handleImageClick(col, row);
      expect(app.state.landmarks[foot][i]).toEqual({ row, col });
    }
  }
  expect(button(root, 'submit-landmarks').disabled).toBe(false);
  expect(root.querySelectorAll('[data-role="landmark-marker"]').length).toBe(8);
  await app.submitLandmarks();

  // analyze phase
  expect(button(root, 'analyze').disabled).toBe(false);
  await app.analyze();
  expect(app.report).not.toBeNull();
  return app.report as Report;
}

describe('scripted clinician flow', () => {
  beforeEach(() => {
    document.body.innerHTML = '';
  });

  it('walks scribble -> landmarks -> analyze -> review on a phantom session', async () => {
    const { app, root } = makeApp();
    const report = await runScriptedFlow(app, root);

    // displayed hotspot rectangles match the report bounding boxes exactly
    const rects = Array.from(
      root.querySelectorAll<HTMLElement>('[data-role="hotspot-rect"]'),
    );
    expect(rects.length).toBe(report.hotspots.length);
    expect(rects.length).toBeGreaterThan(0);
    rects.forEach((el, i) => {
      const [r0, c0, r1, c1] = report.hotspots[i].bbox;
      expect(el.style.left).toBe(`${c0}px`);
      expect(el.style.top).toBe(`${r0}px`);
      expect(el.style.width).toBe(`${c1 - c0 + 1}px`);
      expect(el.style.height).toBe(`${r1 - r0 + 1}px`);
      expect(el.dataset.verdict).toBe(report.hotspots[i].verdict);
    });

    // verdict badges per hotspot
    const badges = Array.from(
      root.querySelectorAll<HTMLElement>('[data-role="verdict-badge"]'),
    );
    expect(badges.map((b) => b.dataset.verdict)).toEqual(
      report.hotspots.map((h) => h.verdict),
    );

    // every displayed ROI number is the verbatim server value
    const rows = Array.from(root.querySelectorAll<HTMLElement>('[data-role="roi-row"]'));
    expect(rows.length).toBe(report.roi_stats.rows.length);
    rows.forEach((tr, i) => {
      const row = report.roi_stats.rows[i];
      expect(tr.querySelector('[data-role="mt-a"]')?.textContent).toBe(String(row.foot_a_mt_c));
      expect(tr.querySelector('[data-role="mt-b"]')?.textContent).toBe(String(row.foot_b_mt_c));
      expect(tr.querySelector('[data-role="diff"]')?.textContent).toBe(String(row.diff_c));
    });

    // review: accept the first hotspot with a note, audit log grows by one
    const before = (await app.client.getSession(app.sessionId!)).audit.length;
    const note = root.querySelector<HTMLInputElement>('[data-role="note-0"]')!;
    note.value = 'matches clinical picture';
    button(root, 'accept-0').click();
    await new Promise((resolve) => setTimeout(resolve, 50));
    const meta = await app.client.getSession(app.sessionId!);
    expect(meta.audit.length).toBe(before + 1);
    const last = meta.audit[meta.audit.length - 1];
    expect(last.action).toBe('hotspot_reviewed');
    expect(last.detail.note).toBe('matches clinical picture');
  });

  it('keeps rectangles pixel-exact under integer zoom', async () => {
    const { app, root } = makeApp();
    const report = await runScriptedFlow(app, root);
    app.setZoom(3);
    const rects = Array.from(
      root.querySelectorAll<HTMLElement>('[data-role="hotspot-rect"]'),
    );
    rects.forEach((el, i) => {
      const [r0, c0, r1, c1] = report.hotspots[i].bbox;
      expect(el.style.left).toBe(`${c0 * 3}px`);
      expect(el.style.top).toBe(`${r0 * 3}px`);
      expect(el.style.width).toBe(`${(c1 - c0 + 1) * 3}px`);
      expect(el.style.height).toBe(`${(r1 - r0 + 1) * 3}px`);
    });
  });

  it('a too-early analyze is refused by the server and surfaced', async () => {
    const { app, root } = makeApp();
    await app.newSession(fixture.calibration as Record<string, unknown>);
    await app.uploadFrame(fixture.frame as never);
    await app.analyze(); // no landmarks posted yet -> 409 from the service
    expect(app.report).toBeNull();
    expect(root.querySelector('[data-role="status"]')!.textContent).toContain('409');
  });

  it('click events on the annotation layer land on exact pixels', async () => {
    const { app, root } = makeApp();
    await app.newSession(fixture.calibration as Record<string, unknown>);
    await app.uploadFrame(fixture.frame as never);
    app.setTool('LandmarkPicker');
    const layer = root.querySelector<HTMLElement>('[data-role="annotation-layer"]')!;
    layer.dispatchEvent(
      new MouseEvent('click', { clientX: 57, clientY: 23, bubbles: true }),
    );
    expect(app.state.landmarks.left[0]).toEqual({ row: 23, col: 57 });
  });
});
