// DOM wiring for the clinician workflow: correct the segmentation with
// scribbles, pick the four landmarks per foot, run the analysis, review
// hotspot verdicts. The server is the source of truth; the UI re-renders
// from its responses and displays its numbers verbatim.

import { ApiError, ServiceClient } from './api';
import { displayToImage, imageToDisplay } from './coords';
import { hotspotRects, verdictBadge } from './overlay';
import { AnnotationState, LANDMARKS_PER_FOOT, type Tool } from './state';
import type { FootSide, FrameBody, Report } from './types';

const TOOLS: Tool[] = [
  'ForegroundScribble',
  'BackgroundScribble',
  'LandmarkPicker',
  'RoiAdjust',
];

export class ClinicianApp {
  readonly state = new AnnotationState();
  sessionId: string | null = null;
  serverState = 'NoSession';
  report: Report | null = null;
  zoom = 1;
  frameWidth = 0;
  frameHeight = 0;

  private readonly root: HTMLElement;

  constructor(
    readonly client: ServiceClient,
    root: HTMLElement,
  ) {
    this.root = root;
    this.buildDom();
    this.refresh();
  }

  // -- session lifecycle -------------------------------------------------

  async newSession(calibration?: Record<string, unknown>): Promise<void> {
    const info = await this.client.createSession(calibration ? { calibration } : {});
    this.sessionId = info.id;
    this.serverState = info.state;
    this.report = null;
    this.setStatus(`session ${info.id} created`);
    this.refresh();
  }

  async uploadFrame(frame: FrameBody): Promise<void> {
    const id = this.requireSession();
    const resp = await this.client.uploadFrame(id, frame);
    this.serverState = resp.state;
    this.frameWidth = frame.sidecar.width;
    this.frameHeight = frame.sidecar.height;
    this.reloadImage();
    this.setStatus(`frame ${frame.sidecar.frame_id} uploaded (${resp.state})`);
    this.refresh();
  }

  // -- annotation --------------------------------------------------------

  setTool(tool: Tool): void {
    this.state.setTool(tool);
    this.refresh();
  }

  setFoot(foot: FootSide): void {
    this.state.setActiveFoot(foot);
    this.refresh();
  }

  setZoom(zoom: number): void {
    this.zoom = zoom;
    this.reloadImage();
    this.refresh();
  }

  /** Click on the displayed image, in CSS pixels of the zoomed layer. */
  handleImageClick(x: number, y: number): void {
    const { row, col } = displayToImage(x, y, this.zoom);
    if (this.state.tool === 'LandmarkPicker') {
      if (!this.state.addLandmark(row, col)) {
        this.setStatus(
          `the ${this.state.activeFoot} foot already has ${LANDMARKS_PER_FOOT} landmarks; undo to re-pick`,
        );
      }
    } else if (this.state.tool === 'ForegroundScribble') {
      this.state.addScribble(row, col, 'fg');
    } else if (this.state.tool === 'BackgroundScribble') {
      this.state.addScribble(row, col, 'bg');
    }
    this.refresh();
  }

  undo(): void {
    this.state.undo();
    this.refresh();
  }

  async sendScribbles(): Promise<void> {
    const id = this.requireSession();
    const pending = this.state.pendingScribbles();
    if (pending.length === 0) {
      this.setStatus('no scribbles to send');
      return;
    }
    await this.guard(async () => {
      const resp = await this.client.postScribbles(id, pending);
      this.serverState = resp.state;
      this.state.clearScribbles();
      this.report = null;
      this.reloadImage();
      this.setStatus(`mask updated from ${resp.scribble_count} scribbles (${resp.state})`);
    });
    this.refresh();
  }

  async submitLandmarks(): Promise<void> {
    const id = this.requireSession();
    if (!this.state.landmarksComplete()) return;
    await this.guard(async () => {
      const payload = this.state.landmarkPayload();
      const resp = await this.client.postLandmarks(id, payload.left, payload.right);
      this.serverState = resp.state;
      this.setStatus(`landmarks accepted (${resp.state})`);
    });
    this.refresh();
  }

  async analyze(): Promise<void> {
    const id = this.requireSession();
    await this.guard(async () => {
      this.report = await this.client.analyze(id);
      this.serverState = 'Analyzed';
      this.reloadImage();
      this.setStatus(`analysis complete: ${this.report.hotspots.length} hotspot(s)`);
    });
    this.refresh();
  }

  async reviewHotspot(index: number, action: 'accept' | 'dismiss', note = ''): Promise<void> {
    const id = this.requireSession();
    await this.guard(async () => {
      const resp = await this.client.postReviewNote(id, index, action, note);
      this.setStatus(`hotspot ${index} ${action}ed (audit entries: ${resp.audit_entries})`);
    });
  }

  // -- DOM ---------------------------------------------------------------

  private buildDom(): void {
    this.root.innerHTML = `
      <div class="toolbar">
        ${TOOLS.map(
          (t) => `<button data-role="tool-${t}" data-tool="${t}">${t}</button>`,
        ).join('')}
        <button data-role="foot-left">left foot</button>
        <button data-role="foot-right">right foot</button>
        <button data-role="undo">undo</button>
        <select data-role="zoom">
          <option value="1">1x</option><option value="2">2x</option>
          <option value="3">3x</option><option value="4">4x</option>
        </select>
      </div>
      <div class="viewport" style="position: relative; display: inline-block;">
        <img data-role="frame-image" alt="thermal view" draggable="false"
             style="image-rendering: pixelated; display: block;" />
        <div data-role="annotation-layer"
             style="position: absolute; left: 0; top: 0; right: 0; bottom: 0;"></div>
      </div>
      <div class="actions">
        <button data-role="send-scribbles">send scribbles</button>
        <button data-role="submit-landmarks" disabled>submit landmarks</button>
        <button data-role="analyze" disabled>analyze</button>
      </div>
      <div data-role="status" class="status"></div>
      <div data-role="landmark-progress"></div>
      <table data-role="roi-table"><tbody></tbody></table>
      <div data-role="hotspot-list"></div>
    `;
    this.element('annotation-layer').addEventListener('click', (ev) => {
      const target = ev.currentTarget as HTMLElement;
      const rect = target.getBoundingClientRect();
      this.handleImageClick(ev.clientX - rect.left, ev.clientY - rect.top);
    });
    for (const tool of TOOLS) {
      this.element(`tool-${tool}`).addEventListener('click', () => this.setTool(tool));
    }
    this.element('foot-left').addEventListener('click', () => this.setFoot('left'));
    this.element('foot-right').addEventListener('click', () => this.setFoot('right'));
    this.element('undo').addEventListener('click', () => this.undo());
    this.element('zoom').addEventListener('change', (ev) => {
      this.setZoom(parseInt((ev.target as HTMLSelectElement).value, 10));
    });
    this.element('send-scribbles').addEventListener('click', () => void this.sendScribbles());
    this.element('submit-landmarks').addEventListener('click', () => void this.submitLandmarks());
    this.element('analyze').addEventListener('click', () => void this.analyze());
  }

  element(role: string): HTMLElement {
    const el = this.root.querySelector<HTMLElement>(`[data-role="${role}"]`);
    if (!el) throw new Error(`missing element ${role}`);
    return el;
  }

  private reloadImage(): void {
    if (!this.sessionId) return;
    const img = this.element('frame-image') as HTMLImageElement;
    const overlay = this.report ? 'hotspots' : this.serverState === 'AwaitingFrames' ? undefined : 'mask';
    // cache-bust so scribble-driven mask updates show immediately
    const base = this.client.renderUrl(this.sessionId, 'plantar', overlay);
    img.src = `${base}${base.includes('?') ? '&' : '?'}t=${Date.now()}`;
    if (this.frameWidth) {
      img.style.width = `${this.frameWidth * this.zoom}px`;
      img.style.height = `${this.frameHeight * this.zoom}px`;
    }
  }

  refresh(): void {
    for (const tool of TOOLS) {
      const btn = this.element(`tool-${tool}`);
      btn.classList.toggle('active', this.state.tool === tool);
    }
    this.element('foot-left').classList.toggle('active', this.state.activeFoot === 'left');
    this.element('foot-right').classList.toggle('active', this.state.activeFoot === 'right');

    const progress = this.element('landmark-progress');
    const next = this.state.nextLandmarkName();
    progress.textContent = next
      ? `${this.state.activeFoot} foot: pick the ${next} ` +
        `(${this.state.landmarks[this.state.activeFoot].length}/${LANDMARKS_PER_FOOT})`
      : `${this.state.activeFoot} foot: all ${LANDMARKS_PER_FOOT} landmarks picked`;

    (this.element('submit-landmarks') as HTMLButtonElement).disabled =
      !this.state.landmarksComplete();
    (this.element('analyze') as HTMLButtonElement).disabled =
      this.serverState !== 'AwaitingLandmarks' && this.serverState !== 'Analyzed';

    this.renderAnnotations();
    this.renderReport();
  }

  private renderAnnotations(): void {
    const layer = this.element('annotation-layer');
    layer.innerHTML = '';
    for (const foot of ['left', 'right'] as FootSide[]) {
      this.state.landmarks[foot].forEach((p, i) => {
        const el = document.createElement('div');
        el.dataset.role = 'landmark-marker';
        el.dataset.foot = foot;
        el.dataset.index = String(i);
        const { x, y } = imageToDisplay(p, this.zoom);
        el.style.cssText =
          `position: absolute; left: ${x}px; top: ${y}px; width: ${this.zoom}px; ` +
          `height: ${this.zoom}px; outline: 1px solid yellow;`;
        el.textContent = String(i + 1);
        layer.appendChild(el);
      });
    }
    for (const [row, col, label] of this.state.scribbles) {
      const el = document.createElement('div');
      el.dataset.role = 'scribble-dot';
      el.dataset.label = label;
      const { x, y } = imageToDisplay({ row, col }, this.zoom);
      el.style.cssText =
        `position: absolute; left: ${x}px; top: ${y}px; width: ${this.zoom}px; ` +
        `height: ${this.zoom}px; background: ${label === 'fg' ? 'lime' : 'red'};`;
      layer.appendChild(el);
    }
    if (this.report) {
      for (const rect of hotspotRects(this.report, this.zoom)) {
        const el = document.createElement('div');
        el.dataset.role = 'hotspot-rect';
        el.dataset.index = String(rect.index);
        el.dataset.verdict = rect.verdict ?? 'none';
        el.style.cssText =
          `position: absolute; left: ${rect.x}px; top: ${rect.y}px; ` +
          `width: ${rect.width}px; height: ${rect.height}px; ` +
          `border: 2px ${rect.dashed ? 'dashed' : 'solid'} ` +
          `${rect.dashed ? 'deepskyblue' : 'lime'}; box-sizing: border-box;`;
        layer.appendChild(el);
      }
    }
  }

  private renderReport(): void {
    const tbody = this.element('roi-table').querySelector('tbody')!;
    const list = this.element('hotspot-list');
    tbody.innerHTML = '';
    list.innerHTML = '';
    if (!this.report) return;

    const stats = this.report.roi_stats;
    const header = document.createElement('tr');
    header.innerHTML =
      `<th>region</th><th>${stats.foot_a} MT</th>` +
      `<th>${stats.foot_b} MT</th><th>diff</th>`;
    tbody.appendChild(header);
    for (const row of stats.rows) {
      const tr = document.createElement('tr');
      tr.dataset.role = 'roi-row';
      tr.dataset.region = row.region;
      // numbers are echoed verbatim from the server response
      tr.innerHTML =
        `<td>${row.region}</td><td data-role="mt-a">${row.foot_a_mt_c}</td>` +
        `<td data-role="mt-b">${row.foot_b_mt_c}</td><td data-role="diff">${row.diff_c}</td>`;
      tbody.appendChild(tr);
    }

    this.report.hotspots.forEach((spot, i) => {
      const item = document.createElement('div');
      item.dataset.role = 'hotspot-item';
      item.dataset.index = String(i);
      const badge = document.createElement('span');
      badge.dataset.role = 'verdict-badge';
      badge.dataset.verdict = spot.verdict ?? 'none';
      badge.textContent = verdictBadge(spot);
      const detail = document.createElement('span');
      detail.dataset.role = 'hotspot-detail';
      detail.textContent =
        ` ${spot.reference_foot} foot, bbox [${spot.bbox.join(', ')}], ` +
        `area ${spot.area_px} px / ${spot.area_cm2} cm2, mean dT ${spot.mean_delta_c}`;
      const note = document.createElement('input');
      note.dataset.role = `note-${i}`;
      const accept = document.createElement('button');
      accept.dataset.role = `accept-${i}`;
      accept.textContent = 'accept';
      accept.addEventListener('click', () =>
        void this.reviewHotspot(i, 'accept', note.value),
      );
      const dismiss = document.createElement('button');
      dismiss.dataset.role = `dismiss-${i}`;
      dismiss.textContent = 'dismiss';
      dismiss.addEventListener('click', () =>
        void this.reviewHotspot(i, 'dismiss', note.value),
      );
      item.append(badge, detail, note, accept, dismiss);
      list.appendChild(item);
    });
  }

  private setStatus(text: string): void {
    this.element('status').textContent = text;
  }

  private requireSession(): string {
    if (!this.sessionId) throw new Error('no active session');
    return this.sessionId;
  }

  private async guard(fn: () => Promise<void>): Promise<void> {
    try {
      await fn();
    } catch (err) {
      if (err instanceof ApiError) {
        this.setStatus(`request failed (${err.status}): ${err.detail}`);
        return;
      }
      throw err;
    }
  }
}
