// Annotation state with a snapshot-based undo stack. Undo restores the
// exact prior state, and landmark submission only unlocks once each foot
// carries its full ordered set of four points.

import type { FootSide, ScribbleLabel, ScribbleRecord } from './types';

export type Tool =
  | 'ForegroundScribble'
  | 'BackgroundScribble'
  | 'LandmarkPicker'
  | 'RoiAdjust';

export const LANDMARKS_PER_FOOT = 4;

export const LANDMARK_NAMES = [
  'toe tip',
  'medial metatarsal head',
  'lateral metatarsal head',
  'heel center',
] as const;

export interface LandmarkPoint {
  row: number;
  col: number;
}

interface Snapshot {
  tool: Tool;
  activeFoot: FootSide;
  landmarks: Record<FootSide, LandmarkPoint[]>;
  scribbles: ScribbleRecord[];
  roiBands: number[][];
}

const DEFAULT_ROI_BANDS = [
  [0.0, 0.2],
  [0.2, 0.45],
  [0.75, 1.0],
];

function cloneSnapshot(s: Snapshot): Snapshot {
  return {
    tool: s.tool,
    activeFoot: s.activeFoot,
    landmarks: {
      left: s.landmarks.left.map((p) => ({ ...p })),
      right: s.landmarks.right.map((p) => ({ ...p })),
    },
    scribbles: s.scribbles.map((r) => [...r] as ScribbleRecord),
    roiBands: s.roiBands.map((b) => [...b]),
  };
}

export class AnnotationState {
  tool: Tool = 'LandmarkPicker';
  activeFoot: FootSide = 'left';
  landmarks: Record<FootSide, LandmarkPoint[]> = { left: [], right: [] };
  scribbles: ScribbleRecord[] = [];
  roiBands: number[][] = DEFAULT_ROI_BANDS.map((b) => [...b]);
  private undoStack: Snapshot[] = [];

  private snapshot(): Snapshot {
    return cloneSnapshot({
      tool: this.tool,
      activeFoot: this.activeFoot,
      landmarks: this.landmarks,
      scribbles: this.scribbles,
      roiBands: this.roiBands,
    });
  }

  private push(): void {
    this.undoStack.push(this.snapshot());
  }

  setTool(tool: Tool): void {
    this.tool = tool;
  }

  setActiveFoot(foot: FootSide): void {
    this.activeFoot = foot;
  }

  /** Adds the next ordered landmark for the active foot; false when full. */
  addLandmark(row: number, col: number): boolean {
    const points = this.landmarks[this.activeFoot];
    if (points.length >= LANDMARKS_PER_FOOT) return false;
    this.push();
    points.push({ row, col });
    return true;
  }

  addScribble(row: number, col: number, label: ScribbleLabel): void {
    this.push();
    this.scribbles.push([row, col, label]);
  }

  setRoiBand(index: number, lo: number, hi: number): void {
    if (index < 0 || index >= this.roiBands.length) throw new Error('bad ROI band index');
    if (!(lo >= 0 && lo < hi && hi <= 1)) throw new Error('band must satisfy 0 <= lo < hi <= 1');
    this.push();
    this.roiBands[index] = [lo, hi];
  }

  /** Restores the precise state before the last mutation. */
  undo(): boolean {
    const prior = this.undoStack.pop();
    if (!prior) return false;
    this.tool = prior.tool;
    this.activeFoot = prior.activeFoot;
    this.landmarks = prior.landmarks;
    this.scribbles = prior.scribbles;
    this.roiBands = prior.roiBands;
    return true;
  }

  get undoDepth(): number {
    return this.undoStack.length;
  }

  nextLandmarkName(): string | null {
    const n = this.landmarks[this.activeFoot].length;
    return n < LANDMARKS_PER_FOOT ? LANDMARK_NAMES[n] : null;
  }

  landmarksComplete(): boolean {
    return (
      this.landmarks.left.length === LANDMARKS_PER_FOOT &&
      this.landmarks.right.length === LANDMARKS_PER_FOOT
    );
  }

  landmarkPayload(): { left: number[][]; right: number[][] } {
    const rows = (pts: LandmarkPoint[]) => pts.map((p) => [p.row, p.col]);
    return { left: rows(this.landmarks.left), right: rows(this.landmarks.right) };
  }

  pendingScribbles(): ScribbleRecord[] {
    return this.scribbles.map((r) => [...r] as ScribbleRecord);
  }

  clearScribbles(): void {
    this.push();
    this.scribbles = [];
  }
}
