// Shapes of the service JSON bodies the UI exchanges. The UI never
// computes temperatures or verdicts itself; these are read-only echoes of
// server responses.

export type FootSide = 'left' | 'right';

export type ScribbleLabel = 'fg' | 'bg';

export type ScribbleRecord = [number, number, ScribbleLabel]; // row, col, label

export interface SessionInfo {
  id: string;
  state: string;
}

export interface FrameSidecar {
  view: { kind: string; angle_deg: number | null };
  captured_at: string;
  frame_id: string;
  width: number;
  height: number;
}

export interface FrameBody {
  sidecar: FrameSidecar;
  counts_b64: string;
}

export interface HotspotReport {
  reference_foot: FootSide;
  bbox: [number, number, number, number]; // inclusive row0, col0, row1, col1
  area_px: number;
  area_cm2: number;
  mean_delta_c: number;
  peak_delta_c: number;
  region_mt_c: number | null;
  extended_mt_c: number | null;
  verdict: 'confirmed' | 'rejected_cold_contralateral' | null;
  degenerate_context: boolean;
  roi_membership: Record<string, number>;
}

export interface RoiStatsRow {
  region: string;
  foot_a_mt_c: number;
  foot_b_mt_c: number;
  diff_c: number;
}

export interface Report {
  schema_version: number;
  subject: Record<string, unknown>;
  config: Record<string, unknown>;
  provenance: Record<string, unknown>;
  roi_stats: { foot_a: string; foot_b: string; rows: RoiStatsRow[] };
  hotspots: HotspotReport[];
  confirmed_roi_fraction: number | null;
}

export interface SessionMeta {
  id: string;
  state: string;
  landmarks: Record<FootSide, number[][]> | null;
  scribbles: ScribbleRecord[];
  audit: { seq: number; action: string; detail: Record<string, unknown> }[];
}
