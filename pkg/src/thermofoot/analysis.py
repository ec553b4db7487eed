"""Contralateral difference analysis and report assembly.

The tail of the processing chain: subtract the warped contralateral foot
from the reference foot, find pixel regions at or above the 2.2 degC
screening threshold, validate each candidate against its own-foot
neighborhood (a cold spot on the other foot must not read as a lesion),
compute banded region-of-interest statistics, and fold everything into a
deterministic, reproducible report.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import EmptyOverlap, EmptyRoi, MaskTooSmall, PreconditionError
from .radiometry import RawFrame, CalibrationCurve, SensorSpec, TemperatureMap, counts_to_temperature
from .registration import (
    AffineTransform,
    AlignedPair,
    LandmarkSet,
    align_pair,
    vertical_alignment,
    warp_map,
    warp_mask,
)
from .segmentation import (
    EIGHT_CONNECTED,
    FootMask,
    Rect,
    grabcut,
    normalize_for_segmentation,
    split_feet,
)

ROI_NAMES = ("Toe", "Metatarsal", "Heel")
REPORT_SCHEMA_VERSION = 1


class Verdict(str, Enum):
    CONFIRMED = "confirmed"
    REJECTED_COLD_CONTRALATERAL = "rejected_cold_contralateral"


@dataclass(frozen=True)
class AnalysisConfig:
    """Tunables for detection, validation and ROI banding."""

    delta_threshold_c: float = 2.2
    min_hotspot_px: int = 4
    neighborhood_dilation_px: int = 7
    similarity_tol_c: float = 0.5
    roi_bands: tuple[tuple[float, float], ...] = ((0.0, 0.20), (0.20, 0.45), (0.75, 1.0))
    pixel_footprint_mm: float = SensorSpec().pixel_footprint_mm

    def __post_init__(self):
        if self.delta_threshold_c <= 0:
            raise PreconditionError("delta threshold must be positive")
        if self.min_hotspot_px < 1 or self.neighborhood_dilation_px < 1:
            raise PreconditionError("pixel counts must be >= 1")
        if len(self.roi_bands) != len(ROI_NAMES):
            raise PreconditionError(f"expected {len(ROI_NAMES)} ROI bands")
        spans = sorted(self.roi_bands)
        for lo, hi in spans:
            if not (0.0 <= lo < hi <= 1.0):
                raise PreconditionError(f"band ({lo}, {hi}) must sit inside [0, 1]")
        for (_, hi), (lo, _) in zip(spans, spans[1:]):
            if lo < hi:
                raise PreconditionError("ROI bands must be pairwise disjoint")

    def to_dict(self) -> dict:
        return {
            "delta_threshold_c": self.delta_threshold_c,
            "min_hotspot_px": self.min_hotspot_px,
            "neighborhood_dilation_px": self.neighborhood_dilation_px,
            "similarity_tol_c": self.similarity_tol_c,
            "roi_bands": [list(b) for b in self.roi_bands],
            "pixel_footprint_mm": self.pixel_footprint_mm,
        }

    @staticmethod
    def from_dict(d: dict) -> "AnalysisConfig":
        kwargs = dict(d)
        if "roi_bands" in kwargs:
            kwargs["roi_bands"] = tuple(tuple(b) for b in kwargs["roi_bands"])
        return AnalysisConfig(**kwargs)


@dataclass
class DiffMap:
    """Signed reference-minus-contralateral temperatures on the overlap."""

    values: np.ndarray
    valid: np.ndarray


@dataclass
class Hotspot:
    """Connected region where the reference foot runs hot."""

    pixel_coords: np.ndarray  # (N, 2) rows/cols on the reference grid
    shape: tuple[int, int]
    bbox: tuple[int, int, int, int]  # inclusive (row0, col0, row1, col1)
    area_px: int
    area_cm2: float
    mean_delta_c: float
    peak_delta_c: float
    region_mt_c: float | None = None
    extended_mt_c: float | None = None
    verdict: Verdict | None = None
    degenerate_context: bool = False
    roi_membership: dict = field(default_factory=dict)

    def mask(self) -> np.ndarray:
        out = np.zeros(self.shape, dtype=bool)
        out[self.pixel_coords[:, 0], self.pixel_coords[:, 1]] = True
        return out

    def to_dict(self) -> dict:
        return {
            "bbox": list(self.bbox),
            "area_px": self.area_px,
            "area_cm2": self.area_cm2,
            "mean_delta_c": self.mean_delta_c,
            "peak_delta_c": self.peak_delta_c,
            "region_mt_c": self.region_mt_c,
            "extended_mt_c": self.extended_mt_c,
            "verdict": self.verdict.value if self.verdict else None,
            "degenerate_context": self.degenerate_context,
            "roi_membership": dict(sorted(self.roi_membership.items())),
        }


@dataclass
class RoiSet:
    """Pixel sets and integer row bands of one vertically aligned foot."""

    masks: dict  # name -> bool grid
    band_rows: dict  # name -> (absolute first row, absolute end row), half-open
    row_origin: int
    length_px: int


@dataclass
class FootRegionData:
    """Everything ROI statistics need for one (aligned) foot."""

    temps: np.ndarray
    valid: np.ndarray
    mask: np.ndarray
    rois: RoiSet


@dataclass
class RoiRow:
    region: str
    foot_a_mt_c: float
    foot_b_mt_c: float

    @property
    def diff_c(self) -> float:
        return abs(self.foot_a_mt_c - self.foot_b_mt_c)


@dataclass
class RoiStats:
    foot_a: str
    foot_b: str
    rows: list

    def to_dict(self) -> dict:
        return {
            "foot_a": self.foot_a,
            "foot_b": self.foot_b,
            "rows": [
                {
                    "region": r.region,
                    "foot_a_mt_c": r.foot_a_mt_c,
                    "foot_b_mt_c": r.foot_b_mt_c,
                    "diff_c": r.diff_c,
                }
                for r in self.rows
            ],
        }

    def to_csv(self) -> str:
        lines = ["region,foot_a_mt_c,foot_b_mt_c,diff_c"]
        for r in self.rows:
            lines.append(
                f"{r.region},{r.foot_a_mt_c!r},{r.foot_b_mt_c!r},{r.diff_c!r}"
            )
        return "\n".join(lines) + "\n"


def diff_map(pair: AlignedPair) -> DiffMap:
    """Reference minus warped contralateral, defined on the overlap."""
    valid = pair.overlap_mask & pair.reference_map.valid & pair.moving_map.valid
    if not valid.any():
        raise EmptyOverlap("aligned feet share no valid pixels")
    values = np.where(
        valid, pair.reference_map.temps - pair.moving_map.temps, np.nan
    )
    return DiffMap(values=values, valid=valid)


def detect_hotspots(d: DiffMap, cfg: AnalysisConfig) -> list[Hotspot]:
    """8-connected components of pixels at or above the threshold."""
    hot = d.valid & (d.values >= cfg.delta_threshold_c)
    labels, n = ndimage.label(hot, structure=EIGHT_CONNECTED)
    spots: list[Hotspot] = []
    for lab in range(1, n + 1):
        coords = np.argwhere(labels == lab)
        if coords.shape[0] < cfg.min_hotspot_px:
            continue
        deltas = d.values[coords[:, 0], coords[:, 1]]
        r0, c0 = coords.min(axis=0)
        r1, c1 = coords.max(axis=0)
        spots.append(
            Hotspot(
                pixel_coords=coords,
                shape=d.values.shape,
                bbox=(int(r0), int(c0), int(r1), int(c1)),
                area_px=int(coords.shape[0]),
                area_cm2=float(coords.shape[0] * (cfg.pixel_footprint_mm / 10.0) ** 2),
                mean_delta_c=float(deltas.mean()),
                peak_delta_c=float(deltas.max()),
            )
        )
    spots.sort(key=lambda h: h.bbox)
    return spots


def neighborhood_validate(
    spot: Hotspot,
    reference_map: TemperatureMap,
    foot_mask: FootMask,
    cfg: AnalysisConfig,
) -> Hotspot:
    """Compare the candidate's mean temperature against its surroundings.

    A region that is genuinely warm on the reference foot stands clearly
    above the dilated neighborhood; one that only looked hot because the
    other foot is cold does not.
    """
    candidate = spot.mask()
    extended = ndimage.binary_dilation(
        candidate, structure=EIGHT_CONNECTED, iterations=cfg.neighborhood_dilation_px
    )
    extended &= foot_mask.mask
    extended &= ~candidate

    region_sel = candidate & foot_mask.mask & reference_map.valid
    region_mt = float(reference_map.temps[region_sel].mean())

    extended_sel = extended & reference_map.valid
    if not extended_sel.any():
        # no same-foot context exists; keep the candidate but flag it
        return replace(
            spot,
            region_mt_c=region_mt,
            extended_mt_c=None,
            verdict=Verdict.CONFIRMED,
            degenerate_context=True,
        )
    extended_mt = float(reference_map.temps[extended_sel].mean())
    verdict = (
        Verdict.CONFIRMED
        if region_mt - extended_mt > cfg.similarity_tol_c
        else Verdict.REJECTED_COLD_CONTRALATERAL
    )
    return replace(
        spot, region_mt_c=region_mt, extended_mt_c=extended_mt, verdict=verdict
    )


def define_rois(
    mask: FootMask, cfg: AnalysisConfig, landmarks: LandmarkSet | None = None
) -> RoiSet:
    """Toe/metatarsal/heel row bands of a vertically aligned foot mask.

    Band edges are integer rows derived from the mask's row extent; the
    midfoot gap between metatarsal and heel stays unassigned.
    """
    rows = np.nonzero(mask.mask.any(axis=1))[0]
    if rows.size == 0:
        raise MaskTooSmall("empty mask has no row extent")
    row0 = int(rows.min())
    length = int(rows.max()) - row0 + 1
    if length < 20:
        raise MaskTooSmall(f"foot length {length} px is below the 20 px minimum")
    if landmarks is not None and landmarks.toe_tip[0] >= landmarks.heel_center[0]:
        raise PreconditionError("mask is not vertically aligned (heel above toe)")

    row_index = np.arange(mask.mask.shape[0])
    masks = {}
    band_rows = {}
    for name, (lo, hi) in zip(ROI_NAMES, cfg.roi_bands):
        lo_px = row0 + int(round(lo * length))
        hi_px = row0 + int(round(hi * length))
        in_band = (row_index >= lo_px) & (row_index < hi_px)
        masks[name] = mask.mask & in_band[:, None]
        band_rows[name] = (lo_px, hi_px)
    return RoiSet(masks=masks, band_rows=band_rows, row_origin=row0, length_px=length)


def roi_stats(
    foot_a: FootRegionData, foot_b: FootRegionData, label_a: str, label_b: str
) -> RoiStats:
    """Mean temperature per ROI per foot, plus the absolute difference.

    Overall is the area-weighted mean over all valid foot pixels, never
    the mean of the per-ROI means.
    """

    def region_mean(foot: FootRegionData, name: str) -> float:
        if name == "Overall":
            sel = foot.mask & foot.valid
        else:
            sel = foot.rois.masks[name] & foot.valid
        if not sel.any():
            raise EmptyRoi(f"ROI {name} contains no valid pixels")
        return float(foot.temps[sel].mean())

    rows = [
        RoiRow(
            region=name,
            foot_a_mt_c=region_mean(foot_a, name),
            foot_b_mt_c=region_mean(foot_b, name),
        )
        for name in (*ROI_NAMES, "Overall")
    ]
    return RoiStats(foot_a=label_a, foot_b=label_b, rows=rows)


# -- full pipeline ---------------------------------------------------------------


@dataclass
class PipelineInputs:
    """Everything a plantar analysis run consumes."""

    frame: RawFrame
    calibration: CalibrationCurve
    landmarks_left: LandmarkSet
    landmarks_right: LandmarkSet
    config: AnalysisConfig = field(default_factory=AnalysisConfig)
    scribbles: list | None = None
    init_rect: Rect | None = None
    suspect_foot: str = "left"
    subject: dict = field(default_factory=dict)
    iterations: int = 5

    def __post_init__(self):
        if self.suspect_foot not in ("left", "right"):
            raise PreconditionError("suspect_foot must be 'left' or 'right'")
        if self.landmarks_left.foot != "left" or self.landmarks_right.foot != "right":
            raise PreconditionError("landmark sets must be labeled left and right")


@dataclass
class DirectionResult:
    """Hotspot analysis with one foot acting as the reference."""

    reference_foot: str
    pair: AlignedPair
    diff: DiffMap
    hotspots: list


@dataclass
class AnalysisArtifacts:
    """Intermediate products kept for rendering and inspection."""

    temperature_map: TemperatureMap
    foot_masks: dict  # "left"/"right" -> FootMask
    aligned: dict  # reference foot -> DirectionResult
    aligned_foot_data: dict  # foot -> FootRegionData (vertically aligned)
    vertical_transforms: dict  # foot -> AffineTransform


@dataclass
class AnalysisReport:
    """Self-contained, reproducible analysis result."""

    data: dict

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "AnalysisReport":
        return AnalysisReport(data=json.loads(text))

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_json())
        return path

    @staticmethod
    def load(path: str | Path) -> "AnalysisReport":
        return AnalysisReport.from_json(Path(path).read_text())


def _aligned_foot_data(
    tmap: TemperatureMap,
    mask: FootMask,
    landmarks: LandmarkSet,
    cfg: AnalysisConfig,
) -> tuple[FootRegionData, AffineTransform]:
    t_vert = vertical_alignment(landmarks.medial_metatarsal, landmarks.heel_center)
    masked = TemperatureMap(
        temps=np.where(mask.mask, tmap.temps, np.nan),
        valid=tmap.valid & mask.mask,
        view=tmap.view,
        source_frame=tmap.source_frame,
    )
    aligned_map = warp_map(masked, t_vert)
    aligned_mask = warp_mask(mask, t_vert)
    rois = define_rois(aligned_mask, cfg)
    return (
        FootRegionData(
            temps=aligned_map.temps,
            valid=aligned_map.valid,
            mask=aligned_mask.mask,
            rois=rois,
        ),
        t_vert,
    )


def _roi_membership(
    spot: Hotspot, t_vert: AffineTransform, rois: RoiSet
) -> dict:
    aligned_rows = t_vert.apply(spot.pixel_coords.astype(np.float64))[:, 0]
    rounded = np.floor(aligned_rows + 0.5).astype(np.int64)
    membership: dict[str, int] = {}
    for name, (lo_px, hi_px) in rois.band_rows.items():
        count = int(np.count_nonzero((rounded >= lo_px) & (rounded < hi_px)))
        if count:
            membership[name] = count
    return membership


def run_analysis(inputs: PipelineInputs) -> tuple[AnalysisReport, AnalysisArtifacts]:
    """Execute the full plantar pipeline and assemble the report."""
    cfg = inputs.config
    tmap = counts_to_temperature(inputs.frame, inputs.calibration)
    norm = normalize_for_segmentation(tmap)
    h, w = tmap.shape
    rect = inputs.init_rect or Rect(2, 2, h - 2, w - 2)
    whole = grabcut(
        norm.intensities,
        rect,
        scribbles=inputs.scribbles,
        iterations=inputs.iterations,
        forced_background=norm.forced_background,
    )
    left_mask, right_mask = split_feet(whole)
    masks = {"left": left_mask, "right": right_mask}
    landmarks = {"left": inputs.landmarks_left, "right": inputs.landmarks_right}

    directions = {}
    for ref_foot in (inputs.suspect_foot, _other(inputs.suspect_foot)):
        mov_foot = _other(ref_foot)
        pair = align_pair(
            tmap,
            masks[ref_foot],
            landmarks[ref_foot],
            tmap,
            masks[mov_foot],
            landmarks[mov_foot],
        )
        d = diff_map(pair)
        spots = [
            neighborhood_validate(s, tmap, masks[ref_foot], cfg)
            for s in detect_hotspots(d, cfg)
        ]
        directions[ref_foot] = DirectionResult(
            reference_foot=ref_foot, pair=pair, diff=d, hotspots=spots
        )

    foot_data = {}
    vertical_transforms = {}
    for foot in ("left", "right"):
        foot_data[foot], vertical_transforms[foot] = _aligned_foot_data(
            tmap, masks[foot], landmarks[foot], cfg
        )
    for ref_foot, direction in directions.items():
        for spot in direction.hotspots:
            spot.roi_membership = _roi_membership(
                spot, vertical_transforms[ref_foot], foot_data[ref_foot].rois
            )

    ref = inputs.suspect_foot
    stats = roi_stats(foot_data[ref], foot_data[_other(ref)], ref, _other(ref))

    confirmed_px = 0
    confirmed_in_roi = 0
    for direction in directions.values():
        for spot in direction.hotspots:
            if spot.verdict is Verdict.CONFIRMED:
                confirmed_px += spot.area_px
                confirmed_in_roi += sum(spot.roi_membership.values())
    roi_fraction = confirmed_in_roi / confirmed_px if confirmed_px else None

    report = AnalysisReport(
        data={
            "schema_version": REPORT_SCHEMA_VERSION,
            "subject": dict(inputs.subject),
            "config": cfg.to_dict(),
            "provenance": {
                "frame_id": inputs.frame.frame_id,
                "calibration": inputs.calibration.to_dict(),
                "mask_provenance": whole.provenance,
                "suspect_foot": inputs.suspect_foot,
                "init_rect": [rect.row0, rect.col0, rect.row1, rect.col1],
                "scribbles": [
                    [int(r), int(c), int(label)] for r, c, label in inputs.scribbles or []
                ],
                "landmarks": {
                    foot: [[float(r), float(c)] for r, c in lm.points]
                    for foot, lm in landmarks.items()
                },
                "transforms": {
                    "contralateral": {
                        foot: d.pair.transform.to_flat() for foot, d in directions.items()
                    },
                    "vertical": {
                        foot: t.to_flat() for foot, t in vertical_transforms.items()
                    },
                },
            },
            "roi_stats": stats.to_dict(),
            "hotspots": [
                {"reference_foot": foot, **spot.to_dict()}
                for foot in sorted(directions)
                for spot in directions[foot].hotspots
            ],
            "confirmed_roi_fraction": roi_fraction,
        }
    )
    artifacts = AnalysisArtifacts(
        temperature_map=tmap,
        foot_masks=masks,
        aligned=directions,
        aligned_foot_data=foot_data,
        vertical_transforms=vertical_transforms,
    )
    return report, artifacts


def _other(foot: str) -> str:
    return "right" if foot == "left" else "left"
