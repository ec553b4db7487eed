"""Synthetic foot scenes with known ground truth.

Every acceptance test runs against these phantoms: two ellipse-union feet
with analytically placed landmarks, optional warm lesions and cold
patches, a known left-foot pose perturbation (rotation + shift + mirror),
and counts synthesized through the inverse of a known calibration line.

The default calibration slope is 1/128 degC per count, so temperatures on
the count grid are exact binary fractions: threshold comparisons in the
analysis stage behave deterministically instead of riding on rounding
dust.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import InvalidAngle, LesionOutsideFoot, ParseError, PipelineError, PreconditionError
from .radiometry import (
    CalibrationCurve,
    FrameView,
    RawFrame,
    SensorSpec,
    TemperatureMap,
    save_calibration,
)
from .registration import AffineTransform, LandmarkSet
from .segmentation import EIGHT_CONNECTED, FootMask, save_mask_png

CAPTURE_EPOCH = datetime(2024, 1, 1, 9, 0, 0, tzinfo=timezone.utc)
COUNTS_MAX = (1 << 14) - 1  # 14-bit sensor words


@dataclass(frozen=True)
class FeatureSpec:
    """A disc-shaped temperature feature in normalized foot coordinates."""

    foot: str  # which foot carries it
    length_frac: float  # 0 at the toes, 1 at the heel
    width_frac: float  # -1 lateral edge .. +1 medial edge
    radius_px: float
    delta_c: float

    def __post_init__(self):
        if self.foot not in ("left", "right"):
            raise PreconditionError(f"unknown foot {self.foot!r}")
        if not 0.0 <= self.length_frac <= 1.0 or not -1.0 <= self.width_frac <= 1.0:
            raise PreconditionError("feature location out of the normalized foot box")
        if self.radius_px <= 0:
            raise PreconditionError("feature radius must be positive")

    def to_dict(self) -> dict:
        return {
            "foot": self.foot,
            "length_frac": self.length_frac,
            "width_frac": self.width_frac,
            "radius_px": self.radius_px,
            "delta_c": self.delta_c,
        }


@dataclass(frozen=True)
class PhantomSpec:
    """Scene description: geometry, temperatures, features, calibration."""

    base_temp_left_c: float = 32.0
    base_temp_right_c: float = 32.0
    background_temp_c: float = 24.0
    noise_sigma_c: float = 0.0
    smooth_sigma_px: float = 0.0
    lesions: tuple = ()  # FeatureSpec, delta_c > 0
    cold_patches: tuple = ()  # FeatureSpec, delta_c < 0
    left_rotation_deg: float = 0.0
    left_shift_px: tuple = (0.0, 0.0)
    calibration_slope: float = 1.0 / 128.0
    calibration_intercept: float = 8.0
    foot_length_px: float = 84.0
    foot_halfwidth_px: float = 15.0

    def __post_init__(self):
        if self.noise_sigma_c < 0 or self.smooth_sigma_px < 0:
            raise PreconditionError("sigmas cannot be negative")
        for lesion in self.lesions:
            if lesion.delta_c <= 0:
                raise PreconditionError("lesions must be warmer than the foot")
        for patch in self.cold_patches:
            if patch.delta_c >= 0:
                raise PreconditionError("cold patches must be colder than the foot")

    @property
    def features(self) -> tuple:
        return (*self.lesions, *self.cold_patches)

    def curve(self) -> CalibrationCurve:
        return CalibrationCurve(
            slope=self.calibration_slope,
            intercept=self.calibration_intercept,
            residual_rms=0.0,
            nonlinearity_pct=0.0,
            sample_range_c=(self.background_temp_c, 45.0),
        )

    def to_dict(self) -> dict:
        return {
            "base_temp_left_c": self.base_temp_left_c,
            "base_temp_right_c": self.base_temp_right_c,
            "background_temp_c": self.background_temp_c,
            "noise_sigma_c": self.noise_sigma_c,
            "smooth_sigma_px": self.smooth_sigma_px,
            "lesions": [l.to_dict() for l in self.lesions],
            "cold_patches": [p.to_dict() for p in self.cold_patches],
            "left_rotation_deg": self.left_rotation_deg,
            "left_shift_px": list(self.left_shift_px),
            "calibration_slope": self.calibration_slope,
            "calibration_intercept": self.calibration_intercept,
            "foot_length_px": self.foot_length_px,
            "foot_halfwidth_px": self.foot_halfwidth_px,
        }

    @staticmethod
    def from_dict(d: dict) -> "PhantomSpec":
        kwargs = dict(d)
        try:
            kwargs["lesions"] = tuple(FeatureSpec(**l) for l in kwargs.get("lesions", []))
            kwargs["cold_patches"] = tuple(
                FeatureSpec(**p) for p in kwargs.get("cold_patches", [])
            )
            if "left_shift_px" in kwargs:
                kwargs["left_shift_px"] = tuple(kwargs["left_shift_px"])
            return PhantomSpec(**kwargs)
        except TypeError as exc:
            raise ParseError(f"malformed phantom spec: {exc}") from exc

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        return path

    @staticmethod
    def load(path: str | Path) -> "PhantomSpec":
        try:
            return PhantomSpec.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot read phantom spec: {exc}") from exc


@dataclass
class FeatureTruth:
    """Realized geometry of one injected feature."""

    foot: str
    kind: str  # "lesion" | "cold_patch"
    center_rc: tuple
    radius_px: float
    delta_c: float
    pixel_mask: np.ndarray
    bbox: tuple  # inclusive (row0, col0, row1, col1)
    expected_reference: str  # foot acting as reference when it shows up
    expected_verdict: str  # "confirmed" | "rejected_cold_contralateral"


@dataclass
class PhantomTruth:
    """Everything the oracle knows about a generated scene."""

    spec: PhantomSpec
    seed: int
    masks: dict  # foot -> FootMask
    landmarks: dict  # foot -> LandmarkSet
    transforms: dict  # foot -> AffineTransform, local -> image
    features: list  # FeatureTruth
    calibration: CalibrationCurve
    scene_temps: np.ndarray  # pre-noise, pre-quantization field
    frame_id: str


def _foot_membership(v: np.ndarray, u: np.ndarray, length: float, halfwidth: float):
    """Union-of-ellipses foot in local coords: v along (0=toes), u across
    (+u is the medial side of the canonical right foot)."""

    def ellipse(vc, uc, sv, su):
        return ((v - vc) / sv) ** 2 + ((u - uc) / su) ** 2 <= 1.0

    trunk = ellipse(0.55 * length, 0.0, 0.45 * length, 0.80 * halfwidth)
    metatarsal = ellipse(0.28 * length, 0.0, 0.16 * length, 1.00 * halfwidth)
    heel = ellipse(0.85 * length, 0.0, 0.15 * length, 0.90 * halfwidth)
    mask = trunk | metatarsal | heel
    for u_frac, r_frac in (
        (0.60, 0.30),  # big toe, medial side
        (0.25, 0.22),
        (-0.05, 0.20),
        (-0.35, 0.18),
        (-0.62, 0.16),
    ):
        mask |= ellipse(
            0.08 * length, u_frac * halfwidth, 0.05 * length, r_frac * halfwidth
        )
    return mask


def _local_landmarks(length: float, halfwidth: float) -> np.ndarray:
    """Canonical right-foot landmarks in local (v, u)."""
    return np.array(
        [
            [0.08 * length - 0.05 * length, 0.60 * halfwidth],  # big toe tip
            [0.28 * length, 0.85 * halfwidth],  # medial metatarsal head
            [0.28 * length, -0.85 * halfwidth],  # lateral metatarsal head
            [0.85 * length, 0.0],  # heel center
        ]
    )


def _foot_transforms(spec: PhantomSpec, sensor: SensorSpec) -> dict:
    """local (v, u) -> image (row, col) placements for both feet."""
    length = spec.foot_length_px
    row0 = (sensor.height - length) / 2.0
    # dyadic column centers: the zero-rotation mirror map then lands
    # exactly on the pixel grid, keeping threshold phantoms quantization-exact
    right_col = sensor.width * (21 / 64)
    left_col = sensor.width * (43 / 64)

    # canonical right foot: rows follow v, medial (+u) towards the midline
    t_right = AffineTransform(np.array([[1.0, 0.0, row0], [0.0, 1.0, right_col]]))

    # left foot mirrors u, then rotates about its own center and shifts
    base_left = AffineTransform(np.array([[1.0, 0.0, row0], [0.0, -1.0, left_col]]))
    theta = np.radians(spec.left_rotation_deg)
    rot = np.array(
        [[np.cos(theta), np.sin(theta)], [-np.sin(theta), np.cos(theta)]]
    )
    center = base_left.apply([length / 2.0, 0.0])[0]
    shift = np.asarray(spec.left_shift_px, dtype=np.float64)
    rot_about_center = AffineTransform(
        np.column_stack([rot, center - rot @ center + shift])
    )
    t_left = rot_about_center.compose(base_left)
    return {"right": t_right, "left": t_left}


def _rasterize_foot(transform: AffineTransform, spec: PhantomSpec, sensor: SensorSpec):
    rows, cols = np.mgrid[0 : sensor.height, 0 : sensor.width]
    pts = np.stack([rows.ravel(), cols.ravel()], axis=1).astype(np.float64)
    local = transform.inverse().apply(pts)
    v = local[:, 0].reshape(sensor.shape)
    u = local[:, 1].reshape(sensor.shape)
    return _foot_membership(v, u, spec.foot_length_px, spec.foot_halfwidth_px)


def temps_to_counts(temps: np.ndarray, curve: CalibrationCurve) -> np.ndarray:
    """Nearest-count quantization of a temperature field."""
    ideal = curve.inverse(temps)
    counts = np.round(ideal)
    if counts.min() < 0 or counts.max() > COUNTS_MAX:
        raise PreconditionError(
            f"scene temperatures exceed the {COUNTS_MAX}-count sensor range"
        )
    return counts.astype(np.uint16)


def generate(spec: PhantomSpec, seed: int) -> tuple[RawFrame, PhantomTruth]:
    """Deterministic plantar frame plus its ground-truth bundle."""
    sensor = SensorSpec()
    transforms = _foot_transforms(spec, sensor)
    masks = {
        foot: _rasterize_foot(t, spec, sensor) for foot, t in transforms.items()
    }
    if (masks["left"] & masks["right"]).any():
        raise PipelineError("generated feet overlap; adjust the placement")
    for foot, mask in masks.items():
        _, n = ndimage.label(mask, structure=EIGHT_CONNECTED)
        if n != 1:
            raise PipelineError(f"{foot} foot rasterized into {n} components")

    # mirroring the canonical right foot yields a left foot whose medial
    # landmark is still at index 1, so one landmark table serves both
    local_lm = _local_landmarks(spec.foot_length_px, spec.foot_halfwidth_px)
    landmarks = {}
    for foot, t in transforms.items():
        lm = LandmarkSet(points=t.apply(local_lm), foot=foot)
        lm.validate_bounds(sensor.height, sensor.width)
        landmarks[foot] = lm

    base = {"left": spec.base_temp_left_c, "right": spec.base_temp_right_c}
    scene = np.full(sensor.shape, spec.background_temp_c, dtype=np.float64)
    for foot, mask in masks.items():
        scene[mask] = base[foot]

    rows, cols = np.mgrid[0 : sensor.height, 0 : sensor.width]
    features: list[FeatureTruth] = []
    for feat, kind in (
        *[(l, "lesion") for l in spec.lesions],
        *[(p, "cold_patch") for p in spec.cold_patches],
    ):
        local_center = np.array(
            [
                feat.length_frac * spec.foot_length_px,
                feat.width_frac * spec.foot_halfwidth_px,
            ]
        )
        center = transforms[feat.foot].apply(local_center)[0]
        disc = (rows - center[0]) ** 2 + (cols - center[1]) ** 2 <= feat.radius_px**2
        if not disc.any():
            raise LesionOutsideFoot("feature disc covers no pixels")
        if (disc & ~masks[feat.foot]).any():
            raise LesionOutsideFoot(
                f"{kind} at {tuple(np.round(center, 1))} leaks off the {feat.foot} foot"
            )
        scene[disc] += feat.delta_c
        coords = np.argwhere(disc)
        r0, c0 = coords.min(axis=0)
        r1, c1 = coords.max(axis=0)
        features.append(
            FeatureTruth(
                foot=feat.foot,
                kind=kind,
                center_rc=(float(center[0]), float(center[1])),
                radius_px=feat.radius_px,
                delta_c=feat.delta_c,
                pixel_mask=disc,
                bbox=(int(r0), int(c0), int(r1), int(c1)),
                expected_reference=feat.foot if kind == "lesion" else _other(feat.foot),
                expected_verdict="confirmed"
                if kind == "lesion"
                else "rejected_cold_contralateral",
            )
        )

    if spec.smooth_sigma_px > 0:
        scene = ndimage.gaussian_filter(scene, spec.smooth_sigma_px, mode="nearest")

    noisy = scene
    if spec.noise_sigma_c > 0:
        rng = np.random.default_rng(seed)
        noisy = scene + rng.normal(0.0, spec.noise_sigma_c, scene.shape)

    curve = spec.curve()
    counts = temps_to_counts(noisy, curve)
    frame_id = f"phantom-plantar-seed{seed}"
    frame = RawFrame(
        counts=counts,
        view=FrameView.plantar(),
        captured_at=CAPTURE_EPOCH,
        frame_id=frame_id,
    )
    truth = PhantomTruth(
        spec=spec,
        seed=seed,
        masks={foot: FootMask(mask) for foot, mask in masks.items()},
        landmarks=landmarks,
        transforms=transforms,
        features=features,
        calibration=curve,
        scene_temps=scene,
        frame_id=frame_id,
    )
    return frame, truth


def generate_periphery(spec: PhantomSpec, angle: int, seed: int = 0) -> RawFrame:
    """Silhouette view of the lower leg at one C-arm stop.

    The 0 and 180 degree stops look at opposite sides, so their
    silhouettes are mirror images; 90 and 270 foreshorten the foot.
    """
    if angle not in (0, 90, 180, 270):
        raise InvalidAngle(f"periphery angle must be 0/90/180/270, got {angle}")
    sensor = SensorSpec()
    rows, cols = np.mgrid[0 : sensor.height, 0 : sensor.width]

    def ellipse(rc, cc, sr, sc):
        return ((rows - rc) / sr) ** 2 + ((cols - cc) / sc) ** 2 <= 1.0

    mid = (sensor.width - 1) / 2.0  # flip axis of the frame
    shank = ellipse(45.0, mid, 40.0, 14.0)
    if angle in (0, 180):
        direction = 1.0 if angle == 0 else -1.0
        foot = ellipse(98.0, mid + direction * 18.0, 12.0, 24.0)
    else:
        foot = ellipse(98.0, mid, 12.0, 11.0)
    leg = shank | foot

    base = (spec.base_temp_left_c + spec.base_temp_right_c) / 2.0
    scene = np.where(leg, base, spec.background_temp_c).astype(np.float64)
    if spec.noise_sigma_c > 0:
        rng = np.random.default_rng((seed, angle))
        scene = scene + rng.normal(0.0, spec.noise_sigma_c, scene.shape)
    counts = temps_to_counts(scene, spec.curve())
    return RawFrame(
        counts=counts,
        view=FrameView.periphery(angle),
        captured_at=CAPTURE_EPOCH,
        frame_id=f"phantom-periphery-{angle}-seed{seed}",
    )


def scene_temperature_map(truth: PhantomTruth) -> TemperatureMap:
    """The noiseless scene as a TemperatureMap (for oracle comparisons)."""
    return TemperatureMap(
        temps=truth.scene_temps,
        valid=np.isfinite(truth.scene_temps),
        view=FrameView.plantar(),
        source_frame=truth.frame_id,
    )


def save_truth(truth: PhantomTruth, out_dir: str | Path) -> Path:
    """Write the ground-truth bundle beside the frames."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for foot, mask in truth.masks.items():
        save_mask_png(mask, out_dir / f"truth_mask_{foot}.png")
    save_calibration(truth.calibration, out_dir / "calibration.json")
    doc = {
        "seed": truth.seed,
        "frame_id": truth.frame_id,
        "spec": truth.spec.to_dict(),
        "landmarks": {
            foot: [[float(r), float(c)] for r, c in lm.points]
            for foot, lm in truth.landmarks.items()
        },
        "transforms": {foot: t.to_flat() for foot, t in truth.transforms.items()},
        "features": [
            {
                "foot": f.foot,
                "kind": f.kind,
                "center_rc": list(f.center_rc),
                "radius_px": f.radius_px,
                "delta_c": f.delta_c,
                "bbox": list(f.bbox),
                "area_px": int(f.pixel_mask.sum()),
                "expected_reference": f.expected_reference,
                "expected_verdict": f.expected_verdict,
            }
            for f in truth.features
        ],
    }
    (out_dir / "truth.json").write_text(json.dumps(doc, indent=2, sort_keys=True))
    return out_dir


def _other(foot: str) -> str:
    return "right" if foot == "left" else "left"
