"""Sensor model and radiometric conversion.

Covers the counts-to-temperature path: the camera geometry, raw frames,
the linear calibration fitted from water-bath observations, the
non-linearity figure of merit, and per-pixel conversion into temperature
maps. File formats (raw counts, calibration document, temperature map
export) live here as well.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateSamples,
    DimensionMismatch,
    EmptySamples,
    ParseError,
    PreconditionError,
    TooFewSamples,
)

TEMP_VALID_RANGE_C = (-40.0, 120.0)

PERIPHERY_ANGLES = (0, 90, 180, 270)


@dataclass(frozen=True)
class SensorSpec:
    """Geometry and sensitivity of the thermal imager."""

    width: int = 160
    height: int = 120
    thermal_sensitivity_k: float = 0.05
    hfov_deg: float = 56.0
    dfov_deg: float = 71.0
    working_distance_m: float = 0.35

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise PreconditionError("sensor dimensions must be positive")
        if not self.hfov_deg < self.dfov_deg < 180.0:
            raise PreconditionError("field of view must satisfy hfov < dfov < 180")
        if self.working_distance_m <= 0:
            raise PreconditionError("working distance must be positive")

    @property
    def pixel_footprint_mm(self) -> float:
        """Side length on the scene plane covered by one pixel."""
        half = math.radians(self.hfov_deg / 2.0)
        return 2.0 * self.working_distance_m * math.tan(half) * 1000.0 / self.width

    @property
    def shape(self) -> tuple[int, int]:
        return self.height, self.width


@dataclass(frozen=True)
class FrameView:
    """Camera viewpoint: the fixed plantar camera or a C-arm periphery stop."""

    kind: str  # "plantar" | "periphery"
    angle_deg: int | None = None

    def __post_init__(self):
        if self.kind == "plantar":
            if self.angle_deg is not None:
                raise PreconditionError("plantar view carries no angle")
        elif self.kind == "periphery":
            if self.angle_deg not in PERIPHERY_ANGLES:
                raise PreconditionError(
                    f"periphery angle must be one of {PERIPHERY_ANGLES}"
                )
        else:
            raise PreconditionError(f"unknown view kind {self.kind!r}")

    @staticmethod
    def plantar() -> "FrameView":
        return FrameView("plantar")

    @staticmethod
    def periphery(angle_deg: int) -> "FrameView":
        return FrameView("periphery", angle_deg)


@dataclass
class RawFrame:
    """One frame of raw sensor counts plus its capture metadata."""

    counts: np.ndarray
    view: FrameView
    captured_at: datetime
    frame_id: str

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2:
            raise PreconditionError("counts must be a 2-D grid")
        if counts.dtype != np.uint16:
            if counts.size and (counts.min() < 0 or counts.max() > 0xFFFF):
                raise PreconditionError("counts must fit in 16 bits")
            counts = counts.astype(np.uint16)
        self.counts = counts

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape


@dataclass(frozen=True)
class CalibrationSample:
    """Reference bath temperature and the matching mean pixel value."""

    reference_temp_c: float
    mean_counts: float

    def __post_init__(self):
        if not 0.0 <= self.reference_temp_c <= 100.0:
            raise PreconditionError("reference temperature must lie in [0, 100] degC")


@dataclass(frozen=True)
class CalibrationCurve:
    """Linear counts-to-Celsius model with fit diagnostics."""

    slope: float
    intercept: float
    residual_rms: float
    nonlinearity_pct: float
    sample_range_c: tuple[float, float]

    def __post_init__(self):
        if self.slope <= 0.0:
            raise DegenerateSamples("calibration slope must be positive")
        if self.nonlinearity_pct < 0.0:
            raise PreconditionError("non-linearity cannot be negative")

    def predict(self, counts) -> np.ndarray:
        """Temperature(s) in degC for the given raw count value(s)."""
        return self.slope * np.asarray(counts, dtype=np.float64) + self.intercept

    def inverse(self, temps_c) -> np.ndarray:
        """Real-valued counts producing the given temperature(s)."""
        return (np.asarray(temps_c, dtype=np.float64) - self.intercept) / self.slope

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "residual_rms": self.residual_rms,
            "nonlinearity_pct": self.nonlinearity_pct,
            "sample_range_c": list(self.sample_range_c),
        }

    @staticmethod
    def from_dict(d: dict) -> "CalibrationCurve":
        try:
            return CalibrationCurve(
                slope=float(d["slope"]),
                intercept=float(d["intercept"]),
                residual_rms=float(d["residual_rms"]),
                nonlinearity_pct=float(d["nonlinearity_pct"]),
                sample_range_c=(
                    float(d["sample_range_c"][0]),
                    float(d["sample_range_c"][1]),
                ),
            )
        except (KeyError, TypeError, IndexError) as exc:
            raise ParseError(f"malformed calibration document: {exc}") from exc


@dataclass
class TemperatureMap:
    """Calibrated per-pixel temperatures; invalid pixels are NaN + masked."""

    temps: np.ndarray
    valid: np.ndarray
    view: FrameView
    source_frame: str

    def __post_init__(self):
        # float64 while in memory; the on-disk format quantizes to 32-bit
        temps = np.asarray(self.temps, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        if temps.shape != valid.shape or temps.ndim != 2:
            raise PreconditionError("temps and valid must be matching 2-D grids")
        lo, hi = TEMP_VALID_RANGE_C
        vals = temps[valid]
        if vals.size and (
            not np.all(np.isfinite(vals)) or vals.min() < lo or vals.max() > hi
        ):
            raise PreconditionError(
                f"valid temperatures must be finite and within [{lo}, {hi}] degC"
            )
        self.temps = temps
        self.valid = valid

    @property
    def shape(self) -> tuple[int, int]:
        return self.temps.shape


def fit_calibration(samples: list[CalibrationSample]) -> CalibrationCurve:
    """Least-squares line through (mean counts, reference temperature).

    Minimizes the sum of squared temperature residuals over the samples
    and attaches the residual RMS and the non-linearity percentage.
    """
    if len(samples) < 3:
        raise TooFewSamples("calibration needs at least 3 samples")
    counts = np.array([s.mean_counts for s in samples], dtype=np.float64)
    temps = np.array([s.reference_temp_c for s in samples], dtype=np.float64)
    if np.unique(counts).size < 2:
        raise DegenerateSamples("all samples share one count value; no unique line")

    c_mean = counts.mean()
    t_mean = temps.mean()
    dc = counts - c_mean
    slope = float(np.dot(dc, temps - t_mean) / np.dot(dc, dc))
    intercept = float(t_mean - slope * c_mean)

    residuals = slope * counts + intercept - temps
    residual_rms = float(np.sqrt(np.mean(residuals**2)))
    curve = CalibrationCurve(
        slope=slope,
        intercept=intercept,
        residual_rms=residual_rms,
        nonlinearity_pct=0.0,
        sample_range_c=(float(temps.min()), float(temps.max())),
    )
    nl = nonlinearity_percent(samples, curve)
    return CalibrationCurve(
        slope=slope,
        intercept=intercept,
        residual_rms=residual_rms,
        nonlinearity_pct=nl,
        sample_range_c=(float(temps.min()), float(temps.max())),
    )


def nonlinearity_percent(
    samples: list[CalibrationSample], curve: CalibrationCurve
) -> float:
    """Maximum deviation over maximum full-scale input, as a percentage.

    Full-scale input is taken as the largest reference temperature in the
    sample set.
    """
    if not samples:
        raise EmptySamples("non-linearity needs at least one sample")
    counts = np.array([s.mean_counts for s in samples], dtype=np.float64)
    temps = np.array([s.reference_temp_c for s in samples], dtype=np.float64)
    full_scale = temps.max()
    if full_scale <= 0.0:
        raise PreconditionError("full-scale reference temperature must be positive")
    deviation = np.abs(curve.predict(counts) - temps).max()
    return float(100.0 * deviation / full_scale)


def counts_to_temperature(
    frame: RawFrame,
    curve: CalibrationCurve,
    sensor: SensorSpec | None = None,
) -> TemperatureMap:
    """Apply the calibration line to every pixel of a raw frame.

    Pixels landing outside the plausible temperature range are masked
    invalid (NaN), never clamped.
    """
    if sensor is not None and frame.shape != sensor.shape:
        raise DimensionMismatch(
            f"frame shape {frame.shape} does not match sensor {sensor.shape}"
        )
    temps = curve.predict(frame.counts)
    lo, hi = TEMP_VALID_RANGE_C
    valid = (temps >= lo) & (temps <= hi)
    temps = np.where(valid, temps, np.nan)
    return TemperatureMap(
        temps=temps, valid=valid, view=frame.view, source_frame=frame.frame_id
    )


# -- persistence ---------------------------------------------------------------


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(path.suffix + ".json")


def _view_to_dict(view: FrameView) -> dict:
    return {"kind": view.kind, "angle_deg": view.angle_deg}


def _view_from_dict(d: dict) -> FrameView:
    return FrameView(kind=d["kind"], angle_deg=d.get("angle_deg"))


def save_raw_frame(frame: RawFrame, path: str | Path) -> Path:
    """Write little-endian u16 counts plus a JSON sidecar; returns the path."""
    path = Path(path)
    path.write_bytes(frame.counts.astype("<u2").tobytes(order="C"))
    sidecar = {
        "view": _view_to_dict(frame.view),
        "captured_at": frame.captured_at.isoformat(),
        "frame_id": frame.frame_id,
        "width": frame.shape[1],
        "height": frame.shape[0],
    }
    _sidecar_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return path


def load_raw_frame(path: str | Path) -> RawFrame:
    path = Path(path)
    try:
        sidecar = json.loads(_sidecar_path(path).read_text())
        width = int(sidecar["width"])
        height = int(sidecar["height"])
        view = _view_from_dict(sidecar["view"])
        captured_at = datetime.fromisoformat(sidecar["captured_at"])
        frame_id = str(sidecar["frame_id"])
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read frame sidecar for {path}: {exc}") from exc
    raw = path.read_bytes()
    expected = width * height * 2
    if len(raw) != expected:
        raise ParseError(
            f"{path}: expected {expected} bytes of u16 counts, found {len(raw)}"
        )
    counts = np.frombuffer(raw, dtype="<u2").reshape(height, width).copy()
    return RawFrame(counts=counts, view=view, captured_at=captured_at, frame_id=frame_id)


def save_calibration(curve: CalibrationCurve, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(curve.to_dict(), indent=2, sort_keys=True))
    return path


def load_calibration(path: str | Path) -> CalibrationCurve:
    path = Path(path)
    try:
        return CalibrationCurve.from_dict(json.loads(path.read_text()))
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read calibration {path}: {exc}") from exc


def save_temperature_map(tmap: TemperatureMap, path: str | Path) -> Path:
    """Write 32-bit little-endian floats (NaN marks invalid) plus sidecar."""
    path = Path(path)
    path.write_bytes(tmap.temps.astype("<f4").tobytes(order="C"))
    sidecar = {
        "view": _view_to_dict(tmap.view),
        "source_frame": tmap.source_frame,
        "width": tmap.shape[1],
        "height": tmap.shape[0],
    }
    _sidecar_path(path).write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return path


def load_temperature_map(path: str | Path) -> TemperatureMap:
    path = Path(path)
    try:
        sidecar = json.loads(_sidecar_path(path).read_text())
        width = int(sidecar["width"])
        height = int(sidecar["height"])
        view = _view_from_dict(sidecar["view"])
        source_frame = str(sidecar["source_frame"])
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read map sidecar for {path}: {exc}") from exc
    raw = path.read_bytes()
    expected = width * height * 4
    if len(raw) != expected:
        raise ParseError(
            f"{path}: expected {expected} bytes of f32 values, found {len(raw)}"
        )
    temps = np.frombuffer(raw, dtype="<f4").reshape(height, width).copy()
    valid = np.isfinite(temps)
    return TemperatureMap(temps=temps, valid=valid, view=view, source_frame=source_frame)


def temperature_map_to_csv(tmap: TemperatureMap, path: str | Path) -> Path:
    """One CSV row per scanline; invalid pixels serialize as nan."""
    path = Path(path)
    with path.open("w") as fh:
        for row in tmap.temps:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")
    return path


def utc_now() -> datetime:
    return datetime.now(timezone.utc)
