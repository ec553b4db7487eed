"""Session document: the on-disk bundle a headless analysis run consumes.

Relative paths inside the document resolve against the document's own
directory, so a session directory can be moved or shipped as a unit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import AnalysisConfig, PipelineInputs
from .errors import ParseError, PreconditionError
from .radiometry import load_calibration, load_raw_frame
from .registration import LandmarkSet
from .segmentation import Rect, TrimapLabel

SESSION_SCHEMA_VERSION = 1

_SCRIBBLE_LABELS = {
    "fg": TrimapLabel.DEFINITE_FOREGROUND,
    "bg": TrimapLabel.DEFINITE_BACKGROUND,
}


def parse_scribbles(records) -> list:
    """[[row, col, "fg"|"bg"], ...] -> trimap-labeled tuples."""
    out = []
    for entry in records:
        if len(entry) != 3 or entry[2] not in _SCRIBBLE_LABELS:
            raise ParseError(f"bad scribble record {entry!r}; want [row, col, fg|bg]")
        out.append((int(entry[0]), int(entry[1]), _SCRIBBLE_LABELS[entry[2]]))
    return out


@dataclass
class SessionDocument:
    """Paths and annotations for one subject's analysis session."""

    plantar_frame: str
    calibration: str
    periphery_frames: list = field(default_factory=list)
    landmarks: dict | None = None  # {"left": [[r, c] x 4], "right": ...}
    scribbles: list = field(default_factory=list)  # [[row, col, "fg"|"bg"], ...]
    init_rect: list | None = None  # [row0, col0, row1, col1]
    suspect_foot: str = "left"
    config: dict = field(default_factory=dict)
    subject: dict = field(default_factory=dict)
    schema_version: int = SESSION_SCHEMA_VERSION
    base_dir: Path = field(default_factory=Path)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "frames": {
                "plantar": self.plantar_frame,
                "periphery": list(self.periphery_frames),
            },
            "calibration": self.calibration,
            "landmarks": self.landmarks,
            "scribbles": [list(s) for s in self.scribbles],
            "init_rect": list(self.init_rect) if self.init_rect else None,
            "suspect_foot": self.suspect_foot,
            "config": dict(self.config),
            "subject": dict(self.subject),
        }

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        return path

    @staticmethod
    def load(path: str | Path) -> "SessionDocument":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"cannot read session document {path}: {exc}") from exc
        try:
            if doc.get("schema_version") != SESSION_SCHEMA_VERSION:
                raise ParseError(
                    f"unsupported session schema {doc.get('schema_version')!r}"
                )
            return SessionDocument(
                plantar_frame=doc["frames"]["plantar"],
                periphery_frames=list(doc["frames"].get("periphery", [])),
                calibration=doc["calibration"],
                landmarks=doc.get("landmarks"),
                scribbles=[tuple(s) for s in doc.get("scribbles", [])],
                init_rect=doc.get("init_rect"),
                suspect_foot=doc.get("suspect_foot", "left"),
                config=doc.get("config", {}),
                subject=doc.get("subject", {}),
                base_dir=path.parent,
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed session document: missing {exc}") from exc

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base_dir / p

    def build_config(self, overrides: dict | None = None) -> AnalysisConfig:
        merged = dict(self.config)
        merged.update(overrides or {})
        return AnalysisConfig.from_dict(merged) if merged else AnalysisConfig()

    def scribble_tuples(self) -> list:
        return parse_scribbles(self.scribbles)

    def to_pipeline_inputs(self, config_overrides: dict | None = None) -> PipelineInputs:
        """Load referenced artifacts and assemble the analysis inputs."""
        if not self.landmarks:
            raise PreconditionError("session is missing required field: landmarks")
        for foot in ("left", "right"):
            if foot not in self.landmarks:
                raise PreconditionError(
                    f"session is missing required field: landmarks.{foot}"
                )
        frame = load_raw_frame(self.resolve(self.plantar_frame))
        curve = load_calibration(self.resolve(self.calibration))
        rect = None
        if self.init_rect:
            rect = Rect(*[int(v) for v in self.init_rect])
        return PipelineInputs(
            frame=frame,
            calibration=curve,
            landmarks_left=LandmarkSet(
                points=np.asarray(self.landmarks["left"], dtype=np.float64), foot="left"
            ),
            landmarks_right=LandmarkSet(
                points=np.asarray(self.landmarks["right"], dtype=np.float64), foot="right"
            ),
            config=self.build_config(config_overrides),
            scribbles=self.scribble_tuples() or None,
            init_rect=rect,
            suspect_foot=self.suspect_foot,
            subject=self.subject,
        )
