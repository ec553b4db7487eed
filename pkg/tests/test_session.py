"""Session document parsing, path resolution and config merging."""

import json

import pytest

from thermofoot.errors import ParseError, PreconditionError
from thermofoot.segmentation import TrimapLabel
from thermofoot.session import SessionDocument, parse_scribbles


def minimal_doc(tmp_path, **extra):
    doc = {
        "schema_version": 1,
        "frames": {"plantar": "frame.raw", "periphery": []},
        "calibration": "cal.json",
        "landmarks": None,
        "scribbles": [],
        "init_rect": None,
        "suspect_foot": "left",
        "config": {},
        "subject": {},
    }
    doc.update(extra)
    path = tmp_path / "session.json"
    path.write_text(json.dumps(doc))
    return path


def test_round_trip(tmp_path):
    path = minimal_doc(tmp_path, config={"delta_threshold_c": 2.5})
    doc = SessionDocument.load(path)
    assert doc.plantar_frame == "frame.raw"
    assert doc.base_dir == tmp_path
    saved = doc.save(tmp_path / "copy.json")
    assert SessionDocument.load(saved).to_dict() == doc.to_dict()


def test_relative_paths_resolve_against_document_dir(tmp_path):
    nested = tmp_path / "a" / "b"
    nested.mkdir(parents=True)
    path = minimal_doc(nested)
    doc = SessionDocument.load(path)
    assert doc.resolve("frame.raw") == nested / "frame.raw"
    assert doc.resolve("/abs/frame.raw").as_posix() == "/abs/frame.raw"


def test_config_merging_overrides(tmp_path):
    doc = SessionDocument.load(minimal_doc(tmp_path, config={"delta_threshold_c": 2.5}))
    assert doc.build_config().delta_threshold_c == 2.5
    assert doc.build_config({"delta_threshold_c": 3.0}).delta_threshold_c == 3.0
    assert doc.build_config().min_hotspot_px == 4  # untouched defaults


def test_missing_schema_version_rejected(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"frames": {"plantar": "f"}}))
    with pytest.raises(ParseError):
        SessionDocument.load(path)


def test_missing_landmarks_is_precondition_error(tmp_path):
    doc = SessionDocument.load(minimal_doc(tmp_path))
    with pytest.raises(PreconditionError, match="landmarks"):
        doc.to_pipeline_inputs()


def test_parse_scribbles():
    parsed = parse_scribbles([[1, 2, "fg"], [3, 4, "bg"]])
    assert parsed == [
        (1, 2, TrimapLabel.DEFINITE_FOREGROUND),
        (3, 4, TrimapLabel.DEFINITE_BACKGROUND),
    ]
    with pytest.raises(ParseError):
        parse_scribbles([[1, 2, "maybe"]])
    with pytest.raises(ParseError):
        parse_scribbles([[1, 2]])
