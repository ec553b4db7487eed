#!/usr/bin/env python3
"""Freeze a phantom session exchange for the UI tests.

Drives the real HTTP service end to end (frames, scribbles, landmarks,
analyze) and records every payload plus the final report, so the mock the
UI tests run against serves genuine pipeline output.
"""

import base64
import json
from pathlib import Path

from fastapi.testclient import TestClient

from thermofoot.phantom import FeatureSpec, PhantomSpec, generate
from thermofoot.service import create_app

SEED = 55
SCRIBBLES = [[2, 2, "bg"], [3, 3, "bg"], [2, 3, "bg"]]


def main() -> None:
    spec = PhantomSpec(
        lesions=(
            FeatureSpec(foot="left", length_frac=0.32, width_frac=0.1, radius_px=4.0, delta_c=2.8),
        ),
        cold_patches=(
            FeatureSpec(foot="right", length_frac=0.8, width_frac=0.0, radius_px=3.5, delta_c=-2.6),
        ),
        left_rotation_deg=2.0,
    )
    frame, truth = generate(spec, SEED)
    frame_body = {
        "sidecar": {
            "view": {"kind": "plantar", "angle_deg": None},
            "captured_at": frame.captured_at.isoformat(),
            "frame_id": frame.frame_id,
            "width": frame.shape[1],
            "height": frame.shape[0],
        },
        "counts_b64": base64.b64encode(frame.counts.astype("<u2").tobytes()).decode(),
    }
    landmarks = {
        foot: [[float(r), float(c)] for r, c in truth.landmarks[foot].points]
        for foot in ("left", "right")
    }

    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        app = create_app(Path(tmp))
        with TestClient(app) as client:
            sid = client.post(
                "/sessions", json={"calibration": truth.calibration.to_dict()}
            ).json()["id"]
            assert client.post(f"/sessions/{sid}/frames", json=frame_body).status_code == 200
            assert (
                client.post(
                    f"/sessions/{sid}/scribbles", json={"scribbles": SCRIBBLES}
                ).status_code
                == 200
            )
            assert (
                client.post(f"/sessions/{sid}/landmarks", json=landmarks).status_code == 200
            )
            report = client.post(f"/sessions/{sid}/analyze").json()

    fixture = {
        "calibration": truth.calibration.to_dict(),
        "frame": frame_body,
        "landmarks": landmarks,
        "scribbles": SCRIBBLES,
        "report": report,
    }
    out = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "phantom_session.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(fixture, indent=2, sort_keys=True))
    hotspots = report["hotspots"]
    print(f"wrote {out} ({len(hotspots)} hotspots)")


if __name__ == "__main__":
    main()
