"""Phantom generator: determinism, ground-truth invariants, pipeline oracle."""

import json

import numpy as np
import pytest

from thermofoot.analysis import AnalysisConfig, PipelineInputs, Verdict, run_analysis
from thermofoot.errors import InvalidAngle, LesionOutsideFoot, PreconditionError
from thermofoot.phantom import (
    FeatureSpec,
    PhantomSpec,
    generate,
    generate_periphery,
    save_truth,
)
from thermofoot.segmentation import split_feet


def toe_lesion(delta=2.5, foot="left", radius=3.5):
    return FeatureSpec(
        foot=foot, length_frac=0.10, width_frac=0.0, radius_px=radius, delta_c=delta
    )


def heel_cold_patch(delta=-3.0, foot="right", radius=4.0):
    return FeatureSpec(
        foot=foot, length_frac=0.82, width_frac=0.1, radius_px=radius, delta_c=delta
    )


def test_generation_is_deterministic():
    spec = PhantomSpec(noise_sigma_c=0.3, lesions=(toe_lesion(),))
    frame_a, truth_a = generate(spec, seed=7)
    frame_b, truth_b = generate(spec, seed=7)
    assert np.array_equal(frame_a.counts, frame_b.counts)
    assert frame_a.frame_id == frame_b.frame_id
    for foot in ("left", "right"):
        assert np.array_equal(truth_a.masks[foot].mask, truth_b.masks[foot].mask)
    frame_c, _ = generate(spec, seed=8)
    assert not np.array_equal(frame_a.counts, frame_c.counts)


def test_masks_are_two_disjoint_feet():
    _, truth = generate(PhantomSpec(), seed=1)
    left = truth.masks["left"].mask
    right = truth.masks["right"].mask
    assert not (left & right).any()
    assert left.sum() > 1000 and right.sum() > 1000
    # the splitter's left/right convention agrees with the ground truth
    whole = truth.masks["left"]
    merged = np.logical_or(left, right)
    split_l, split_r = split_feet(type(whole)(merged))
    assert np.array_equal(split_l.mask, left)
    assert np.array_equal(split_r.mask, right)


def test_landmarks_are_anatomically_placed():
    _, truth = generate(PhantomSpec(), seed=2)
    right = truth.landmarks["right"]
    left = truth.landmarks["left"]
    # medial sides face the midline between the feet
    assert right.medial_metatarsal[1] > right.lateral_metatarsal[1]
    assert left.medial_metatarsal[1] < left.lateral_metatarsal[1]
    for lm in (left, right):
        assert lm.toe_tip[0] < lm.heel_center[0]  # toe above heel


def test_lesion_pixels_inside_mask():
    spec = PhantomSpec(lesions=(toe_lesion(),), cold_patches=(heel_cold_patch(),))
    _, truth = generate(spec, seed=3)
    for feature in truth.features:
        inside = truth.masks[feature.foot].mask
        assert not (feature.pixel_mask & ~inside).any()
        assert feature.pixel_mask.sum() >= 4


def test_lesion_outside_foot_rejected():
    bad = FeatureSpec(
        foot="left", length_frac=0.0, width_frac=1.0, radius_px=6.0, delta_c=2.5
    )
    with pytest.raises(LesionOutsideFoot):
        generate(PhantomSpec(lesions=(bad,)), seed=0)


def test_feature_sign_conventions():
    with pytest.raises(PreconditionError):
        PhantomSpec(lesions=(heel_cold_patch(),))  # negative delta in lesions
    with pytest.raises(PreconditionError):
        PhantomSpec(cold_patches=(toe_lesion(),))  # positive delta in cold patches


def test_inverse_calibration_round_trip():
    spec = PhantomSpec(noise_sigma_c=0.2, lesions=(toe_lesion(),))
    frame, truth = generate(spec, seed=11)
    recovered = truth.calibration.predict(frame.counts)
    # the pre-quantization field: scene plus the seeded noise
    rng = np.random.default_rng(11)
    noisy = truth.scene_temps + rng.normal(0.0, 0.2, truth.scene_temps.shape)
    bound = 0.5 * truth.calibration.slope
    assert np.abs(recovered - noisy).max() <= bound * (1 + 1e-9)


def test_spec_json_round_trip(tmp_path):
    spec = PhantomSpec(
        noise_sigma_c=0.1,
        lesions=(toe_lesion(),),
        cold_patches=(heel_cold_patch(),),
        left_rotation_deg=2.5,
        left_shift_px=(1.0, -2.0),
    )
    path = spec.save(tmp_path / "spec.json")
    assert PhantomSpec.load(path) == spec


def test_truth_bundle_written(tmp_path):
    spec = PhantomSpec(lesions=(toe_lesion(),))
    _, truth = generate(spec, seed=5)
    out = save_truth(truth, tmp_path / "truth")
    assert (out / "truth_mask_left.png").exists()
    assert (out / "truth_mask_right.png").exists()
    assert (out / "calibration.json").exists()
    doc = json.loads((out / "truth.json").read_text())
    assert doc["seed"] == 5
    assert doc["features"][0]["expected_verdict"] == "confirmed"
    assert len(doc["landmarks"]["left"]) == 4


# -- pipeline oracle ---------------------------------------------------------------


def run_pipeline_on(spec, seed):
    frame, truth = generate(spec, seed)
    inputs = PipelineInputs(
        frame=frame,
        calibration=truth.calibration,
        landmarks_left=truth.landmarks["left"],
        landmarks_right=truth.landmarks["right"],
        config=AnalysisConfig(),
    )
    return run_analysis(inputs), truth


def test_clean_phantom_yields_no_confirmed_hotspots():
    (report, artifacts), _ = run_pipeline_on(PhantomSpec(), seed=21)
    confirmed = [
        h for h in report.data["hotspots"] if h["verdict"] == Verdict.CONFIRMED.value
    ]
    assert confirmed == []
    assert report.data["confirmed_roi_fraction"] is None
    rows = report.data["roi_stats"]["rows"]
    assert [r["region"] for r in rows] == ["Toe", "Metatarsal", "Heel", "Overall"]


def test_toe_lesion_confirmed_within_truth_bbox():
    spec = PhantomSpec(lesions=(toe_lesion(),), left_rotation_deg=2.0, left_shift_px=(1.0, 0.0))
    (report, artifacts), truth = run_pipeline_on(spec, seed=22)
    confirmed = [
        h for h in report.data["hotspots"] if h["verdict"] == Verdict.CONFIRMED.value
    ]
    assert len(confirmed) == 1
    spot = confirmed[0]
    assert spot["reference_foot"] == "left"
    tr0, tc0, tr1, tc1 = truth.features[0].bbox
    r0, c0, r1, c1 = spot["bbox"]
    assert abs(r0 - tr0) <= 1 and abs(c0 - tc0) <= 1
    assert abs(r1 - tr1) <= 1 and abs(c1 - tc1) <= 1
    assert spot["mean_delta_c"] == pytest.approx(2.5, abs=0.05)
    # a toe lesion lands entirely in the toe band
    assert report.data["confirmed_roi_fraction"] == pytest.approx(1.0)
    assert set(spot["roi_membership"]) == {"Toe"}


def test_cold_patch_rejected_not_confirmed():
    spec = PhantomSpec(cold_patches=(heel_cold_patch(),))
    (report, _), truth = run_pipeline_on(spec, seed=23)
    spots = report.data["hotspots"]
    rejected = [h for h in spots if h["verdict"] == "rejected_cold_contralateral"]
    confirmed = [h for h in spots if h["verdict"] == "confirmed"]
    assert confirmed == []
    assert len(rejected) == 1
    assert rejected[0]["reference_foot"] == "left"  # patch is on the right foot


# -- periphery -----------------------------------------------------------------------


def test_periphery_mirror_symmetry():
    spec = PhantomSpec()
    f0 = generate_periphery(spec, 0)
    f180 = generate_periphery(spec, 180)
    assert np.array_equal(f0.counts, f180.counts[:, ::-1])
    assert not np.array_equal(f0.counts, f180.counts)


def test_periphery_invalid_angle():
    with pytest.raises(InvalidAngle):
        generate_periphery(PhantomSpec(), 45)


def test_periphery_four_distinct_frames():
    spec = PhantomSpec()
    frames = [generate_periphery(spec, angle, seed=9) for angle in (0, 90, 180, 270)]
    ids = {f.frame_id for f in frames}
    assert len(ids) == 4
    for frame, angle in zip(frames, (0, 90, 180, 270)):
        assert frame.view.kind == "periphery"
        assert frame.view.angle_deg == angle
