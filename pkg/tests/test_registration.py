"""Vertical alignment, three-point affine recovery and warping."""

from datetime import datetime, timezone

import numpy as np
import pytest

from thermofoot.errors import (
    CoincidentPoints,
    CollinearPoints,
    PreconditionError,
    SingularTransform,
)
from thermofoot.radiometry import FrameView, TemperatureMap
from thermofoot.registration import (
    AffineTransform,
    LandmarkSet,
    affine_from_three,
    align_pair,
    vertical_alignment,
    warp_map,
    warp_mask,
)
from thermofoot.segmentation import FootMask

TS = datetime(2024, 5, 1, tzinfo=timezone.utc)


def make_map(temps, valid=None, frame="m"):
    temps = np.asarray(temps, dtype=np.float64)
    if valid is None:
        valid = np.isfinite(temps)
    return TemperatureMap(
        temps=np.where(valid, temps, np.nan),
        valid=valid,
        view=FrameView.plantar(),
        source_frame=frame,
    )


# -- vertical alignment ---------------------------------------------------------


def test_vertical_alignment_identity_when_already_vertical():
    t = vertical_alignment((10.0, 50.0), (80.0, 50.0))
    assert np.allclose(t.matrix, AffineTransform.identity().matrix, atol=1e-12)


def test_vertical_alignment_quarter_turn():
    t = vertical_alignment((50.0, 10.0), (50.0, 80.0))
    p2, p4 = t.apply([(50.0, 10.0), (50.0, 80.0)])
    assert abs(p2[1] - p4[1]) <= 1e-9  # same column
    assert p4[0] > p2[0]  # heel below
    assert t.determinant == pytest.approx(1.0, abs=1e-12)


def test_vertical_alignment_random_segments():
    rng = np.random.default_rng(21)
    for _ in range(100):
        p2 = rng.uniform(0, 100, 2)
        p4 = p2 + rng.uniform(-60, 60, 2)
        if np.hypot(*(p4 - p2)) < 1e-3:
            continue
        t = vertical_alignment(p2, p4)
        q2, q4 = t.apply([p2, p4])
        assert abs(q2[1] - q4[1]) <= 1e-9
        assert q4[0] > q2[0]
        assert t.determinant == pytest.approx(1.0, abs=1e-12)
        # isometry: p2-p4 distance preserved
        assert np.hypot(*(q4 - q2)) == pytest.approx(np.hypot(*(p4 - p2)), abs=1e-9)
        # rotation is about the midpoint
        mid = (p2 + p4) / 2
        assert np.allclose(t.apply(mid)[0], mid, atol=1e-9)


def test_vertical_alignment_coincident_points():
    with pytest.raises(CoincidentPoints):
        vertical_alignment((5.0, 5.0), (5.0, 5.0))


# -- affine from three correspondences -------------------------------------------


def test_affine_identity_from_identical_triples():
    pts = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)]
    t = affine_from_three(pts, pts)
    assert np.allclose(t.matrix, AffineTransform.identity().matrix, atol=1e-12)


def test_affine_detects_reflection():
    src = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)]
    dst = [(0.0, 100.0), (10.0, 100.0), (0.0, 90.0)]  # mirrored about a vertical axis
    t = affine_from_three(src, dst)
    assert t.determinant < 0
    assert t.includes_reflection


def test_affine_recovers_random_ground_truth():
    rng = np.random.default_rng(33)
    for _ in range(50):
        truth = AffineTransform(
            np.column_stack([rng.uniform(-2, 2, (2, 2)) + np.eye(2), rng.uniform(-20, 20, 2)])
        )
        src = rng.uniform(0, 100, (3, 2))
        u, v = src[1] - src[0], src[2] - src[0]
        if abs(u[0] * v[1] - u[1] * v[0]) < 1.0:
            continue
        dst = truth.apply(src)
        recovered = affine_from_three(src, dst)
        assert np.allclose(recovered.matrix, truth.matrix, atol=1e-6)
        # exactness on the three defining points
        assert np.abs(recovered.apply(src) - dst).max() <= 1e-9


def test_affine_rejects_collinear():
    line = [(0.0, 0.0), (5.0, 5.0), (10.0, 10.0)]
    good = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)]
    with pytest.raises(CollinearPoints):
        affine_from_three(line, good)
    with pytest.raises(CollinearPoints):
        affine_from_three(good, line)


def test_transform_flat_round_trip_and_singularity():
    t = vertical_alignment((3.0, 4.0), (40.0, 9.0))
    back = AffineTransform.from_flat(t.to_flat())
    assert np.allclose(back.matrix, t.matrix, atol=0)
    with pytest.raises(SingularTransform):
        AffineTransform(np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0]]))


# -- warping ---------------------------------------------------------------------


def test_warp_identity_is_bit_identical():
    rng = np.random.default_rng(2)
    temps = rng.uniform(25, 40, (30, 40))
    temps[5, 5] = np.nan
    valid = np.isfinite(temps)
    tmap = make_map(temps, valid)
    warped = warp_map(tmap, AffineTransform.identity())
    assert np.array_equal(warped.valid, valid)
    assert np.array_equal(warped.temps[valid], temps[valid])


def test_warp_integer_translation():
    rng = np.random.default_rng(6)
    temps = rng.uniform(25, 40, (20, 20))
    tmap = make_map(temps)
    shift = AffineTransform(np.array([[1.0, 0.0, 5.0], [0.0, 1.0, 0.0]]))
    warped = warp_map(tmap, shift)
    assert np.array_equal(warped.temps[5:, :], temps[:-5, :])
    assert not warped.valid[:5, :].any()
    assert warped.valid[5:, :].all()
    assert np.isnan(warped.temps[:5, :]).all()


def test_warp_round_trip_on_smooth_field():
    rr, cc = np.mgrid[0:60, 0:80].astype(np.float64)
    temps = 30.0 + 2.0 * np.sin(rr / 25.0) * np.cos(cc / 30.0)
    tmap = make_map(temps)
    t = vertical_alignment((10.0, 20.0), (50.0, 28.0))
    once = warp_map(tmap, t)
    back = warp_map(once, t.inverse())
    interior = np.zeros_like(back.valid)
    interior[5:-5, 5:-5] = True
    interior &= back.valid
    assert interior.sum() > 1000
    # interpolation loss bounded by twice the sensor sensitivity
    assert np.abs(back.temps[interior] - temps[interior]).max() <= 2 * 0.05


def test_warp_preserves_bounds():
    rng = np.random.default_rng(14)
    temps = rng.uniform(20, 45, (40, 40))
    tmap = make_map(temps)
    for _ in range(20):
        angle = rng.uniform(0, 2 * np.pi)
        rot = np.array(
            [[np.cos(angle), np.sin(angle)], [-np.sin(angle), np.cos(angle)]]
        )
        t = AffineTransform(np.column_stack([rot, rng.uniform(-5, 5, 2)]))
        warped = warp_map(tmap, t)
        if warped.valid.any():
            vals = warped.temps[warped.valid]
            assert vals.min() >= temps.min() - 1e-12
            assert vals.max() <= temps.max() + 1e-12


def test_warp_mask_nearest():
    mask = np.zeros((20, 20), dtype=bool)
    mask[4:10, 6:12] = True
    shift = AffineTransform(np.array([[1.0, 0.0, 3.0], [0.0, 1.0, -2.0]]))
    out = warp_mask(FootMask(mask, provenance="user_corrected"), shift)
    expected = np.zeros_like(mask)
    expected[7:13, 4:10] = True
    assert np.array_equal(out.mask, expected)
    assert out.provenance == "user_corrected"


# -- contralateral alignment -----------------------------------------------------


def synthetic_pair(width=160, height=120):
    """A right foot and its exact mirror, with matching landmarks."""
    rr, cc = np.mgrid[0:height, 0:width]
    right_mask = (((rr - 60) / 40.0) ** 2 + ((cc - 50) / 14.0) ** 2) <= 1.0
    left_mask = right_mask[:, ::-1]
    temps = np.full((height, width), 24.0)
    pattern = 32.0 + 0.02 * rr + 0.01 * cc  # asymmetric on purpose
    temps_right = np.where(right_mask, pattern, temps)
    temps_left = np.where(left_mask, pattern[:, ::-1], temps)
    # right foot: medial side faces the larger columns (towards midline)
    right_lm = LandmarkSet(
        points=np.array([[22.0, 50.0], [38.0, 60.0], [38.0, 40.0], [92.0, 50.0]]),
        foot="right",
    )
    mirror_col = width - 1.0
    left_pts = right_lm.points.copy()
    left_pts[:, 1] = mirror_col - left_pts[:, 1]
    left_lm = LandmarkSet(points=left_pts, foot="left")
    return (
        make_map(temps_right, frame="right"),
        FootMask(right_mask),
        right_lm,
        make_map(temps_left, frame="left"),
        FootMask(left_mask),
        left_lm,
    )


def test_align_pair_self_mirror_zero_difference():
    ref_map, ref_mask, ref_lm, mov_map, mov_mask, mov_lm = synthetic_pair()
    pair = align_pair(ref_map, ref_mask, ref_lm, mov_map, mov_mask, mov_lm)
    assert pair.transform.determinant < 0
    # mirror of a mirror: overlap covers the whole reference foot
    assert np.array_equal(pair.overlap_mask, ref_mask.mask)
    diff = pair.reference_map.temps[pair.overlap_mask] - pair.moving_map.temps[pair.overlap_mask]
    assert np.abs(diff).max() <= 1e-9


def test_align_pair_recovers_known_transform():
    rng = np.random.default_rng(44)
    ref_map, ref_mask, ref_lm, mov_map, mov_mask, _ = synthetic_pair()
    mirror = AffineTransform(np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 159.0]]))
    center = np.array([60.0, 79.5])
    for _ in range(20):
        angle = rng.uniform(-0.3, 0.3)
        rot = np.array(
            [[np.cos(angle), np.sin(angle)], [-np.sin(angle), np.cos(angle)]]
        )
        jitter = rng.uniform(-4, 4, 2)
        rot_about_center = AffineTransform(
            np.column_stack([rot, center - rot @ center + jitter])
        )
        truth = rot_about_center.compose(mirror)
        mov_pts = truth.inverse().apply(ref_lm.points)
        mov_lm = LandmarkSet(points=mov_pts, foot="left")
        pair = align_pair(ref_map, ref_mask, ref_lm, mov_map, mov_mask, mov_lm)
        assert pair.transform.determinant < 0
        recovered_at_lm = pair.transform.apply(mov_pts)
        assert np.abs(recovered_at_lm - ref_lm.points).max() <= 1e-4


def test_align_pair_rejects_same_side_feet():
    ref_map, ref_mask, ref_lm, mov_map, mov_mask, mov_lm = synthetic_pair()
    same = LandmarkSet(points=mov_lm.points, foot="right")
    with pytest.raises(PreconditionError):
        align_pair(ref_map, ref_mask, ref_lm, mov_map, mov_mask, same)


def test_landmark_set_validation():
    with pytest.raises(CollinearPoints):
        LandmarkSet(
            points=np.array([[0.0, 0.0], [10.0, 0.0], [5.0, 5.0], [20.0, 0.0]]),
            foot="left",
        )
    with pytest.raises(PreconditionError):
        LandmarkSet(
            points=np.array([[0.0, 0.0], [10.0, 5.0], [5.0, 5.0], [10.0, 5.0]]),
            foot="left",
        )
    lm = LandmarkSet(
        points=np.array([[2.0, 5.0], [10.0, 9.0], [10.0, 1.0], [30.0, 5.0]]),
        foot="left",
    )
    with pytest.raises(PreconditionError):
        lm.validate_bounds(20, 20)  # heel row 30 outside a 20-row image
    lm.validate_bounds(40, 20)
