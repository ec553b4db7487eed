"""Landmark-driven alignment of the two feet.

Coordinates are (row, col) throughout. A transform maps input coordinates
to output coordinates; warping resamples by inverse mapping, bilinear for
temperatures and nearest-neighbor for masks, with conservative invalid
propagation (any invalid source neighbor invalidates the sample).

Contralateral overlay maps anatomically corresponding landmarks onto each
other (toe tip, medial metatarsal head, heel center). Because the feet are
mirror images in the frame, the recovered affine carries a reflection:
its determinant is negative for every genuine left/right pair, which the
tests assert.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    CoincidentPoints,
    CollinearPoints,
    PreconditionError,
    SingularTransform,
)
from .radiometry import TemperatureMap
from .segmentation import FootMask

LANDMARK_NAMES = ("toe_tip", "medial_metatarsal", "lateral_metatarsal", "heel_center")
MIN_LANDMARK_TRIANGLE_PX2 = 4.0


@dataclass(frozen=True)
class AffineTransform:
    """2x3 affine map on (row, col) coordinates: p -> A p + b."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (2, 3):
            raise PreconditionError("affine matrix must be 2x3")
        if abs(float(np.linalg.det(m[:, :2]))) < 1e-6:
            raise SingularTransform("linear part is singular")
        object.__setattr__(self, "matrix", m)

    @property
    def linear(self) -> np.ndarray:
        return self.matrix[:, :2]

    @property
    def translation(self) -> np.ndarray:
        return self.matrix[:, 2]

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.linear))

    @property
    def includes_reflection(self) -> bool:
        return self.determinant < 0

    def apply(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return pts @ self.linear.T + self.translation

    def inverse(self) -> "AffineTransform":
        inv = np.linalg.inv(self.linear)
        return AffineTransform(np.column_stack([inv, -inv @ self.translation]))

    def compose(self, other: "AffineTransform") -> "AffineTransform":
        """Returns self after other: (self o other)(p) = self(other(p))."""
        lin = self.linear @ other.linear
        trans = self.linear @ other.translation + self.translation
        return AffineTransform(np.column_stack([lin, trans]))

    def to_flat(self) -> list[float]:
        return [float(v) for v in self.matrix.ravel()]

    @staticmethod
    def from_flat(values) -> "AffineTransform":
        arr = np.asarray(list(values), dtype=np.float64)
        if arr.shape != (6,):
            raise PreconditionError("expected 6 numbers, row-major 2x3")
        return AffineTransform(arr.reshape(2, 3))

    @staticmethod
    def identity() -> "AffineTransform":
        return AffineTransform(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]))


@dataclass
class LandmarkSet:
    """Four ordered anatomical points for one foot.

    Order: toe tip, medial metatarsal head, lateral metatarsal head,
    heel center.
    """

    points: np.ndarray
    foot: str  # "left" | "right"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (4, 2):
            raise PreconditionError("a landmark set is exactly 4 (row, col) points")
        if self.foot not in ("left", "right"):
            raise PreconditionError(f"unknown foot {self.foot!r}")
        if np.allclose(pts[1], pts[3], atol=1e-9):
            raise PreconditionError("metatarsal and heel landmarks must be distinct")
        if _triangle_area(pts[0], pts[1], pts[3]) < MIN_LANDMARK_TRIANGLE_PX2:
            raise CollinearPoints(
                "landmarks 1, 2, 4 are (near) collinear; re-pick them"
            )
        self.points = pts

    def validate_bounds(self, height: int, width: int) -> None:
        if (
            self.points.min() < 0
            or self.points[:, 0].max() > height - 1
            or self.points[:, 1].max() > width - 1
        ):
            raise PreconditionError("landmarks must lie inside the image")

    @property
    def toe_tip(self) -> np.ndarray:
        return self.points[0]

    @property
    def medial_metatarsal(self) -> np.ndarray:
        return self.points[1]

    @property
    def lateral_metatarsal(self) -> np.ndarray:
        return self.points[2]

    @property
    def heel_center(self) -> np.ndarray:
        return self.points[3]


@dataclass
class AlignedPair:
    """Reference foot untouched; moving foot warped onto it."""

    reference_map: TemperatureMap
    reference_mask: FootMask
    moving_map: TemperatureMap
    moving_mask: FootMask
    overlap_mask: np.ndarray
    transform: AffineTransform


def _triangle_area(a, b, c) -> float:
    u = np.asarray(b, dtype=np.float64) - a
    v = np.asarray(c, dtype=np.float64) - a
    return 0.5 * abs(float(u[0] * v[1] - u[1] * v[0]))


def vertical_alignment(p2, p4) -> AffineTransform:
    """Rigid rotation about the p2-p4 midpoint making the segment vertical.

    After the transform the metatarsal-to-heel segment runs along the
    column axis with the heel at the larger row. Pure rotation plus
    translation, determinant +1.
    """
    p2 = np.asarray(p2, dtype=np.float64)
    p4 = np.asarray(p4, dtype=np.float64)
    delta = p4 - p2
    if np.hypot(*delta) < 1e-9:
        raise CoincidentPoints("vertical alignment needs two distinct points")
    theta = np.arctan2(delta[1], delta[0])
    rot = np.array(
        [
            [np.cos(theta), np.sin(theta)],
            [-np.sin(theta), np.cos(theta)],
        ]
    )
    mid = (p2 + p4) / 2.0
    trans = mid - rot @ mid
    return AffineTransform(np.column_stack([rot, trans]))


def affine_from_three(src, dst) -> AffineTransform:
    """Exact affine map sending three source points to three targets."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != (3, 2) or dst.shape != (3, 2):
        raise PreconditionError("affine_from_three takes two point triples")
    for pts, name in ((src, "source"), (dst, "destination")):
        if _triangle_area(*pts) < 1e-6:
            raise CollinearPoints(f"{name} points are collinear")
    # six unknowns: [a00 a01 t0 a10 a11 t1]
    system = np.zeros((6, 6))
    rhs = np.zeros(6)
    for i, (s, d) in enumerate(zip(src, dst)):
        system[2 * i, 0:2] = s
        system[2 * i, 2] = 1.0
        system[2 * i + 1, 3:5] = s
        system[2 * i + 1, 5] = 1.0
        rhs[2 * i] = d[0]
        rhs[2 * i + 1] = d[1]
    sol = np.linalg.solve(system, rhs)
    return AffineTransform(np.array([[sol[0], sol[1], sol[2]], [sol[3], sol[4], sol[5]]]))


def _source_coordinates(shape, transform: AffineTransform):
    h, w = shape
    inv = transform.inverse()
    rows, cols = np.mgrid[0:h, 0:w]
    pts = np.stack([rows.ravel(), cols.ravel()], axis=1).astype(np.float64)
    src = inv.apply(pts)
    return src[:, 0].reshape(h, w), src[:, 1].reshape(h, w)


def warp_values(
    values: np.ndarray,
    valid: np.ndarray,
    transform: AffineTransform,
) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear inverse-mapped resample with invalid propagation."""
    h, w = values.shape
    src_r, src_c = _source_coordinates(values.shape, transform)

    r0 = np.floor(src_r).astype(np.int64)
    c0 = np.floor(src_c).astype(np.int64)
    fr = src_r - r0
    fc = src_c - c0

    out = np.zeros(values.shape, dtype=np.float64)
    out_valid = np.ones(values.shape, dtype=bool)
    # a corner only participates when its bilinear weight is material, so
    # (near-)exact-on-grid samples stay exact and do not touch
    # out-of-range or invalid neighbors
    for dr, dc, weight in (
        (0, 0, (1.0 - fr) * (1.0 - fc)),
        (0, 1, (1.0 - fr) * fc),
        (1, 0, fr * (1.0 - fc)),
        (1, 1, fr * fc),
    ):
        used = weight > 1e-12
        rr = r0 + dr
        cc = c0 + dc
        inside = (rr >= 0) & (rr < h) & (cc >= 0) & (cc < w)
        rr = np.clip(rr, 0, h - 1)
        cc = np.clip(cc, 0, w - 1)
        ok = ~used | (inside & valid[rr, cc])
        out_valid &= ok
        contrib = np.where(used & inside & valid[rr, cc], values[rr, cc], 0.0)
        out += weight * contrib
    out = np.where(out_valid, out, np.nan)
    return out, out_valid


def warp_mask_values(mask: np.ndarray, transform: AffineTransform) -> np.ndarray:
    """Nearest-neighbor inverse-mapped resample of a boolean grid."""
    h, w = mask.shape
    src_r, src_c = _source_coordinates(mask.shape, transform)
    rn = np.round(src_r).astype(np.int64)
    cn = np.round(src_c).astype(np.int64)
    inside = (rn >= 0) & (rn < h) & (cn >= 0) & (cn < w)
    out = np.zeros_like(mask, dtype=bool)
    out[inside] = mask[np.clip(rn, 0, h - 1), np.clip(cn, 0, w - 1)][inside]
    return out


def warp_map(tmap: TemperatureMap, transform: AffineTransform) -> TemperatureMap:
    temps, valid = warp_values(tmap.temps, tmap.valid, transform)
    return TemperatureMap(
        temps=temps, valid=valid, view=tmap.view, source_frame=tmap.source_frame
    )


def warp_mask(mask: FootMask, transform: AffineTransform) -> FootMask:
    return FootMask(
        warp_mask_values(mask.mask, transform), provenance=mask.provenance
    )


def align_pair(
    ref_map: TemperatureMap,
    ref_mask: FootMask,
    ref_landmarks: LandmarkSet,
    mov_map: TemperatureMap,
    mov_mask: FootMask,
    mov_landmarks: LandmarkSet,
) -> AlignedPair:
    """Warp the moving foot onto the reference foot.

    The affine comes from the anatomical correspondences toe tip, medial
    metatarsal head and heel center; matching medial to medial across a
    left/right pair forces the mirror into the transform (determinant
    below zero) without any explicit pre-flip.
    """
    if ref_landmarks.foot == mov_landmarks.foot:
        raise PreconditionError(
            f"feet must be contralateral, both landmark sets say {ref_landmarks.foot!r}"
        )
    ref_landmarks.validate_bounds(*ref_map.shape)
    mov_landmarks.validate_bounds(*mov_map.shape)

    transform = affine_from_three(
        mov_landmarks.points[[0, 1, 3]], ref_landmarks.points[[0, 1, 3]]
    )

    # keep other-scene pixels out of the moving foot before warping
    masked = TemperatureMap(
        temps=np.where(mov_mask.mask, mov_map.temps, np.nan),
        valid=mov_map.valid & mov_mask.mask,
        view=mov_map.view,
        source_frame=mov_map.source_frame,
    )
    warped_map = warp_map(masked, transform)
    warped_mask = warp_mask(mov_mask, transform)
    overlap = ref_mask.mask & warped_mask.mask
    return AlignedPair(
        reference_map=ref_map,
        reference_mask=ref_mask,
        moving_map=warped_map,
        moving_mask=warped_mask,
        overlap_mask=overlap,
        transform=transform,
    )
