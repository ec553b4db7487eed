"""Foot/background separation with GrabCut.

The solver alternates three exact steps on a single-channel intensity
image: per-class Gaussian-mixture component assignment, maximum-likelihood
refit, and a minimum s-t cut on the 8-connected pixel grid. Each step can
only lower the labeling energy, so the total energy is non-increasing
across iterations; tests assert this on every run.

User constraints enter through a trimap: pixels outside the initial
rectangle start as definite background, scribbles pin pixels to a definite
label, and definite labels are never overwritten by the solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import (
    ConstantImage,
    EmptyForeground,
    FeetNotSeparable,
    InvalidRect,
    ParseError,
    PreconditionError,
)
from .maxflow import solve_max_flow
from .radiometry import TemperatureMap

VARIANCE_FLOOR = 1e-4
DEFAULT_COMPONENTS = 5
DEFAULT_GAMMA = 50.0
DEFAULT_ITERATIONS = 5
MIN_FOOT_AREA_PX = 100

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class TrimapLabel(IntEnum):
    DEFINITE_BACKGROUND = 0
    DEFINITE_FOREGROUND = 1
    PROBABLE_BACKGROUND = 2
    PROBABLE_FOREGROUND = 3


DEFINITE_LABELS = (TrimapLabel.DEFINITE_BACKGROUND, TrimapLabel.DEFINITE_FOREGROUND)


@dataclass(frozen=True)
class Rect:
    """Half-open pixel rectangle [row0, row1) x [col0, col1)."""

    row0: int
    col0: int
    row1: int
    col1: int

    @property
    def area(self) -> int:
        return max(0, self.row1 - self.row0) * max(0, self.col1 - self.col0)

    def validate(self, height: int, width: int) -> None:
        if not (0 < self.row0 < self.row1 < height and 0 < self.col0 < self.col1 < width):
            raise InvalidRect(
                f"rectangle {self} must lie strictly inside a {height}x{width} image"
            )
        if self.area < 64:
            raise InvalidRect(f"rectangle area {self.area} px is below the 64 px minimum")


@dataclass
class FootMask:
    """Binary segmentation result with its provenance."""

    mask: np.ndarray
    provenance: str = "automatic"  # "automatic" | "user_corrected"

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.ndim != 2:
            raise PreconditionError("mask must be 2-D")
        if self.provenance not in ("automatic", "user_corrected"):
            raise PreconditionError(f"unknown provenance {self.provenance!r}")

    @property
    def area(self) -> int:
        return int(self.mask.sum())


@dataclass
class NormalizedImage:
    """Intensity rescale of a temperature map, [0, 255]."""

    intensities: np.ndarray
    forced_background: np.ndarray  # invalid source pixels, pinned to background


def normalize_for_segmentation(tmap: TemperatureMap) -> NormalizedImage:
    """Affine rescale of the valid temperatures onto [0, 255].

    Invalid pixels map to 0 and are flagged for definite-background
    pinning so they cannot claim foreground.
    """
    vals = tmap.temps[tmap.valid]
    if vals.size == 0 or np.unique(vals).size < 2:
        raise ConstantImage("temperature map needs >= 2 distinct finite values")
    lo = float(vals.min())
    hi = float(vals.max())
    intensities = np.zeros(tmap.shape, dtype=np.float64)
    intensities[tmap.valid] = (tmap.temps[tmap.valid] - lo) * (255.0 / (hi - lo))
    return NormalizedImage(intensities=intensities, forced_background=~tmap.valid)


class GaussianMixture1D:
    """Weighted single-variable Gaussian mixture with hard assignments."""

    def __init__(self, weights, means, variances):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.means = np.asarray(means, dtype=np.float64)
        self.variances = np.maximum(np.asarray(variances, dtype=np.float64), VARIANCE_FLOOR)

    @staticmethod
    def from_quantiles(values: np.ndarray, n_components: int) -> "GaussianMixture1D":
        """Deterministic init: sort and split into equal-count bins."""
        values = np.sort(np.asarray(values, dtype=np.float64))
        if values.size == 0:
            raise PreconditionError("cannot initialize a mixture from zero samples")
        weights = np.zeros(n_components)
        means = np.zeros(n_components)
        variances = np.full(n_components, VARIANCE_FLOOR)
        for k, chunk in enumerate(np.array_split(values, n_components)):
            if chunk.size == 0:
                continue
            weights[k] = chunk.size / values.size
            means[k] = chunk.mean()
            variances[k] = max(chunk.var(), VARIANCE_FLOOR)
        return GaussianMixture1D(weights, means, variances)

    def component_costs(self, values: np.ndarray) -> np.ndarray:
        """Negative log of weight * normal density, shape (K, N)."""
        values = np.asarray(values, dtype=np.float64)
        costs = np.full((self.weights.size, values.size), np.inf)
        for k in range(self.weights.size):
            if self.weights[k] <= 0.0:
                continue
            var = self.variances[k]
            costs[k] = (
                -np.log(self.weights[k])
                + 0.5 * np.log(2.0 * np.pi * var)
                + (values - self.means[k]) ** 2 / (2.0 * var)
            )
        return costs

    def assign(self, values: np.ndarray) -> np.ndarray:
        return np.argmin(self.component_costs(values), axis=0)

    def best_costs(self, values: np.ndarray) -> np.ndarray:
        return np.min(self.component_costs(values), axis=0)

    def refit(self, values: np.ndarray, assignment: np.ndarray) -> "GaussianMixture1D":
        """Exact ML refit per component; empty components get weight 0."""
        n = self.weights.size
        weights = np.zeros(n)
        means = self.means.copy()
        variances = self.variances.copy()
        for k in range(n):
            members = values[assignment == k]
            if members.size == 0:
                continue
            weights[k] = members.size / values.size
            means[k] = members.mean()
            variances[k] = max(members.var(), VARIANCE_FLOOR)
        return GaussianMixture1D(weights, means, variances)


@dataclass
class GrabCutResult:
    mask: FootMask
    trimap: np.ndarray
    energies: list[float] = field(default_factory=list)


def _pairwise_links(image: np.ndarray, gamma: float):
    """8-neighborhood contrast weights: gamma * exp(-beta dI^2) / dist."""
    h, w = image.shape
    idx = np.arange(h * w).reshape(h, w)
    offsets = [
        ((slice(None), slice(1, None)), (slice(None), slice(None, -1)), 1.0),
        ((slice(1, None), slice(None)), (slice(None, -1), slice(None)), 1.0),
        ((slice(1, None), slice(1, None)), (slice(None, -1), slice(None, -1)), np.sqrt(2.0)),
        ((slice(1, None), slice(None, -1)), (slice(None, -1), slice(1, None)), np.sqrt(2.0)),
    ]
    sq_diffs = [
        (image[a] - image[b]) ** 2 for a, b, _ in offsets
    ]
    total = sum(float(d.sum()) for d in sq_diffs)
    count = sum(d.size for d in sq_diffs)
    mean_sq = total / count if count else 0.0
    beta = 1.0 / (2.0 * mean_sq) if mean_sq > 0 else 0.0

    tails, heads, caps = [], [], []
    for (a, b, dist), d2 in zip(offsets, sq_diffs):
        tails.append(idx[a].ravel())
        heads.append(idx[b].ravel())
        caps.append((gamma / dist) * np.exp(-beta * d2).ravel())
    return (
        np.concatenate(tails),
        np.concatenate(heads),
        np.concatenate(caps),
    )


def _initial_trimap(shape, rect, scribbles, forced_background):
    h, w = shape
    trimap = np.full(shape, TrimapLabel.DEFINITE_BACKGROUND, dtype=np.uint8)
    trimap[rect.row0 : rect.row1, rect.col0 : rect.col1] = TrimapLabel.PROBABLE_FOREGROUND
    if forced_background is not None:
        forced_background = np.asarray(forced_background, dtype=bool)
        if forced_background.shape != shape:
            raise PreconditionError("forced_background shape mismatch")
        trimap[forced_background] = TrimapLabel.DEFINITE_BACKGROUND
    for row, col, label in scribbles or []:
        label = TrimapLabel(label)
        if label not in DEFINITE_LABELS:
            raise PreconditionError("scribbles must carry definite labels")
        if not (0 <= row < h and 0 <= col < w):
            raise PreconditionError(f"scribble ({row}, {col}) outside image")
        trimap[row, col] = label
    return trimap


def _labeling_energy(fg, costs_fg, costs_bg, n_tails, n_heads, n_caps):
    flat = fg.ravel()
    data = float(np.where(flat, costs_fg, costs_bg).sum())
    smooth = float(n_caps[flat[n_tails] != flat[n_heads]].sum())
    return data + smooth


def run_grabcut(
    image: np.ndarray,
    init_rect: Rect,
    scribbles=None,
    iterations: int = DEFAULT_ITERATIONS,
    forced_background: np.ndarray | None = None,
    n_components: int = DEFAULT_COMPONENTS,
    gamma: float = DEFAULT_GAMMA,
) -> GrabCutResult:
    """Full GrabCut loop returning the mask, final trimap and per-iteration
    energies (for the monotonicity contract)."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise PreconditionError("grabcut expects a single-channel intensity grid")
    if iterations < 1:
        raise PreconditionError("iterations must be >= 1")
    h, w = image.shape
    init_rect.validate(h, w)

    trimap = _initial_trimap(image.shape, init_rect, scribbles, forced_background)
    values = image.ravel()

    n_tails, n_heads, n_caps = _pairwise_links(image, gamma)
    big = 9.0 * gamma + 1.0  # dominates any sum of incident pairwise weights

    fg = np.isin(trimap, (TrimapLabel.DEFINITE_FOREGROUND, TrimapLabel.PROBABLE_FOREGROUND))
    if not fg.any():
        raise EmptyForeground("no foreground pixels inside the initial rectangle")
    fg_gmm = GaussianMixture1D.from_quantiles(values[fg.ravel()], n_components)
    bg_gmm = GaussianMixture1D.from_quantiles(values[~fg.ravel()], n_components)

    probable = ~np.isin(trimap, DEFINITE_LABELS).ravel()
    def_fg = (trimap == TrimapLabel.DEFINITE_FOREGROUND).ravel()
    def_bg = (trimap == TrimapLabel.DEFINITE_BACKGROUND).ravel()

    n_pixels = h * w
    source, sink = n_pixels, n_pixels + 1
    t_tails = np.concatenate([np.full(n_pixels, source), np.arange(n_pixels)])
    t_heads = np.concatenate([np.arange(n_pixels), np.full(n_pixels, sink)])

    energies: list[float] = []
    for _ in range(iterations):
        flat_fg = fg.ravel()
        fg_vals = values[flat_fg]
        bg_vals = values[~flat_fg]
        fg_gmm = fg_gmm.refit(fg_vals, fg_gmm.assign(fg_vals))
        bg_gmm = bg_gmm.refit(bg_vals, bg_gmm.assign(bg_vals))

        costs_fg = fg_gmm.best_costs(values)
        costs_bg = bg_gmm.best_costs(values)

        # source-side arc is paid when the pixel goes to background and
        # vice versa, so the source link carries the background cost.
        # Costs may be negative (densities above 1); shifting both t-links
        # of a pixel by the same constant leaves the optimal cut unchanged.
        shift = min(0.0, float(min(costs_fg.min(), costs_bg.min())))
        source_caps = np.where(probable, costs_bg - shift, np.where(def_fg, big, 0.0))
        sink_caps = np.where(probable, costs_fg - shift, np.where(def_bg, big, 0.0))

        cut = solve_max_flow(
            n_pixels + 2,
            source,
            sink,
            np.concatenate([n_tails, t_tails]),
            np.concatenate([n_heads, t_heads]),
            np.concatenate([n_caps, np.concatenate([source_caps, sink_caps])]),
            np.concatenate([n_caps, np.zeros(2 * n_pixels)]),
        )
        pixel_side = cut.source_side[:n_pixels]
        trimap_flat = trimap.ravel()
        trimap_flat[probable & pixel_side] = TrimapLabel.PROBABLE_FOREGROUND
        trimap_flat[probable & ~pixel_side] = TrimapLabel.PROBABLE_BACKGROUND

        fg = np.isin(
            trimap, (TrimapLabel.DEFINITE_FOREGROUND, TrimapLabel.PROBABLE_FOREGROUND)
        )
        if not fg.any():
            raise EmptyForeground("solver assigned no foreground pixels")
        energies.append(
            _labeling_energy(fg, costs_fg, costs_bg, n_tails, n_heads, n_caps)
        )

    provenance = "user_corrected" if scribbles else "automatic"
    return GrabCutResult(
        mask=FootMask(mask=fg, provenance=provenance),
        trimap=trimap,
        energies=energies,
    )


def grabcut(
    image: np.ndarray,
    init_rect: Rect,
    scribbles=None,
    iterations: int = DEFAULT_ITERATIONS,
    forced_background: np.ndarray | None = None,
) -> FootMask:
    """Segment foreground from background; see run_grabcut for knobs."""
    return run_grabcut(
        image,
        init_rect,
        scribbles=scribbles,
        iterations=iterations,
        forced_background=forced_background,
    ).mask


def split_feet(
    mask: FootMask, min_foot_area: int = MIN_FOOT_AREA_PX
) -> tuple[FootMask, FootMask]:
    """Separate the two feet: the two largest 8-connected components.

    The component whose centroid sits at the smaller column is the
    subject's right foot (the plantar camera looks up at the soles).
    Returns (left, right).
    """
    labels, n = ndimage.label(mask.mask, structure=EIGHT_CONNECTED)
    if n < 2:
        raise FeetNotSeparable(f"found {n} connected component(s), need 2 feet")
    areas = np.bincount(labels.ravel())[1:]
    qualifying = np.flatnonzero(areas >= min_foot_area) + 1
    if qualifying.size < 2:
        raise FeetNotSeparable(
            f"only {qualifying.size} component(s) reach {min_foot_area} px"
        )
    order = sorted(qualifying, key=lambda lab: (-areas[lab - 1], lab))
    a, b = order[0], order[1]
    col_a = np.nonzero(labels == a)[1].mean()
    col_b = np.nonzero(labels == b)[1].mean()
    right_label, left_label = (a, b) if col_a < col_b else (b, a)
    return (
        FootMask(labels == left_label, provenance=mask.provenance),
        FootMask(labels == right_label, provenance=mask.provenance),
    )


# -- mask persistence ----------------------------------------------------------


def save_mask_png(mask: FootMask, path: str | Path) -> Path:
    from PIL import Image

    path = Path(path)
    Image.fromarray(mask.mask.astype(np.uint8) * 255, mode="L").save(path)
    return path


def load_mask_png(path: str | Path, provenance: str = "automatic") -> FootMask:
    from PIL import Image

    arr = np.asarray(Image.open(Path(path)).convert("L"))
    return FootMask(arr >= 128, provenance=provenance)


def mask_to_rle(mask: FootMask) -> str:
    """Row-major run-length encoding: header then run lengths."""
    flat = mask.mask.ravel()
    h, w = mask.mask.shape
    first = int(flat[0]) if flat.size else 0
    boundaries = np.flatnonzero(np.diff(flat.astype(np.int8)))
    edges = np.concatenate([[-1], boundaries, [flat.size - 1]])
    runs = np.diff(edges)
    header = f"rle 1 {h} {w} {first}"
    return header + "\n" + " ".join(str(int(r)) for r in runs) + "\n"


def rle_to_mask(text: str, provenance: str = "automatic") -> FootMask:
    lines = text.strip().splitlines()
    if not lines:
        raise ParseError("empty RLE document")
    head = lines[0].split()
    if len(head) != 5 or head[0] != "rle" or head[1] != "1":
        raise ParseError(f"bad RLE header: {lines[0]!r}")
    h, w, first = int(head[2]), int(head[3]), int(head[4])
    runs = [int(tok) for tok in " ".join(lines[1:]).split()]
    flat = np.empty(h * w, dtype=bool)
    pos = 0
    value = bool(first)
    for run in runs:
        flat[pos : pos + run] = value
        pos += run
        value = not value
    if pos != h * w:
        raise ParseError(f"RLE runs cover {pos} px, expected {h * w}")
    return FootMask(flat.reshape(h, w), provenance=provenance)
