"""Local binary pattern encoders.

Images are 2-D float arrays indexed ``[row, col]`` with rows growing
downwards. Sampling angle ``i * 360 / n`` starts at the neighbour straight
above the centre and proceeds clockwise; bit ``i`` of a code holds the
comparison against that neighbour.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

METRICS = ("euclidean-circle", "manhattan-square")
SAMPLINGS = ("bilinear", "nearest")

# offsets closer than this to an integer are snapped onto the lattice
_SNAP = 1e-9


@dataclass(frozen=True)
class NeighborhoodSpec:
    """Sampling geometry: ``n`` points on a ring of radius ``radius``."""

    n: int = 8
    radius: float = 3.0
    metric: str = "euclidean-circle"
    sampling: str = "bilinear"

    def __post_init__(self):
        if not 2 <= self.n <= 16:
            raise ValueError(f"n must lie in [2, 16], got {self.n}")
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.sampling not in SAMPLINGS:
            raise ValueError(f"unknown sampling {self.sampling!r}")

    @property
    def margin(self) -> int:
        """Pixels cropped from each side of the input."""
        return math.ceil(self.radius)

    @property
    def num_codes(self) -> int:
        return 1 << self.n

    def offsets(self) -> np.ndarray:
        """(n, 2) array of ``(drow, dcol)`` sampling offsets."""
        theta = 2.0 * np.pi * np.arange(self.n) / self.n
        sin, cos = np.sin(theta), np.cos(theta)
        if self.metric == "manhattan-square":
            sin = _round_half_away(np.round(sin, 12))
            cos = _round_half_away(np.round(cos, 12))
        off = np.stack([-self.radius * cos, self.radius * sin], axis=1)
        near = np.abs(off - np.round(off)) < _SNAP
        off[near] = np.round(off[near])
        return off + 0.0  # drop negative zeros

    def to_dict(self) -> dict:
        return {"n": self.n, "radius": self.radius,
                "metric": self.metric, "sampling": self.sampling}

    @classmethod
    def from_dict(cls, d: dict) -> "NeighborhoodSpec":
        unknown = set(d) - {"n", "radius", "metric", "sampling"}
        if unknown:
            raise ValueError(f"unknown neighborhood keys: {sorted(unknown)}")
        return cls(n=int(d.get("n", 8)), radius=float(d.get("radius", 3.0)),
                   metric=d.get("metric", "euclidean-circle"),
                   sampling=d.get("sampling", "bilinear"))


@dataclass(frozen=True)
class CodeImage:
    """Per-pixel codes over the valid region of the layer's input."""

    codes: np.ndarray
    spec: NeighborhoodSpec
    layer: int = 1

    @property
    def height(self) -> int:
        return self.codes.shape[0]

    @property
    def width(self) -> int:
        return self.codes.shape[1]


def _round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def as_gray(img) -> np.ndarray:
    """Promote an image to a finite 2-D float64 array."""
    a = np.asarray(img, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D image, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("image contains non-finite values")
    return a


def binarize(x_ref: float, x_i: float) -> int:
    return int(x_ref < x_i)


def _check_size(shape, spec: NeighborhoodSpec):
    side = 2 * spec.margin + 1
    if shape[0] < side or shape[1] < side:
        raise ValueError(
            f"image of shape {tuple(shape)} is too small for radius "
            f"{spec.radius}: need at least {side}x{side}")


def _shifted(img: np.ndarray, m: int, drow: int, dcol: int) -> np.ndarray:
    h, w = img.shape
    return img[m + drow:h - m + drow, m + dcol:w - m + dcol]


def _neighbor_deltas(img: np.ndarray, spec: NeighborhoodSpec):
    """Yield ``sample - centre`` over the valid region for each neighbour.

    Bilinear terms are written as differences so a locally constant patch
    yields exactly zero, whatever the weights.
    """
    m = spec.margin
    centre = _shifted(img, m, 0, 0)
    for drow, dcol in spec.offsets():
        if spec.sampling == "nearest":
            r, c = int(_round_half_away(drow)), int(_round_half_away(dcol))
            yield _shifted(img, m, r, c) - centre
            continue
        r0, c0 = math.floor(drow), math.floor(dcol)
        ty, tx = drow - r0, dcol - c0
        p00 = _shifted(img, m, r0, c0)
        delta = p00 - centre
        if tx:
            p01 = _shifted(img, m, r0, c0 + 1)
            delta = delta + tx * (p01 - p00)
        if ty:
            p10 = _shifted(img, m, r0 + 1, c0)
            delta = delta + ty * (p10 - p00)
        if tx and ty:
            p11 = _shifted(img, m, r0 + 1, c0 + 1)
            delta = delta + (tx * ty) * (p11 - p10 - p01 + p00)
        yield delta


def sample_neighbors(img, spec: NeighborhoodSpec, x: int, y: int) -> np.ndarray:
    """Intensities at the ``n`` sampling positions around column x, row y."""
    img = as_gray(img)
    m = spec.margin
    h, w = img.shape
    if not (m <= y < h - m and m <= x < w - m):
        raise ValueError(f"pixel ({x}, {y}) lies outside the valid region")
    patch = img[y - m:y + m + 1, x - m:x + m + 1]
    return np.array([d[0, 0] for d in _neighbor_deltas(patch, spec)]) + img[y, x]


def lbp_encode(img, spec: NeighborhoodSpec) -> CodeImage:
    """Classical LBP codes over the valid region of ``img``."""
    img = as_gray(img)
    _check_size(img.shape, spec)
    codes = None
    for i, delta in enumerate(_neighbor_deltas(img, spec)):
        bit = (delta > 0).astype(np.int32) << i
        codes = bit if codes is None else codes | bit
    return CodeImage(codes, spec, layer=1)


def encode_with_ordering(codes: CodeImage, ordering, spec: NeighborhoodSpec | None = None) -> CodeImage:
    """Next-layer LBP comparing code ranks under ``ordering``.

    Neighbours are always taken at rounded positions: ranks are ordinal and
    are never interpolated.
    """
    spec = codes.spec if spec is None else spec
    ranks = np.asarray(ordering.ranks)
    if ranks.shape[0] != codes.spec.num_codes:
        raise ValueError(
            f"ordering covers {ranks.shape[0]} codes but the input code space "
            f"has {codes.spec.num_codes}")
    _check_size(codes.codes.shape, spec)
    rank_img = ranks[codes.codes]
    m = spec.margin
    centre = _shifted(rank_img, m, 0, 0)
    out = np.zeros(centre.shape, dtype=np.int32)
    for i, (drow, dcol) in enumerate(spec.offsets()):
        r, c = int(_round_half_away(drow)), int(_round_half_away(dcol))
        out |= (_shifted(rank_img, m, r, c) > centre).astype(np.int32) << i
    return CodeImage(out, spec, layer=codes.layer + 1)


def ror(c: int, s: int, n: int) -> int:
    """Rotate the low ``n`` bits of ``c`` right by ``s``."""
    s %= n
    mask = (1 << n) - 1
    return ((c >> s) | (c << (n - s))) & mask


def rotation_invariant_map(c: int, n: int) -> int:
    return min(ror(c, s, n) for s in range(n))


def transitions(c: int, n: int) -> int:
    """Number of circular 0/1 changes between adjacent bits."""
    return bin(c ^ ror(c, 1, n)).count("1")


def uniform_map(c: int, n: int) -> int:
    return int(uniform_table(n)[c])


def num_uniform_patterns(n: int) -> int:
    return n * (n - 1) + 2


@lru_cache(maxsize=None)
def rotation_invariant_table(n: int) -> np.ndarray:
    table = np.array([rotation_invariant_map(c, n) for c in range(1 << n)], dtype=np.int32)
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def uniform_table(n: int) -> np.ndarray:
    """Label per code: uniform codes numbered in code order, others share the last label."""
    catch_all = num_uniform_patterns(n)
    table = np.full(1 << n, catch_all, dtype=np.int32)
    label = 0
    for c in range(1 << n):
        if transitions(c, n) <= 2:
            table[c] = label
            label += 1
    assert label == catch_all
    table.setflags(write=False)
    return table


def ltp_encode(img, spec: NeighborhoodSpec, tolerance: float) -> np.ndarray:
    """Local ternary pattern: (h, w, n) array of -1/0/+1 per neighbour."""
    if tolerance < 0:
        raise ValueError(f"tolerance must be non-negative, got {tolerance}")
    img = as_gray(img)
    _check_size(img.shape, spec)
    planes = []
    for delta in _neighbor_deltas(img, spec):
        planes.append(np.where(delta > tolerance, 1, np.where(delta < -tolerance, -1, 0)))
    return np.stack(planes, axis=-1).astype(np.int8)
