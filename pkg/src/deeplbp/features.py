"""Histogram summaries of code images and PCA on the resulting descriptors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .encoding import CodeImage, num_uniform_patterns, rotation_invariant_table, uniform_table

CODE_MAPS = ("raw", "rotation-invariant", "uniform")


@dataclass(frozen=True)
class FeatureVector:
    """Feature values plus a layout: ``(block name, length)`` pairs in order."""

    values: np.ndarray
    layout: tuple[tuple[str, int], ...] = field(default=())

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        layout = tuple((str(k), int(v)) for k, v in self.layout) or (("features", values.size),)
        if sum(length for _, length in layout) != values.size:
            raise ValueError("layout lengths do not sum to the vector length")
        object.__setattr__(self, "layout", layout)

    def __len__(self):
        return self.values.size

    def blocks(self) -> list[tuple[str, np.ndarray]]:
        out, start = [], 0
        for name, length in self.layout:
            out.append((name, self.values[start:start + length]))
            start += length
        return out

    def column_names(self) -> list[str]:
        return [f"{name}_b{i}" for name, length in self.layout for i in range(length)]

    @staticmethod
    def concat(parts, prefix: str = "") -> "FeatureVector":
        values = np.concatenate([p.values for p in parts]) if parts else np.zeros(0)
        layout = tuple((prefix + name, length) for p in parts for name, length in p.layout)
        return FeatureVector(values, layout)


def map_size(n: int, code_map: str) -> int:
    """Number of histogram bins for an ``n``-bit code space under ``code_map``."""
    if code_map == "raw":
        return 1 << n
    if code_map == "rotation-invariant":
        return len(np.unique(rotation_invariant_table(n)))
    if code_map == "uniform":
        return num_uniform_patterns(n) + 1
    raise ValueError(f"unknown code map {code_map!r}; choose from {CODE_MAPS}")


def map_codes(codes: np.ndarray, n: int, code_map: str) -> np.ndarray:
    """Histogram bin index of each code."""
    if code_map == "raw":
        return codes
    if code_map == "rotation-invariant":
        table = rotation_invariant_table(n)
        # compact the min-rotation representatives onto 0..k-1
        bins = np.searchsorted(np.unique(table), table)
        return bins[codes]
    if code_map == "uniform":
        return uniform_table(n)[codes]
    raise ValueError(f"unknown code map {code_map!r}; choose from {CODE_MAPS}")


def _l1_histogram(bins: np.ndarray, size: int) -> np.ndarray:
    if bins.size == 0:
        raise ValueError("cannot build a histogram of an empty region")
    counts = np.bincount(bins.ravel(), minlength=size).astype(np.float64)
    return counts / counts.sum()


def histogram(codes: CodeImage, code_map: str = "raw") -> np.ndarray:
    n = codes.spec.n
    return _l1_histogram(map_codes(codes.codes, n, code_map), map_size(n, code_map))


def multiblock_histogram(codes: CodeImage, code_map: str = "raw",
                         grid: tuple[int, int] = (2, 2)) -> FeatureVector:
    """Per-block normalised histograms, blocks in row-major order.

    Leftover rows and columns go to the last block row / column.
    """
    rows, cols = grid
    h, w = codes.codes.shape
    if rows < 1 or cols < 1 or rows > h or cols > w:
        raise ValueError(f"grid {grid} does not fit a {h}x{w} code image")
    n = codes.spec.n
    size = map_size(n, code_map)
    mapped = map_codes(codes.codes, n, code_map)
    r_edges = [i * (h // rows) for i in range(rows)] + [h]
    c_edges = [j * (w // cols) for j in range(cols)] + [w]
    parts, layout = [], []
    for i in range(rows):
        for j in range(cols):
            block = mapped[r_edges[i]:r_edges[i + 1], c_edges[j]:c_edges[j + 1]]
            parts.append(_l1_histogram(block, size))
            layout.append((f"block{i}_{j}", size))
    return FeatureVector(np.concatenate(parts), tuple(layout))


# --- PCA ---------------------------------------------------------------------

def jacobi_eigh(a: np.ndarray, tol: float = 1e-15, max_sweeps: int = 30):
    """Eigen-decomposition of a symmetric matrix by parallel-order Jacobi.

    Each round rotates ``m/2`` disjoint index pairs at once (round-robin
    tournament ordering), so a sweep is ``m - 1`` vectorised rounds. The
    working matrix is kept permuted so the pairs of a round are always
    ``(j, m/2 + j)``. Returns eigenvalues in descending order and
    eigenvectors as columns.
    """
    a = np.array(a, dtype=np.float64)
    m0 = a.shape[0]
    if a.shape != (m0, m0):
        raise ValueError("jacobi_eigh needs a square matrix")
    m = m0 + (m0 % 2)
    if m != m0:
        a = np.pad(a, ((0, 1), (0, 1)))
    h = m // 2
    v = np.eye(m)
    scale = np.linalg.norm(a)
    # circle-method step: fix position 0, rotate the rest of the ring
    ring = np.concatenate([np.arange(h), np.arange(m - 1, h - 1, -1)])
    step = np.concatenate([ring[:1], ring[-1:], ring[1:-1]])
    nxt = np.empty(m, dtype=np.int64)
    nxt[np.concatenate([np.arange(h), np.arange(m - 1, h - 1, -1)])] = step
    previous = np.inf
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        # stop at convergence or once round-off stalls progress
        if scale == 0.0 or off <= tol * scale or off >= previous:
            break
        previous = off
        for _round in range(m - 1):
            diag = np.diag(a)
            app, aqq = diag[:h], diag[h:]
            apq = np.diagonal(a[:h, h:]).copy()
            active = np.abs(apq) > 1e-18 * scale
            theta = np.where(active, (aqq - app) / (2.0 * np.where(active, apq, 1.0)), 0.0)
            t = np.where(active, np.sign(theta) / (np.abs(theta) + np.hypot(theta, 1.0)), 0.0)
            t = np.where(active & (theta == 0.0), 1.0, t)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            # A <- J^T A J with J[p,p]=J[q,q]=c, J[p,q]=s, J[q,p]=-s
            ap, aq = a[:, :h].copy(), a[:, h:].copy()
            a[:, :h] = c * ap - s * aq
            a[:, h:] = s * ap + c * aq
            ap, aq = a[:h].copy(), a[h:].copy()
            a[:h] = c[:, None] * ap - s[:, None] * aq
            a[h:] = s[:, None] * ap + c[:, None] * aq
            vp, vq = v[:, :h].copy(), v[:, h:].copy()
            v[:, :h] = c * vp - s * vq
            v[:, h:] = s * vp + c * vq
            a = a[np.ix_(nxt, nxt)]
            v = v[:, nxt]
    w = np.diag(a).copy()
    if m != m0:
        # drop the padding direction: the eigenvector living on the extra coordinate
        pad = int(np.argmax(np.abs(v[m0, :])))
        keep = np.arange(m) != pad
        w, v = w[keep], v[:m0, keep]
    rank = np.argsort(-w, kind="stable")
    return w[rank], v[:, rank]


@dataclass(frozen=True)
class PcaTransform:
    mean: np.ndarray
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance_ratio: np.ndarray  # all components, descending

    @property
    def k(self) -> int:
        return self.components.shape[0]


def _fix_signs(components: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(len(components)), idx])
    signs[signs == 0] = 1.0
    return components * signs[:, None]


def pca_fit(x: np.ndarray, retain: float = 0.95) -> PcaTransform:
    """Fit PCA keeping the fewest components whose cumulative explained variance reaches ``retain``.

    Works on the covariance matrix, or on the Gram matrix when there are
    fewer samples than dimensions.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("pca_fit needs a 2-D matrix with at least 2 samples")
    if not 0 < retain <= 1:
        raise ValueError(f"retain must lie in (0, 1], got {retain}")
    n, d = x.shape
    mean = x.mean(axis=0)
    xc = x - mean
    if n < d:
        w, u = jacobi_eigh(xc @ xc.T / (n - 1))
        w = np.clip(w, 0.0, None)
        keep = w > 0
        vecs = np.zeros((d, n))
        vecs[:, keep] = (xc.T @ u[:, keep]) / np.sqrt(w[keep] * (n - 1))
    else:
        w, vecs = jacobi_eigh(xc.T @ xc / (n - 1))
        w = np.clip(w, 0.0, None)
    total = w.sum()
    if not total > 0 or w[0] <= 1e-12 * max(1.0, float(np.abs(xc).max()) ** 2):
        raise ValueError("data has rank 0 after centring")
    # eigenvalues at round-off level count as zero
    w = np.where(w > w[0] * 1e-12, w, 0.0)
    ratio = w / w.sum()
    cum = np.cumsum(ratio)
    k = int(np.searchsorted(cum, retain - 1e-12) + 1)
    k = min(k, int(np.count_nonzero(w)))
    components = _fix_signs(vecs[:, :k].T.copy())
    return PcaTransform(mean, components, ratio)


def pca_apply(t: PcaTransform, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != t.mean.shape[0]:
        raise ValueError(f"expected dimension {t.mean.shape[0]}, got {x.shape[-1]}")
    return (x - t.mean) @ t.components.T
