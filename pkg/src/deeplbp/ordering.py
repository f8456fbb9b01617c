"""Learned orderings over LBP codes.

An :class:`Ordering` assigns every code of an ``n``-bit code space a dense
integer rank. Deeper LBP layers compare ranks instead of intensities, so the
ordering plays the role of the binarization function for those layers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .encoding import ror, transitions as transitions_of

FEATURE_NAMES = (
    "length1-runs",
    "transitions",
    "smallest-run",
    "largest-run",
    "run-diversity",
    "ones",
    "imbalance",
)

POWER_ITERATIONS = 1000
POWER_TOL = 1e-12
TIE_TOL = 1e-9


@dataclass(frozen=True)
class Ordering:
    ranks: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        ranks = np.asarray(self.ranks, dtype=np.int64)
        size = ranks.shape[0] if ranks.ndim == 1 else 0
        if size < 1 or size & (size - 1):
            raise ValueError("ordering must rank a power-of-two number of codes")
        present = np.unique(ranks)
        if present[0] != 0 or present[-1] != len(present) - 1:
            raise ValueError("ranks must be dense: 0..num_classes-1 all used")
        ranks.setflags(write=False)
        object.__setattr__(self, "ranks", ranks)

    @property
    def num_codes(self) -> int:
        return self.ranks.shape[0]

    @property
    def n(self) -> int:
        return self.num_codes.bit_length() - 1

    @property
    def num_classes(self) -> int:
        return int(self.ranks.max()) + 1

    def to_dict(self) -> dict:
        return {"n": self.n, "ranks": [int(r) for r in self.ranks],
                "provenance": self.provenance}

    @classmethod
    def from_dict(cls, d: dict) -> "Ordering":
        unknown = set(d) - {"n", "ranks", "provenance"}
        if unknown:
            raise ValueError(f"unknown ordering keys: {sorted(unknown)}")
        ordering = cls(np.asarray(d["ranks"]), d.get("provenance", ""))
        if ordering.n != int(d["n"]):
            raise ValueError(f"ordering declares n={d['n']} but has {ordering.num_codes} ranks")
        return ordering

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str) -> "Ordering":
        return cls.from_dict(json.loads(text))


def identity_ordering(n: int) -> Ordering:
    return Ordering(np.arange(1 << n), "identity")


def dense_ranks(keys: np.ndarray) -> np.ndarray:
    """Dense ranks of the rows of a 2-D integer key matrix, compared lexicographically."""
    keys = np.asarray(keys)
    if keys.shape[1] == 0:
        return np.zeros(keys.shape[0], dtype=np.int64)
    _, inverse = np.unique(keys, axis=0, return_inverse=True)
    return inverse.reshape(-1).astype(np.int64)


# --- dissimilarity route -----------------------------------------------------

def _popcount(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    count = np.zeros_like(x)
    while np.any(x):
        count += x & 1
        x = x >> 1
    return count


def hamming(c1: int, c2: int) -> int:
    return bin(c1 ^ c2).count("1")


def ri_hamming(c1: int, c2: int, n: int) -> int:
    return min(hamming(ror(c1, s, n), c2) for s in range(n))


def hamming_matrix(n: int) -> np.ndarray:
    codes = np.arange(1 << n)
    return _popcount(codes[:, None] ^ codes[None, :]).astype(np.float64)


def ri_hamming_matrix(n: int) -> np.ndarray:
    codes = np.arange(1 << n)
    mask = (1 << n) - 1
    best = None
    for s in range(n):
        rotated = ((codes >> s) | (codes << (n - s))) & mask
        d = _popcount(rotated[:, None] ^ codes[None, :])
        best = d if best is None else np.minimum(best, d)
    return best.astype(np.float64)


def _power_iteration(m: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, float]:
    v = v - v.mean()
    v /= np.linalg.norm(v)
    for _ in range(POWER_ITERATIONS):
        w = m @ v
        w -= w.mean()
        norm = np.linalg.norm(w)
        if norm == 0.0:
            break
        w /= norm
        done = np.linalg.norm(w - v) < POWER_TOL
        v = w
        if done:
            break
    return v, float(v @ (m @ v))


def mds_coordinate(d: np.ndarray) -> np.ndarray:
    """First classical-MDS principal coordinate of a dissimilarity matrix.

    Power iteration runs on the double-centred Gram matrix shifted by its
    Gershgorin bound so the largest eigenvalue is also the dominant one. The
    iteration starts from the centred popcount of the code index; a second
    deterministic generic start is used only if it reaches a strictly larger
    eigenvalue. Sign is fixed by a non-negative correlation with popcount.
    """
    d = np.asarray(d, dtype=np.float64)
    size = d.shape[0]
    d2 = d * d
    b = -0.5 * (d2 - d2.mean(axis=0)[None, :] - d2.mean(axis=1)[:, None] + d2.mean())
    if size < 2 or not np.any(np.abs(b) > 0):
        return np.zeros(size)
    shift = float(np.abs(b).sum(axis=1).max())
    m = b + shift * np.eye(size)

    pop = _popcount(np.arange(size)).astype(np.float64)
    starts = []
    if np.ptp(pop) > 0:
        starts.append(pop)
    rng = np.random.default_rng(0)
    starts.append(rng.standard_normal(size) + (pop - pop.mean()))

    best, best_val = None, -np.inf
    for start in starts:
        v, val = _power_iteration(m, start)
        if best is None or val > best_val * (1 + TIE_TOL) + POWER_TOL:
            best, best_val = v, val

    corr = float((best - best.mean()) @ (pop - pop.mean()))
    if abs(corr) > POWER_TOL:
        sign = 1.0 if corr > 0 else -1.0
    else:
        sign = 1.0 if best[np.argmax(np.abs(best))] > 0 else -1.0
    return sign * best


def ranks_from_scalar(x: np.ndarray, tol: float = TIE_TOL) -> np.ndarray:
    """Dense ranks of ``x`` after unit-normalisation, merging gaps ``<= tol``."""
    x = np.asarray(x, dtype=np.float64)
    norm = np.linalg.norm(x)
    if norm > 0:
        x = x / norm
    order = np.argsort(x, kind="stable")
    gaps = np.diff(x[order]) > tol
    ranks = np.empty(len(x), dtype=np.int64)
    ranks[order] = np.concatenate([[0], np.cumsum(gaps)])
    return ranks


def ordering_from_dissimilarity(d: np.ndarray, provenance: str = "mds") -> Ordering:
    d = np.asarray(d, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("dissimilarity must be a square matrix")
    if not np.allclose(d, d.T) or np.any(np.diag(d) != 0) or np.any(d < 0):
        raise ValueError("dissimilarity must be symmetric, non-negative, zero on the diagonal")
    return Ordering(ranks_from_scalar(mds_coordinate(d)), provenance)


# --- high-dimensional route --------------------------------------------------

@dataclass(frozen=True)
class CodeFeatureTable:
    names: tuple[str, ...]
    values: np.ndarray  # (num_codes, num_features) ints

    @property
    def num_features(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ValueError(f"unknown code feature {name!r}; choose from {self.names}") from None


def circular_runs(c: int, n: int) -> list[int]:
    """Lengths of maximal runs of equal bits, read circularly."""
    if transitions_of(c, n) == 0:
        return [n]
    # rotate so a run starts at bit 0
    start = next(i for i in range(n) if ((c >> i) & 1) != ((c >> ((i - 1) % n)) & 1))
    bits = [(c >> ((start + i) % n)) & 1 for i in range(n)]
    runs, length = [], 1
    for prev, cur in zip(bits, bits[1:]):
        if cur == prev:
            length += 1
        else:
            runs.append(length)
            length = 1
    runs.append(length)
    return runs



@lru_cache(maxsize=None)
def code_features(n: int) -> CodeFeatureTable:
    if not 2 <= n <= 16:
        raise ValueError(f"n must lie in [2, 16], got {n}")
    rows = []
    for c in range(1 << n):
        runs = circular_runs(c, n)
        ones = bin(c).count("1")
        rows.append((
            sum(1 for r in runs if r == 1) if len(runs) > 1 else 0,
            transitions_of(c, n),
            min(runs),
            max(runs),
            len(set(runs)),
            ones,
            abs(2 * ones - n),
        ))
    values = np.array(rows, dtype=np.int64)
    values.setflags(write=False)
    return CodeFeatureTable(FEATURE_NAMES, values)


def lex_rank(a: Sequence, b: Sequence) -> int:
    """Lexicographic comparison: -1 if a precedes b, 1 if it follows, 0 if equal."""
    if len(a) != len(b):
        raise ValueError(f"score sequences differ in length: {len(a)} vs {len(b)}")
    if len(a) == 0:
        return 0
    if a[0] < b[0]:
        return -1
    if a[0] > b[0]:
        return 1
    return lex_rank(a[1:], b[1:])


def _check_arrangement(table: CodeFeatureTable, arrangement: Sequence[int]) -> list[int]:
    arrangement = [int(i) for i in arrangement]
    if len(set(arrangement)) != len(arrangement):
        raise ValueError(f"arrangement repeats a feature: {arrangement}")
    for i in arrangement:
        if not 0 <= i < table.num_features:
            raise ValueError(f"feature index {i} out of range")
    return arrangement


def ordering_from_lex(table: CodeFeatureTable, arrangement: Sequence[int]) -> Ordering:
    arrangement = _check_arrangement(table, arrangement)
    ranks = dense_ranks(table.values[:, arrangement])
    label = ",".join(table.names[i] for i in arrangement)
    return Ordering(ranks, f"lex:{label}")


def parse_arrangement(table: CodeFeatureTable, spec: str | Sequence) -> list[int]:
    """Feature indices from names (``"transitions,largest-run"``) or ints."""
    items = spec.split(",") if isinstance(spec, str) else list(spec)
    out = []
    for item in items:
        if isinstance(item, str):
            item = item.strip()
            if not item:
                continue
            out.append(int(item) if item.isdigit() else table.index(item))
        else:
            out.append(int(item))
    return _check_arrangement(table, out)


@dataclass(frozen=True)
class OracleSpec:
    """Cheap performance estimate of an ordering used by the greedy search."""

    dataset: object
    kind: str = "cv-accuracy"
    classifier: str = "one-nn-chi2"
    folds: int = 3
    seed: int = 0
    subsample: int = 20
    neighborhood: object = None

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("oracle needs at least 2 folds")
        if self.subsample < 1:
            raise ValueError("oracle subsample must be at least 1")
        if self.kind != "cv-accuracy" or self.classifier != "one-nn-chi2":
            raise ValueError("only the cv-accuracy / one-nn-chi2 oracle is available")


def make_oracle(spec: OracleSpec, table: CodeFeatureTable) -> Callable[[Sequence[int]], float]:
    """Build ``arrangement -> accuracy`` for a depth-2 pipeline on a class-balanced subsample.

    Layer-1 codes are computed once; each call only re-runs the second layer.
    """
    from .encoding import NeighborhoodSpec, encode_with_ordering, lbp_encode
    from .evaluation import cv_accuracy_1nn, balanced_subsample
    from .features import histogram

    ds = spec.dataset
    if ds is None or len(ds) == 0:
        raise ValueError("oracle dataset is empty")
    neighborhood = spec.neighborhood or NeighborhoodSpec()
    if 1 << neighborhood.n != table.values.shape[0]:
        raise ValueError("feature table and oracle neighborhood disagree on n")
    idx = balanced_subsample(ds.labels, spec.subsample, spec.seed)
    labels = ds.labels[idx]
    first = [lbp_encode(ds.images[i], neighborhood) for i in idx]

    def oracle(arrangement: Sequence[int]) -> float:
        ordering = ordering_from_lex(table, arrangement)
        feats = np.array([histogram(encode_with_ordering(c, ordering), "raw") for c in first])
        return cv_accuracy_1nn(feats, labels, spec.folds, spec.seed)

    return oracle


@dataclass
class SearchTrace:
    arrangement: list[int] = field(default_factory=list)
    scores: list[float] = field(default_factory=list)
    baseline: float | None = None
    calls: int = 0


def greedy_lex_search(table: CodeFeatureTable, oracle, max_depth: int,
                      trace: SearchTrace | None = None) -> list[int]:
    """Greedily grow a feature arrangement, appending the oracle's best choice.

    ``oracle`` is an :class:`OracleSpec` or any callable scoring an
    arrangement. The empty arrangement is scored once as the baseline; after
    that each step scores every unused feature and keeps the best (lowest
    index on ties) only if it strictly improves the current score.
    """
    if max_depth > table.num_features:
        raise ValueError(f"max_depth {max_depth} exceeds {table.num_features} features")
    if isinstance(oracle, OracleSpec):
        oracle = make_oracle(oracle, table)
    trace = SearchTrace() if trace is None else trace
    arrangement: list[int] = []
    if max_depth <= 0:
        return arrangement
    current = float(oracle(()))
    trace.baseline = current
    for _ in range(max_depth):
        best_feat, best_score = None, -np.inf
        for j in range(table.num_features):
            if j in arrangement:
                continue
            score = float(oracle(tuple(arrangement + [j])))
            trace.calls += 1
            if score > best_score:
                best_feat, best_score = j, score
        if best_feat is None or not best_score > current:
            break
        arrangement.append(best_feat)
        current = best_score
        trace.scores.append(best_score)
    trace.arrangement = list(arrangement)
    return arrangement
