"""Dataset handling plus the cross-validated evaluation harness."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from PIL import Image
from sklearn.ensemble import RandomForestClassifier

from .architectures import decision_fuse
from .features import FeatureVector, pca_apply, pca_fit

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".pgm")
MAX_SIDE = 100
CHI2_EPS = 1e-12


# --- images and datasets -----------------------------------------------------

def load_image(path, max_side: int | None = MAX_SIDE) -> np.ndarray:
    """Read a PNG/PGM as float grayscale (luma for colour), shrinking so the longer side is ``<= max_side``."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im = im.convert("L")
            if max_side is not None and max(im.size) > max_side:
                scale = max_side / max(im.size)
                size = (max(1, round(im.size[0] * scale)), max(1, round(im.size[1] * scale)))
                im = im.resize(size, Image.Resampling.BOX)
            return np.asarray(im, dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise OSError(f"cannot read image {path}: {exc}") from exc


def save_png(path, img: np.ndarray) -> None:
    arr = np.clip(np.rint(np.asarray(img, dtype=np.float64)), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


@dataclass
class Dataset:
    images: list
    labels: np.ndarray
    class_names: list[str]
    paths: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.images) != len(self.labels):
            raise ValueError("images and labels differ in length")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise ValueError("label outside the class list")

    def __len__(self):
        return len(self.images)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def subset(self, idx) -> "Dataset":
        idx = list(idx)
        paths = [self.paths[i] for i in idx] if self.paths else []
        return Dataset([self.images[i] for i in idx], self.labels[idx], self.class_names, paths)


def load_dataset(root, max_side: int | None = MAX_SIDE) -> Dataset:
    """Load ``root/<class>/<image>.{png,pgm}``; classes and files in lexicographic order."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {root}")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if len(class_dirs) < 2:
        raise ValueError(f"{root} holds {len(class_dirs)} class folder(s); need at least 2")
    images, labels, paths = [], [], []
    for label, d in enumerate(class_dirs):
        files = sorted(p for p in d.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        if not files:
            raise ValueError(f"class folder {d} contains no PNG/PGM images")
        for f in files:
            images.append(load_image(f, max_side))
            labels.append(label)
            paths.append(str(f.relative_to(root)))
    return Dataset(images, labels, [d.name for d in class_dirs], paths)


def write_dataset(ds: Dataset, root) -> None:
    """Write a dataset as ``root/<class>/<nnnn>.png`` (8-bit)."""
    root = Path(root)
    for i, (img, label) in enumerate(zip(ds.images, ds.labels)):
        d = root / ds.class_names[label]
        d.mkdir(parents=True, exist_ok=True)
        save_png(d / f"{i:05d}.png", img)


def flips(img) -> list[np.ndarray]:
    img = np.asarray(img)
    return [img, img[:, ::-1], img[::-1, :]]


def augment_flips(ds: Dataset) -> Dataset:
    """Original, horizontal flip and vertical flip of every image, grouped per sample."""
    images, labels = [], []
    for img, label in zip(ds.images, ds.labels):
        images.extend(flips(img))
        labels.extend([label] * 3)
    return Dataset(images, labels, ds.class_names)


# --- splitting ---------------------------------------------------------------

def stratified_kfold(labels, k: int, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """Deterministic stratified ``k``-fold split: list of ``(train_idx, test_idx)``.

    Each class is shuffled and dealt round-robin; the dealing offset carries
    over between classes so fold sizes stay within one of each other.
    """
    labels = np.asarray(labels.labels if isinstance(labels, Dataset) else labels)
    if k < 2:
        raise ValueError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if len(idx) < k:
            raise ValueError(f"class {c} has {len(idx)} samples, fewer than {k} folds")
        idx = rng.permutation(idx)
        fold_of[idx] = (offset + np.arange(len(idx))) % k
        offset = (offset + len(idx)) % k
    everything = np.arange(len(labels))
    return [(everything[fold_of != f], everything[fold_of == f]) for f in range(k)]


def balanced_subsample(labels, per_class: int, seed: int = 0) -> np.ndarray:
    """Sorted indices of at most ``per_class`` samples per class."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    picked = []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        picked.extend(rng.permutation(idx)[:per_class])
    return np.sort(np.array(picked, dtype=np.int64))


# --- classifiers -------------------------------------------------------------

@dataclass
class RandomForestModel:
    estimator: RandomForestClassifier
    num_classes: int
    trees: int
    max_depth: int | None
    seed: int

    @property
    def classes(self) -> np.ndarray:
        return self.estimator.classes_


def rf_train(x, y, trees: int = 100, max_depth: int | None = None, seed: int = 0,
             num_classes: int | None = None) -> RandomForestModel:
    """Bagged gini CART trees with sqrt(d) candidate features per split."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if trees < 1:
        raise ValueError("a forest needs at least one tree")
    num_classes = int(y.max()) + 1 if num_classes is None else num_classes
    est = RandomForestClassifier(
        n_estimators=trees, criterion="gini", max_depth=max_depth, max_features="sqrt",
        bootstrap=True, random_state=seed, n_jobs=1)
    est.fit(x, y)
    return RandomForestModel(est, num_classes, trees, max_depth, seed)


def rf_predict_proba(model: RandomForestModel, x) -> np.ndarray:
    """Mean leaf class frequencies, laid out over all ``num_classes`` labels."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    out = np.zeros((x.shape[0], model.num_classes))
    out[:, model.classes] = model.estimator.predict_proba(x)
    out /= out.sum(axis=1, keepdims=True)
    return out


def chi2_distance(a, b) -> np.ndarray:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return np.sum((a - b) ** 2 / (a + b + CHI2_EPS), axis=-1)


def one_nn_chi2(train_x, train_y, x, num_classes: int | None = None) -> np.ndarray:
    """One-hot class distribution of the chi-square nearest neighbour (lowest index on ties)."""
    train_x = np.atleast_2d(np.asarray(train_x, dtype=np.float64))
    train_y = np.asarray(train_y, dtype=np.int64)
    if len(train_y) == 0:
        raise ValueError("empty training set")
    num_classes = int(train_y.max()) + 1 if num_classes is None else num_classes
    nearest = int(np.argmin(chi2_distance(train_x, np.asarray(x)[None, :])))
    probs = np.zeros(num_classes)
    probs[train_y[nearest]] = 1.0
    return probs


def cv_accuracy_1nn(x, y, folds: int, seed: int) -> float:
    """Stratified CV accuracy of the chi-square 1-NN classifier."""
    x, y = np.asarray(x), np.asarray(y)
    if len(y) == 0:
        raise ValueError("cannot score an empty dataset")
    num_classes = int(y.max()) + 1
    hits = 0
    for train, test in stratified_kfold(y, folds, seed):
        for i in test:
            hits += int(np.argmax(one_nn_chi2(x[train], y[train], x[i], num_classes)) == y[i])
    return hits / len(y)


def class_rank(probs, truth: int) -> float:
    """Percent position of ``truth`` among classes sorted by confidence; ties share half credit."""
    probs = np.asarray(probs, dtype=np.float64)
    c = len(probs)
    if c < 2:
        raise ValueError("class rank needs at least two classes")
    p = probs[truth]
    higher = int(np.sum(probs > p))
    equal = int(np.sum(probs == p)) - 1
    return 100.0 * (higher + 0.5 * equal) / (c - 1)


# --- harness -----------------------------------------------------------------

@dataclass
class ClassifierConfig:
    kind: str = "random-forest"  # or "one-nn-chi2"
    trees: int = 100
    max_depth: int | None = None

    def __post_init__(self):
        if self.kind not in ("random-forest", "one-nn-chi2"):
            raise ValueError(f"unknown classifier {self.kind!r}")


@dataclass
class FoldResult:
    fold: int
    accuracy: float
    class_rank: float
    pca_components: int | None = None


@dataclass
class EvalReport:
    folds: list[FoldResult]
    config: dict = field(default_factory=dict)

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([f.accuracy for f in self.folds])

    @property
    def class_ranks(self) -> np.ndarray:
        return np.array([f.class_rank for f in self.folds])

    @property
    def accuracy(self) -> float:
        return float(self.accuracies.mean())

    @property
    def class_rank(self) -> float:
        return float(self.class_ranks.mean())

    def summary(self) -> dict:
        return {
            "accuracy_mean": self.accuracy,
            "accuracy_std": float(self.accuracies.std()),
            "class_rank_mean": self.class_rank,
            "class_rank_std": float(self.class_ranks.std()),
            "class_rank_ties": "tied classes count half a position",
            "folds": [asdict(f) for f in self.folds],
            "config": self.config,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fold", "accuracy", "class_rank"])
        for f in self.folds:
            w.writerow([f.fold, repr(f.accuracy), repr(f.class_rank)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2) + "\n"


def _fit_predict(train_x, train_y, test_x, clf: ClassifierConfig, num_classes: int, seed: int):
    if clf.kind == "one-nn-chi2":
        return np.array([one_nn_chi2(train_x, train_y, x, num_classes) for x in test_x])
    model = rf_train(train_x, train_y, clf.trees, clf.max_depth, seed, num_classes)
    return rf_predict_proba(model, test_x)


def evaluate(ds: Dataset, extractor: Callable[[np.ndarray], FeatureVector],
             classifier: ClassifierConfig | None = None, k: int = 5, seed: int = 0,
             pca_retain: float | None = None, decision_fusion: bool = False,
             augment: bool = True, config: dict | None = None) -> EvalReport:
    """Stratified k-fold evaluation of a feature extractor.

    Training folds are augmented with flips; PCA (optional) and the
    classifier only ever see training rows. With ``decision_fusion`` each
    layout block gets its own classifier and the per-block probabilities are
    averaged.
    """
    classifier = classifier or ClassifierConfig()
    if ds.num_classes < 2:
        raise ValueError("evaluation needs at least two classes")
    splits = stratified_kfold(ds.labels, k, seed)
    fold_seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(k)]

    # feature cache: (sample, variant) with variant 0 = original, 1/2 = flips
    feats: dict[tuple[int, int], FeatureVector] = {}

    def features(i: int, variant: int) -> FeatureVector:
        if (i, variant) not in feats:
            feats[(i, variant)] = extractor(flips(ds.images[i])[variant])
        return feats[(i, variant)]

    variants = (0, 1, 2) if augment else (0,)
    results = []
    for fold, ((train, test), fold_seed) in enumerate(zip(splits, fold_seeds)):
        train_rows = [features(i, v) for i in train for v in variants]
        train_y = np.array([ds.labels[i] for i in train for _ in variants])
        test_rows = [features(i, 0) for i in test]
        layout = train_rows[0].layout
        blocks = [slice(None)]
        if decision_fusion:
            starts = np.cumsum([0] + [length for _, length in layout])
            blocks = [slice(a, b) for a, b in zip(starts[:-1], starts[1:])]
        train_x = np.array([r.values for r in train_rows])
        test_x = np.array([r.values for r in test_rows])
        per_block, n_comp = [], None
        for b in blocks:
            tr, te = train_x[:, b], test_x[:, b]
            if pca_retain is not None:
                pca = pca_fit(tr, pca_retain)
                tr, te = pca_apply(pca, tr), pca_apply(pca, te)
                n_comp = pca.k if n_comp is None else n_comp + pca.k
            per_block.append(_fit_predict(tr, train_y, te, classifier, ds.num_classes, fold_seed))
        probs = per_block[0] if len(per_block) == 1 else np.array(
            [decision_fuse([p[j] for p in per_block]) for j in range(len(test))])
        truth = ds.labels[test]
        acc = float(np.mean(np.argmax(probs, axis=1) == truth))
        rank = float(np.mean([class_rank(p, t) for p, t in zip(probs, truth)]))
        log.info("fold %d: accuracy %.4f class rank %.2f", fold, acc, rank)
        results.append(FoldResult(fold, acc, rank, n_comp))
    echo = {"folds": k, "seed": seed, "classifier": asdict(classifier),
            "pca_retain": pca_retain, "decision_fusion": decision_fusion, "augment": augment}
    echo.update(config or {})
    return EvalReport(results, echo)
