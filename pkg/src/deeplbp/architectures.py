"""Deep, multi-deep and multiscale LBP pipelines."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .encoding import CodeImage, NeighborhoodSpec, as_gray, encode_with_ordering, lbp_encode
from .features import CODE_MAPS, FeatureVector, histogram, map_size
from .ordering import Ordering

FUSIONS = ("final-only", "feature-fusion", "decision-fusion")


@dataclass(frozen=True)
class DeepModel:
    """A neighbourhood applied `layers` times, with orderings for layers 2 onwards.

    With ``decision-fusion`` the feature vector is the same per-layer
    concatenation as ``feature-fusion``; the split into per-layer
    classifiers happens at evaluation time.
    """

    spec: NeighborhoodSpec = field(default_factory=NeighborhoodSpec)
    layers: int = 1
    orderings: tuple[Ordering, ...] = ()
    fusion: str = "feature-fusion"
    code_map: str = "raw"

    def __post_init__(self):
        object.__setattr__(self, "orderings", tuple(self.orderings))
        if self.layers < 1:
            raise ValueError("a deep model needs at least one layer")
        if len(self.orderings) != self.layers - 1:
            raise ValueError(
                f"{self.layers} layers need {self.layers - 1} orderings, got {len(self.orderings)}")
        for o in self.orderings:
            if o.num_codes != self.spec.num_codes:
                raise ValueError(f"ordering over {o.num_codes} codes does not match n={self.spec.n}")
        if self.fusion not in FUSIONS:
            raise ValueError(f"unknown fusion {self.fusion!r}; choose from {FUSIONS}")
        if self.code_map not in CODE_MAPS:
            raise ValueError(f"unknown code map {self.code_map!r}; choose from {CODE_MAPS}")

    @classmethod
    def with_shared_ordering(cls, spec: NeighborhoodSpec, layers: int, ordering: Ordering | None,
                             **kwargs) -> "DeepModel":
        """Reuse one learned ordering for every deep layer."""
        orderings = () if layers == 1 else (ordering,) * (layers - 1)
        return cls(spec=spec, layers=layers, orderings=orderings, **kwargs)

    @property
    def footprint(self) -> int:
        """Minimum input side length that survives every layer."""
        return 2 * self.spec.margin * self.layers + 1

    def feature_length(self) -> int:
        per_layer = map_size(self.spec.n, self.code_map)
        return per_layer if self.fusion == "final-only" else per_layer * self.layers


@dataclass(frozen=True)
class MultiscaleModel:
    base: DeepModel
    num_scales: int = 1
    scale_factor: float = 0.5

    def __post_init__(self):
        if self.num_scales < 1:
            raise ValueError("num_scales must be at least 1")
        if not 0 < self.scale_factor <= 1:
            raise ValueError(f"scale_factor must lie in (0, 1], got {self.scale_factor}")

    def feature_length(self) -> int:
        return self.num_scales * self.base.feature_length()


def run_deep(img, model: DeepModel) -> list[CodeImage]:
    img = as_gray(img)
    m = model.spec.margin
    h, w = img.shape
    layers = []
    for k in range(1, model.layers + 1):
        if min(h, w) < 2 * m + 1:
            raise ValueError(
                f"input of {img.shape[0]}x{img.shape[1]} is exhausted at layer {k}: "
                f"{h}x{w} left, need {2 * m + 1}x{2 * m + 1}")
        if k == 1:
            layers.append(lbp_encode(img, model.spec))
        else:
            layers.append(encode_with_ordering(layers[-1], model.orderings[k - 2], model.spec))
        h, w = layers[-1].codes.shape
    return layers


def features_deep(img, model: DeepModel) -> FeatureVector:
    layers = run_deep(img, model)
    if model.fusion == "final-only":
        layers = layers[-1:]
    hists = [histogram(c, model.code_map) for c in layers]
    layout = tuple((f"l{c.layer}", len(h)) for c, h in zip(layers, hists))
    return FeatureVector(np.concatenate(hists), layout)


def decision_fuse(per_layer_probs) -> np.ndarray:
    """Average per-layer class distributions into one distribution."""
    probs = [np.asarray(p, dtype=np.float64) for p in per_layer_probs]
    if not probs:
        raise ValueError("nothing to fuse")
    size = probs[0].shape
    for p in probs:
        if p.shape != size:
            raise ValueError("per-layer probability vectors differ in length")
        if abs(p.sum() - 1.0) > 1e-6:
            raise ValueError("per-layer probabilities must sum to 1")
    fused = np.mean(probs, axis=0)
    return fused / fused.sum()


def _area_matrix(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) box-filter weights; row j averages input span [j, j+1) * n_in / n_out."""
    step = n_in / n_out
    w = np.zeros((n_out, n_in))
    for j in range(n_out):
        lo, hi = j * step, (j + 1) * step
        for i in range(math.floor(lo), min(math.ceil(hi), n_in)):
            w[j, i] = min(hi, i + 1) - max(lo, i)
    return w / w.sum(axis=1, keepdims=True)


def downscale(img, factor: float) -> np.ndarray:
    """Area-average resample to ``round(side * factor)`` per axis."""
    img = as_gray(img)
    if not 0 < factor <= 1:
        raise ValueError(f"factor must lie in (0, 1], got {factor}")
    h, w = img.shape
    oh, ow = round(h * factor), round(w * factor)
    if oh < 1 or ow < 1:
        raise ValueError(f"downscaling {h}x{w} by {factor} leaves an empty image")
    if (oh, ow) == (h, w):
        return img.copy()
    return _area_matrix(h, oh) @ img @ _area_matrix(w, ow).T


def scale_pyramid(img, num_scales: int, factor: float) -> list[np.ndarray]:
    """Images at scales 1, f, f^2, ... each resampled from the original."""
    img = as_gray(img)
    return [img if s == 0 else downscale(img, factor ** s) for s in range(num_scales)]


def run_multiscale(img, mmodel: MultiscaleModel) -> FeatureVector:
    parts = []
    for s, scaled in enumerate(scale_pyramid(img, mmodel.num_scales, mmodel.scale_factor)):
        if min(scaled.shape) < mmodel.base.footprint:
            raise ValueError(
                f"scale {s} image of {scaled.shape[0]}x{scaled.shape[1]} is smaller than the "
                f"{mmodel.base.footprint}px footprint of the deep model")
        parts.append(FeatureVector.concat([features_deep(scaled, mmodel.base)], prefix=f"s{s}_"))
    return FeatureVector.concat(parts)


# --- serialisation -----------------------------------------------------------

_MODEL_KEYS = {"spec", "layers", "orderings", "fusion", "code_map", "scales", "scale_factor"}


def model_to_dict(model: DeepModel | MultiscaleModel) -> dict:
    mm = model if isinstance(model, MultiscaleModel) else MultiscaleModel(model)
    base = mm.base
    return {
        "spec": base.spec.to_dict(),
        "layers": base.layers,
        "orderings": [o.to_dict() for o in base.orderings],
        "fusion": base.fusion,
        "code_map": base.code_map,
        "scales": mm.num_scales,
        "scale_factor": mm.scale_factor,
    }


def model_from_dict(d: dict) -> MultiscaleModel:
    unknown = set(d) - _MODEL_KEYS
    if unknown:
        raise ValueError(f"unknown model keys: {sorted(unknown)}")
    base = DeepModel(
        spec=NeighborhoodSpec.from_dict(d.get("spec", {})),
        layers=int(d.get("layers", 1)),
        orderings=tuple(Ordering.from_dict(o) for o in d.get("orderings", [])),
        fusion=d.get("fusion", "feature-fusion"),
        code_map=d.get("code_map", "raw"),
    )
    return MultiscaleModel(base, int(d.get("scales", 1)), float(d.get("scale_factor", 0.5)))


def dumps_model(model: DeepModel | MultiscaleModel) -> str:
    return json.dumps(model_to_dict(model), indent=2)


def loads_model(text: str) -> MultiscaleModel:
    return model_from_dict(json.loads(text))


def extract(img, model: DeepModel | MultiscaleModel) -> FeatureVector:
    """Feature vector for either model kind."""
    if isinstance(model, MultiscaleModel):
        return run_multiscale(img, model)
    return features_deep(img, model)
