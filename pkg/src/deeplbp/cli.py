"""Command line front end.

Every subcommand accepts ``--config run.json``; flags given on the command
line override the file. The configuration is validated before any work.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .architectures import (
    FUSIONS, DeepModel, MultiscaleModel, dumps_model, extract, loads_model, run_deep,
)
from .combinatorics import render_table, table1
from .encoding import METRICS, SAMPLINGS, NeighborhoodSpec
from .evaluation import ClassifierConfig, evaluate, load_dataset, load_image, save_png
from .features import CODE_MAPS
from .ordering import (
    Ordering, OracleSpec, SearchTrace, code_features, greedy_lex_search, hamming_matrix,
    ordering_from_dissimilarity, ordering_from_lex, parse_arrangement, ri_hamming_matrix,
)

log = logging.getLogger("deeplbp")

STRATEGIES = ("shallow", "deep", "multiscale-shallow", "multiscale-deep", "deep-pca")
DEFAULT_ARRANGEMENT = "transitions,largest-run,imbalance"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    n: int = 8
    radius: float = 3.0
    metric: str = "euclidean-circle"
    sampling: str = "bilinear"
    layers: int = 3
    fusion: str = "feature-fusion"
    code_map: str = "raw"
    scales: int | None = None
    scale_factor: float = 0.5
    mode: str = "highdim"  # ordering construction: highdim | similarity | file
    dissimilarity: str = "ri-hamming"
    arrangement: str = DEFAULT_ARRANGEMENT
    greedy: bool = False
    max_depth: int = 3
    ordering_file: str | None = None
    model: str | None = None
    strategy: str = "deep"
    classifier: str = "random-forest"
    folds: int = 5
    trees: int = 100
    tree_depth: int | None = None
    retain: float = 0.95
    oracle_folds: int = 3
    oracle_subsample: int = 20
    max_side: int = 100
    dataset: str | None = None
    image: str | None = None
    seed: int = 0
    out: str | None = None
    extra: dict = field(default_factory=dict, repr=False)

    _choices = {
        "metric": METRICS, "sampling": SAMPLINGS, "fusion": FUSIONS, "code_map": CODE_MAPS,
        "mode": ("highdim", "similarity", "file"), "dissimilarity": ("hamming", "ri-hamming"),
        "strategy": STRATEGIES, "classifier": ("random-forest", "one-nn-chi2"),
    }

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls) if f.name != "extra"]

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = sorted(set(d) - set(cls.keys()))
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        types = {f.name: f.type for f in fields(self)}
        for name in self.keys():
            value = getattr(self, name)
            expected = types[name]
            if value is None:
                if "None" not in str(expected):
                    raise ConfigError(f"{name} may not be null")
                continue
            if "int" in str(expected) and "float" not in str(expected):
                ok = isinstance(value, int) and not isinstance(value, bool)
            elif "float" in str(expected):
                ok = isinstance(value, (int, float)) and not isinstance(value, bool)
            elif "bool" in str(expected):
                ok = isinstance(value, bool)
            else:
                ok = isinstance(value, str)
            if not ok:
                raise ConfigError(f"{name} has the wrong type: {value!r}")
        for name, choices in self._choices.items():
            if getattr(self, name) not in choices:
                raise ConfigError(f"{name} must be one of {choices}, got {getattr(self, name)!r}")
        checks = [
            (2 <= self.n <= 16, "n must lie in [2, 16]"),
            (self.radius > 0, "radius must be positive"),
            (self.layers >= 1, "layers must be at least 1"),
            (self.scales is None or self.scales >= 1, "scales must be at least 1"),
            (0 < self.scale_factor <= 1, "scale_factor must lie in (0, 1]"),
            (self.folds >= 2, "folds must be at least 2"),
            (self.trees >= 1, "trees must be at least 1"),
            (0 < self.retain <= 1, "retain must lie in (0, 1]"),
            (self.max_depth >= 0, "max_depth must be non-negative"),
            (self.max_side >= 1, "max_side must be positive"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        if self.mode == "file" and not self.ordering_file:
            raise ConfigError("mode 'file' needs ordering_file")

    @property
    def spec(self) -> NeighborhoodSpec:
        return NeighborhoodSpec(self.n, float(self.radius), self.metric, self.sampling)


def build_config(args: argparse.Namespace) -> RunConfig:
    data = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
    for key in RunConfig.keys():
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    return RunConfig.from_dict(data)


# --- model assembly ----------------------------------------------------------

def _resolve_ordering(cfg: RunConfig, dataset=None) -> Ordering:
    if cfg.mode == "file":
        return Ordering.loads(Path(cfg.ordering_file).read_text())
    if cfg.mode == "similarity":
        d = hamming_matrix(cfg.n) if cfg.dissimilarity == "hamming" else ri_hamming_matrix(cfg.n)
        return ordering_from_dissimilarity(d, provenance=f"mds:{cfg.dissimilarity}")
    table = code_features(cfg.n)
    if cfg.greedy:
        if dataset is None:
            raise ConfigError("greedy search needs a dataset")
        oracle = OracleSpec(dataset, folds=cfg.oracle_folds, seed=cfg.seed,
                            subsample=cfg.oracle_subsample, neighborhood=cfg.spec)
        trace = SearchTrace()
        arrangement = greedy_lex_search(table, oracle, cfg.max_depth, trace)
        log.info("greedy arrangement %s (baseline %.4f, scores %s, %d oracle calls)",
                 [table.names[i] for i in arrangement], trace.baseline, trace.scores, trace.calls)
        return ordering_from_lex(table, arrangement)
    return ordering_from_lex(table, parse_arrangement(table, cfg.arrangement))


def build_model(cfg: RunConfig, strategy: str | None = None) -> MultiscaleModel:
    if cfg.model:
        return loads_model(Path(cfg.model).read_text())
    strategy = strategy or cfg.strategy
    deep = strategy in ("deep", "multiscale-deep", "deep-pca")
    layers = cfg.layers if deep else 1
    ordering = _resolve_ordering(cfg) if layers > 1 else None
    base = DeepModel.with_shared_ordering(cfg.spec, layers, ordering, fusion=cfg.fusion,
                                          code_map=cfg.code_map)
    multiscale = strategy.startswith("multiscale")
    scales = cfg.scales if cfg.scales is not None else (3 if multiscale else 1)
    return MultiscaleModel(base, scales, cfg.scale_factor)


# --- subcommands -------------------------------------------------------------

def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def cmd_train_ordering(cfg: RunConfig) -> int:
    dataset = None
    if cfg.mode == "highdim" and cfg.greedy:
        if not cfg.dataset:
            raise ConfigError("--greedy needs --dataset")
        dataset = load_dataset(cfg.dataset, cfg.max_side)
    ordering = _resolve_ordering(cfg, dataset)
    _write(cfg.out, json.dumps(ordering.to_dict()) + "\n")
    log.info("ordering with %d classes over %d codes", ordering.num_classes, ordering.num_codes)
    return 0


def cmd_extract(cfg: RunConfig) -> int:
    if not cfg.dataset:
        raise ConfigError("extract needs --dataset")
    model = build_model(cfg)
    ds = load_dataset(cfg.dataset, cfg.max_side)
    rows = [extract(img, model) for img in ds.images]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", *rows[0].column_names()])
    for fv, label in zip(rows, ds.labels):
        w.writerow([ds.class_names[label], *(repr(float(v)) for v in fv.values)])
    _write(cfg.out, buf.getvalue())
    log.info("extracted %d x %d features", len(rows), len(rows[0]))
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    if not cfg.dataset:
        raise ConfigError("eval needs --dataset")
    if cfg.greedy:
        raise ConfigError("train a greedy ordering with train-ordering, then pass it via ordering_file")
    model = build_model(cfg)
    ds = load_dataset(cfg.dataset, cfg.max_side)
    report = evaluate(
        ds, lambda img: extract(img, model),
        classifier=ClassifierConfig(cfg.classifier, cfg.trees, cfg.tree_depth),
        k=cfg.folds, seed=cfg.seed,
        pca_retain=cfg.retain if cfg.strategy == "deep-pca" else None,
        decision_fusion=model.base.fusion == "decision-fusion",
        config={"strategy": cfg.strategy, "model": json.loads(dumps_model(model)),
                "dataset": str(cfg.dataset)},
    )
    out = Path(cfg.out or "eval_out")
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval.csv").write_text(report.to_csv())
    (out / "eval.json").write_text(report.to_json())
    print(f"{cfg.strategy}: accuracy {report.accuracy:.4f}  class rank {report.class_rank:.2f}%")
    return 0


def render_layers(img, model: DeepModel) -> list[np.ndarray]:
    """Grey images per layer: raw codes for layer 1, ordering ranks for deeper layers."""
    layers = run_deep(img, model)
    out = []
    for k, codes in enumerate(layers, start=1):
        if k == 1 or not model.orderings:
            top = codes.spec.num_codes - 1
            out.append(codes.codes * (255.0 / top))
            continue
        ordering = model.orderings[min(k - 1, len(model.orderings) - 1)]
        top = max(ordering.num_classes - 1, 1)
        out.append(ordering.ranks[codes.codes] * (255.0 / top))
    return out


def cmd_visualize(cfg: RunConfig) -> int:
    if not cfg.image:
        raise ConfigError("visualize needs --image")
    model = build_model(cfg, strategy="deep").base
    img = load_image(cfg.image, max_side=None)
    out = Path(cfg.out or "layers")
    out.mkdir(parents=True, exist_ok=True)
    for k, layer in enumerate(render_layers(img, model), start=1):
        save_png(out / f"layer_{k}.png", layer)
    (out / "model.json").write_text(dumps_model(model) + "\n")
    return 0


def cmd_dagcount(args) -> int:
    lo, hi = (args.n, args.n) if args.n is not None else (args.n_min, args.n_max)
    if not (2 <= lo <= hi <= 8):
        raise ConfigError("neighbour counts must satisfy 2 <= n_min <= n_max <= 8")
    text = render_table(table1(range(lo, hi + 1)), fmt=args.format)
    _write(args.out, text)
    return 0


# --- parser ------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run configuration; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output file or directory")


def _model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, help="sampling points")
    p.add_argument("--radius", type=float)
    p.add_argument("--metric", choices=METRICS)
    p.add_argument("--sampling", choices=SAMPLINGS)
    p.add_argument("--layers", type=int)
    p.add_argument("--fusion", choices=FUSIONS)
    p.add_argument("--code-map", dest="code_map", choices=CODE_MAPS)
    p.add_argument("--scales", type=int)
    p.add_argument("--scale-factor", dest="scale_factor", type=float)
    p.add_argument("--mode", choices=("highdim", "similarity", "file"),
                   help="how deep-layer orderings are built")
    p.add_argument("--dissimilarity", choices=("hamming", "ri-hamming"))
    p.add_argument("--arrangement", help="comma-separated code features")
    p.add_argument("--ordering-file", dest="ordering_file")
    p.add_argument("--model", help="DeepModel JSON; replaces the model flags")
    p.add_argument("--max-side", dest="max_side", type=int)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deeplbp", description="Deep local binary patterns")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-ordering", help="build an ordering over LBP codes")
    _common(p)
    p.add_argument("--mode", choices=("highdim", "similarity"))
    p.add_argument("--metric", dest="dissimilarity", choices=("hamming", "ri-hamming"),
                   help="dissimilarity for --mode similarity")
    p.add_argument("--n", type=int)
    p.add_argument("--radius", type=float)
    p.add_argument("--arrangement")
    p.add_argument("--greedy", action="store_const", const=True)
    p.add_argument("--max-depth", dest="max_depth", type=int)
    p.add_argument("--dataset")
    p.add_argument("--oracle-folds", dest="oracle_folds", type=int)
    p.add_argument("--oracle-subsample", dest="oracle_subsample", type=int)
    p.add_argument("--max-side", dest="max_side", type=int)
    p.set_defaults(func=cmd_train_ordering)

    p = sub.add_parser("extract", help="write per-image feature vectors as CSV")
    _common(p)
    _model_flags(p)
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--dataset")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("eval", help="cross-validated evaluation of a strategy")
    _common(p)
    _model_flags(p)
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--dataset")
    p.add_argument("--folds", type=int)
    p.add_argument("--trees", type=int)
    p.add_argument("--tree-depth", dest="tree_depth", type=int)
    p.add_argument("--classifier", choices=("random-forest", "one-nn-chi2"))
    p.add_argument("--retain", type=float, help="PCA variance fraction for deep-pca")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("visualize", help="render every deep layer of one image")
    _common(p)
    _model_flags(p)
    p.add_argument("--image")
    p.set_defaults(func=cmd_visualize)

    p = sub.add_parser("dagcount", help="print the search-space size table")
    p.add_argument("--n", type=int, help="single row")
    p.add_argument("--n-min", dest="n_min", type=int, default=2)
    p.add_argument("--n-max", dest="n_max", type=int, default=8)
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--out")
    p.set_defaults(func=cmd_dagcount)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "dagcount":
            return args.func(args)
        cfg = build_config(args)
        return args.func(cfg)
    except ConfigError as exc:
        parser.exit(2, f"deeplbp: configuration error: {exc}\n")
    except (OSError, ValueError) as exc:
        parser.exit(1, f"deeplbp: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
