"""Run the greedy lexicographic feature search on a dataset and print the trace."""

import argparse

from deeplbp.encoding import NeighborhoodSpec
from deeplbp.evaluation import load_dataset
from deeplbp.ordering import OracleSpec, SearchTrace, code_features, greedy_lex_search
from deeplbp.synthetic import meta_texture_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dataset", help="root/<class>/<image>; synthetic set if omitted")
    ap.add_argument("--max-depth", type=int, default=3)
    ap.add_argument("--subsample", type=int, default=20)
    ap.add_argument("--folds", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ds = load_dataset(args.dataset) if args.dataset else meta_texture_dataset(40, seed=args.seed)
    table = code_features(8)
    trace = SearchTrace()
    oracle = OracleSpec(ds, folds=args.folds, seed=args.seed, subsample=args.subsample,
                        neighborhood=NeighborhoodSpec())
    arrangement = greedy_lex_search(table, oracle, args.max_depth, trace)
    print(f"baseline (single class) score {trace.baseline:.4f}")
    for step, (j, score) in enumerate(zip(arrangement, trace.scores), 1):
        print(f"step {step}: + {table.names[j]:14s} score {score:.4f}")
    print(f"arrangement: {','.join(table.names[j] for j in arrangement) or '(empty)'}")
    print(f"oracle calls: {trace.calls}")


if __name__ == "__main__":
    main()
