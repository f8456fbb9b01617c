"""Print the binarization search-space table (labelled DAG counts per code space)."""

import argparse
import time

from deeplbp.combinatorics import render_table, table1


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-min", type=int, default=2)
    ap.add_argument("--n-max", type=int, default=8)
    ap.add_argument("--csv", action="store_true")
    args = ap.parse_args()
    t0 = time.perf_counter()
    rows = table1(range(args.n_min, args.n_max + 1))
    print(render_table(rows, "csv" if args.csv else "text"), end="")
    print(f"# computed in {time.perf_counter() - t0:.2f}s")


if __name__ == "__main__":
    main()
