"""Write the two-class texture-of-textures set to disk as root/<class>/<n>.png."""

import argparse

from deeplbp.evaluation import write_dataset
from deeplbp.synthetic import meta_texture_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("root")
    ap.add_argument("--per-class", type=int, default=100)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    ds = meta_texture_dataset(args.per_class, args.size, args.seed)
    write_dataset(ds, args.root)
    print(f"wrote {len(ds)} images to {args.root}")


if __name__ == "__main__":
    main()
