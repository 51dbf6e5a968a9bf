"""Write the desk-scale MNIST train/test split as IDX files for the CLI.

    python3 scripts/make_mnist_subset.py OUTDIR [--train 10000] [--test 1000] [--seed 0]

Uses real MNIST when SGRBM_MNIST_DIR is set, otherwise the 5,000-digit
sample shipped with mlxtend (pip install 'sgrbm[mnist]').
"""
import argparse
import os

from sgrbm.data import save_idx_dataset
from sgrbm.datasets import mnist_train_test


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("outdir")
    ap.add_argument("--train", type=int, default=10_000)
    ap.add_argument("--test", type=int, default=1_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    os.makedirs(args.outdir, exist_ok=True)
    train, test, source = mnist_train_test(args.train, args.test, args.seed)
    for name, ds in (("train", train), ("test", test)):
        save_idx_dataset(ds, os.path.join(args.outdir, f"{name}-images-idx3-ubyte"),
                         os.path.join(args.outdir, f"{name}-labels-idx1-ubyte"), shape=(28, 28))
    print(f"{len(train)} train / {len(test)} test digits from {source} -> {args.outdir}")


if __name__ == "__main__":
    main()
