"""Locating MNIST for experiments.

Real IDX files are used when ``SGRBM_MNIST_DIR`` points at a directory with
the standard file names. Otherwise the 5,000-digit MNIST sample bundled with
``mlxtend`` is exported to IDX files and read back through ``load_idx``.
"""
import os

import numpy as np

from .data import load_idx, load_mnist, write_idx
from .errors import InputError

MLXTEND_IMAGES = "mlxtend-mnist5k-images-idx3-ubyte"
MLXTEND_LABELS = "mlxtend-mnist5k-labels-idx1-ubyte"


def export_mlxtend_mnist(directory):
    """Write mlxtend's MNIST sample as IDX files; returns (images, labels) paths."""
    try:
        from mlxtend.data import mnist_data
    except ImportError:
        raise InputError("mlxtend is not installed; pip install 'sgrbm[mnist]'") from None
    os.makedirs(directory, exist_ok=True)
    images = os.path.join(directory, MLXTEND_IMAGES)
    labels = os.path.join(directory, MLXTEND_LABELS)
    if not (os.path.exists(images) and os.path.exists(labels)):
        X, y = mnist_data()
        write_idx(images, X.astype(np.uint8).reshape(-1, 28, 28))
        write_idx(labels, y.astype(np.uint8))
    return images, labels


def mnist_train_test(n_train, n_test, seed=0, cache_dir=None):
    """(train, test, source) Datasets of at most the requested sizes.

    With full MNIST the train subset comes from the training file and the test
    subset from t10k. With the 5,000-digit sample, the digits are shuffled
    once and split; the train part is capped at 5000 - n_test.
    """
    root = os.environ.get("SGRBM_MNIST_DIR")
    if root:
        train = load_mnist(root, "train").subset(n_train, seed)
        test = load_mnist(root, "test").subset(n_test, seed + 1)
        return train, test, "mnist-full"
    cache_dir = cache_dir or os.path.join(os.path.expanduser("~"), ".cache", "sgrbm")
    images, labels = export_mlxtend_mnist(cache_dir)
    ds = load_idx(images, labels)
    ds = ds.subset(None, seed)
    n_test = min(n_test, len(ds) // 5)
    test = ds.take(np.arange(n_test))
    train = ds.take(np.arange(n_test, min(len(ds), n_test + n_train)))
    return train, test, "mlxtend-mnist5k"
