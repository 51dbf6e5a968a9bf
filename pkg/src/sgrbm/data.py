"""Dataset ingestion: MNIST IDX files, PGM images, whitened patches and
seeded mini-batch iteration."""
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ParameterError, ParseError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
_IDX_UBYTE = 0x08


@dataclass
class Dataset:
    items: np.ndarray
    labels: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.items = np.asarray(self.items, dtype=np.float64)
        if self.items.ndim != 2:
            raise InputError("dataset items must be an (N, V) matrix")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.items.shape[0],):
                raise InputError("label count does not match item count")

    def __len__(self):
        return self.items.shape[0]

    @property
    def n_visible(self):
        return self.items.shape[1]

    def take(self, index, note=None):
        meta = dict(self.metadata)
        if note:
            meta["preprocessing"] = meta.get("preprocessing", ()) + (note,)
        labels = None if self.labels is None else self.labels[index]
        return Dataset(self.items[index], labels, meta)

    def subset(self, count, seed):
        """``count`` rows chosen by a seeded permutation (all rows if count is None)."""
        n = len(self)
        if count is None or count >= n:
            count = n
        order = np.random.default_rng(seed).permutation(n)[:count]
        return self.take(order, f"subset(count={count}, seed={seed})")


def _read_idx(path, expected_magic):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise ParseError(f"{path}: truncated IDX header", offset=len(raw) if raw else 0)
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise ParseError(
            f"{path}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}", offset=0
        )
    ndim = magic & 0xFF
    header_end = 4 + 4 * ndim
    if len(raw) < header_end:
        raise ParseError(f"{path}: truncated dimension table", offset=len(raw))
    dims = struct.unpack(">" + "I" * ndim, raw[4:header_end])
    size = int(np.prod(dims, dtype=np.int64))
    if len(raw) < header_end + size:
        raise ParseError(
            f"{path}: truncated data, expected {size} bytes, found {len(raw) - header_end}",
            offset=len(raw),
        )
    data = np.frombuffer(raw, dtype=np.uint8, count=size, offset=header_end)
    return data.reshape(dims)


def read_idx_images(path):
    """Raw uint8 array of shape (N, rows, cols)."""
    return _read_idx(path, IDX_IMAGES_MAGIC)


def read_idx_labels(path):
    return _read_idx(path, IDX_LABELS_MAGIC)


def load_idx(images_path, labels_path=None):
    """MNIST-style IDX files -> Dataset with pixels scaled to [0, 1]."""
    images = read_idx_images(images_path)
    n, rows, cols = images.shape
    labels = None
    if labels_path is not None:
        labels = read_idx_labels(labels_path)
        if labels.shape[0] != n:
            raise ParseError(
                f"{labels_path}: {labels.shape[0]} labels for {n} images", offset=4
            )
    return Dataset(
        images.reshape(n, rows * cols) / 255.0,
        labels,
        {"source": os.fspath(images_path), "shape": (rows, cols), "preprocessing": ("scale/255",)},
    )


def write_idx(path, array):
    """Write a uint8 array (1-D labels or 3-D images) in IDX format."""
    arr = np.asarray(array)
    if arr.dtype != np.uint8:
        raise InputError("IDX writer expects uint8 data")
    header = struct.pack(">BBBB", 0, 0, _IDX_UBYTE, arr.ndim)
    header += struct.pack(">" + "I" * arr.ndim, *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(arr).tobytes())


def save_idx_dataset(dataset, images_path, labels_path=None, shape=None):
    """Inverse of ``load_idx`` for data on the k/255 grid."""
    shape = shape or dataset.metadata.get("shape")
    if shape is None:
        raise InputError("image shape unknown; pass shape=(rows, cols)")
    pixels = np.rint(dataset.items * 255.0)
    if pixels.min() < 0 or pixels.max() > 255:
        raise InputError("items must lie in [0, 1] to be written as IDX")
    write_idx(images_path, pixels.astype(np.uint8).reshape(len(dataset), *shape))
    if labels_path is not None:
        if dataset.labels is None:
            raise InputError("dataset has no labels")
        write_idx(labels_path, dataset.labels.astype(np.uint8))


MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def load_mnist(directory, split="train"):
    images, labels = MNIST_FILES[split]
    d = os.fspath(directory)
    for name in (images, images.replace("-idx3-", ".idx3-")):
        if os.path.exists(os.path.join(d, name)):
            images = name
            break
    for name in (labels, labels.replace("-idx1-", ".idx1-")):
        if os.path.exists(os.path.join(d, name)):
            labels = name
            break
    return load_idx(os.path.join(d, images), os.path.join(d, labels))


# -- PGM (binary P5, 8-bit) -------------------------------------------------

def _pgm_tokens(raw, count):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens, pos = [], 0
    while len(tokens) < count:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(raw):
            raise ParseError("truncated PGM header", offset=pos)
        if raw[pos : pos + 1] == b"#":
            while pos < len(raw) and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    return tokens, pos + 1  # exactly one whitespace byte precedes the raster


def read_pgm(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] != b"P5":
        raise ParseError(f"{path}: not a binary PGM (P5) file", offset=0)
    tokens, start = _pgm_tokens(raw[2:], 3)
    start += 2
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise ParseError(f"{path}: malformed PGM header", offset=2) from None
    if not 0 < maxval < 256:
        raise ParseError(f"{path}: only 8-bit PGM is supported (maxval {maxval})", offset=2)
    size = width * height
    if len(raw) < start + size:
        raise ParseError(f"{path}: truncated PGM raster", offset=len(raw))
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=start).reshape(height, width)


def write_pgm(path, image):
    img = np.asarray(image)
    if img.dtype != np.uint8 or img.ndim != 2:
        raise InputError("PGM writer expects a 2-D uint8 array")
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        fh.write(np.ascontiguousarray(img).tobytes())


def load_pgm_directory(directory):
    names = sorted(n for n in os.listdir(directory) if n.lower().endswith(".pgm"))
    if not names:
        raise InputError(f"no .pgm images found in {directory}")
    return [read_pgm(os.path.join(directory, n)).astype(np.float64) for n in names]


# -- patches and whitening --------------------------------------------------

WHITENING = ("zca", "assume-prewhitened")


@dataclass
class PatchSpec:
    images: list
    patch_size: int = 14
    count: int = 100_000
    whitening: str = "zca"
    zca_epsilon: float = 1e-8

    def __post_init__(self):
        if self.whitening not in WHITENING:
            raise ParameterError(f"whitening must be one of {WHITENING}")
        if self.patch_size < 1 or self.count < 1:
            raise ParameterError("patch_size and count must be positive")
        for img in self.images:
            if img.shape[0] < self.patch_size or img.shape[1] < self.patch_size:
                raise ParameterError(
                    f"{self.patch_size}x{self.patch_size} patch does not fit a {img.shape} image"
                )


def zca_whiten(X, epsilon=1e-8):
    """ZCA whitening then per-dimension standardization.

    Eigenvalues below ``epsilon`` times the largest are raised to that floor,
    so near-singular directions are not blown up while well-conditioned ones
    are whitened exactly (whitening white data is then a no-op).
    """
    X = np.asarray(X, dtype=np.float64)
    Xc = X - X.mean(axis=0)
    cov = Xc.T @ Xc / X.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    evals = np.clip(evals, 0.0, None)
    floor = epsilon * evals.max() if evals.max() > 0 else 1.0
    Z = Xc @ (evecs / np.sqrt(np.maximum(evals, floor))) @ evecs.T
    Z -= Z.mean(axis=0)
    sd = Z.std(axis=0)
    sd[sd == 0] = 1.0
    return Z / sd


def extract_patches(spec, rng):
    """Uniformly placed square patches, flattened row-major."""
    p = spec.patch_size
    n_img = len(spec.images)
    which = rng.integers(n_img, size=spec.count)
    out = np.empty((spec.count, p * p))
    for i, k in enumerate(which):
        img = spec.images[k]
        r = rng.integers(img.shape[0] - p + 1)
        c = rng.integers(img.shape[1] - p + 1)
        out[i] = img[r : r + p, c : c + p].ravel()
    steps = (f"patches({p}x{p}, count={spec.count})",)
    if spec.whitening == "zca":
        out = zca_whiten(out, spec.zca_epsilon)
        steps += ("zca", "standardize")
    return Dataset(out, None, {"source": "patches", "shape": (p, p), "preprocessing": steps})


def minibatches(data, batch_size, epoch_seed):
    """Yield shuffled row blocks; the final partial batch is kept."""
    items = data.items if isinstance(data, Dataset) else np.asarray(data)
    n = items.shape[0]
    if n == 0:
        raise InputError("cannot iterate an empty dataset")
    if batch_size < 1:
        raise ParameterError("batch_size must be >= 1")
    order = np.random.default_rng(epoch_seed).permutation(n)
    for start in range(0, n, batch_size):
        yield items[order[start : start + batch_size]]
