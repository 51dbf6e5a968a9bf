import numpy as np
import pytest

from sgrbm.rbm import RbmParams


def random_rbm(rng, n_visible, n_hidden, scale=1.0, visible_type="binary"):
    return RbmParams(
        rng.normal(0.0, scale, (n_visible, n_hidden)),
        rng.normal(0.0, scale, n_visible),
        rng.normal(0.0, scale, n_hidden),
        visible_type,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20100614)


@pytest.fixture
def small_rbm(rng):
    return random_rbm(rng, 4, 3)


# Two 2x2 images and their labels, written out byte by byte.
IDX_IMAGES = bytes([
    0x00, 0x00, 0x08, 0x03,  # magic: unsigned byte, 3 dims
    0x00, 0x00, 0x00, 0x02,  # N = 2
    0x00, 0x00, 0x00, 0x02,  # rows = 2
    0x00, 0x00, 0x00, 0x02,  # cols = 2
    0x00, 0xFF, 0x80, 0x01,  # image 0, row-major
    0x33, 0x66, 0x99, 0xCC,  # image 1
])
IDX_LABELS = bytes([0x00, 0x00, 0x08, 0x01, 0x00, 0x00, 0x00, 0x02, 0x07, 0x03])
IDX_EXPECTED = np.array([[0, 255, 128, 1], [51, 102, 153, 204]]) / 255.0


@pytest.fixture
def idx_files(tmp_path):
    images, labels = tmp_path / "img.idx", tmp_path / "lab.idx"
    images.write_bytes(IDX_IMAGES)
    labels.write_bytes(IDX_LABELS)
    return images, labels


@pytest.fixture(scope="session")
def mnist(tmp_path_factory):
    """(train, test, source): up to 10,000 training and 1,000 test digits."""
    import os

    from sgrbm.datasets import mnist_train_test

    if not os.environ.get("SGRBM_MNIST_DIR"):
        pytest.importorskip("mlxtend")
    return mnist_train_test(10_000, 1_000, seed=0, cache_dir=str(tmp_path_factory.mktemp("mnist")))


# Acceptance criteria report one line each; the lines are printed in the
# terminal summary so they survive output capture.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
