"""Tile grids of filters and sample mosaics as 8-bit grayscale arrays."""
import math

import numpy as np

from .errors import ParameterError

SEPARATOR = 0
MID_GRAY = 128


def normalize_tile(column):
    """Min-max scale to 0..255; a constant column maps to mid-gray."""
    col = np.asarray(column, dtype=np.float64)
    lo, hi = col.min(), col.max()
    if hi == lo:
        return np.full(col.shape, MID_GRAY, dtype=np.uint8)
    return np.rint((col - lo) / (hi - lo) * 255.0).astype(np.uint8)


def _check_shape(n_visible, shape):
    if shape is None or len(shape) != 2 or shape[0] * shape[1] != n_visible:
        raise ParameterError(f"visible dimension {n_visible} is not a rows x cols image {shape}")


def grid_layout(n_hidden, group_size=1, group_columns=None):
    """Map each hidden unit to a (row, col) tile position.

    Without groups the tiles fill a near-square grid row by row. With groups
    of size g, each group occupies g adjacent tiles in one row; groups are
    stacked down the columns of group cells (column-major), with
    ``group_columns`` cells across (default ceil(sqrt(K / g))).
    Returns (positions, n_rows, n_cols) in tiles.
    """
    if group_size <= 1:
        cols = math.ceil(math.sqrt(n_hidden))
        rows = math.ceil(n_hidden / cols)
        return [(j // cols, j % cols) for j in range(n_hidden)], rows, cols
    K = math.ceil(n_hidden / group_size)
    C = group_columns or max(1, math.ceil(math.sqrt(K / group_size)))
    R = math.ceil(K / C)
    positions = []
    for j in range(n_hidden):
        k, m = divmod(j, group_size)
        positions.append((k % R, (k // R) * group_size + m))
    return positions, R, C * group_size


def assemble(tiles, positions, n_rows, n_cols, shape):
    r, c = shape
    img = np.full((n_rows * r + n_rows - 1, n_cols * c + n_cols - 1), SEPARATOR, dtype=np.uint8)
    for tile, (i, j) in zip(tiles, positions):
        img[i * (r + 1) : i * (r + 1) + r, j * (c + 1) : j * (c + 1) + c] = tile.reshape(r, c)
    return img


def filter_grid(weights, shape, group_size=1, group_columns=None, order=None):
    """One min-max normalized tile per hidden unit (weight column).

    ``order`` optionally lists hidden units group by group when the grouping
    is not contiguous.
    """
    W = np.asarray(weights, dtype=np.float64)
    _check_shape(W.shape[0], shape)
    cols = W.T if order is None else W.T[np.asarray(order)]
    tiles = [normalize_tile(col) for col in cols]
    positions, n_rows, n_cols = grid_layout(len(tiles), group_size, group_columns)
    return assemble(tiles, positions, n_rows, n_cols, shape)


def mosaic(frames, shape):
    """frames: array (n_chains, n_snapshots, V) of values in [0, 1]; one row
    per chain, one column per snapshot; pixels are round(255 * value)."""
    frames = np.asarray(frames, dtype=np.float64)
    n_chains, n_snap, V = frames.shape
    _check_shape(V, shape)
    tiles = np.rint(np.clip(frames, 0.0, 1.0) * 255.0).astype(np.uint8).reshape(-1, V)
    positions = [(i, j) for i in range(n_chains) for j in range(n_snap)]
    return assemble(tiles, positions, n_chains, n_snap, shape)
