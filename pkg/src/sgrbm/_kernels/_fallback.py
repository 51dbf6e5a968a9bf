"""Pure-numpy versions of the hot kernels.

Every function here has a twin in ``_core.pyx`` with the same signature and
semantics; the compiled one is preferred when it was built.
"""
import numpy as np

_CHUNK_BITS = 14


def softplus(t):
    t = np.asarray(t, dtype=np.float64)
    return np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t)))


def enum_log_sum(A, a, d):
    """log sum over s in {0,1}^n of exp(a.s + sum_j softplus((s A)_j + d_j)).

    A has shape (n, m). Configurations are generated in chunks of at most
    2**14 so memory stays bounded for n up to ~24.
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    n = A.shape[0]
    total = 1 << n
    chunk = min(total, 1 << _CHUNK_BITS)
    bits = np.arange(n, dtype=np.int64)
    parts = []
    for start in range(0, total, chunk):
        idx = np.arange(start, start + chunk, dtype=np.int64)
        s = ((idx[:, None] >> bits) & 1).astype(np.float64)
        vals = s @ a + softplus(s @ A + d).sum(axis=1)
        top = vals.max()
        parts.append(top + np.log(np.exp(vals - top).sum()))
    parts = np.asarray(parts)
    top = parts.max()
    return float(top + np.log(np.exp(parts - top).sum()))


def group_coefficients(P, order, offsets, eps):
    """Per-unit coefficient P^2 (1 - P) / max(N_k, eps) and per-row sum of N_k.

    ``order`` lists hidden indices group by group; group k occupies
    ``order[offsets[k]:offsets[k + 1]]``.
    """
    P = np.asarray(P, dtype=np.float64)
    sq = P[:, order] ** 2
    norms = np.sqrt(np.add.reduceat(sq, offsets[:-1], axis=1))
    penalty = norms.sum(axis=1)
    sizes = np.diff(offsets)
    per_unit = np.repeat(np.maximum(norms, eps), sizes, axis=1)
    coef = np.empty_like(P)
    Po = P[:, order]
    coef[:, order] = Po * Po * (1.0 - Po) / per_unit
    return coef, penalty


def hoyer_rows(X):
    """Hoyer sparseness of each row; NaN where a row is all zero."""
    X = np.asarray(X, dtype=np.float64)
    D = X.shape[1]
    A = np.abs(X)
    # rescale rows by their max so tiny or huge entries neither under- nor overflow
    m = A.max(axis=1, keepdims=True)
    A = np.divide(A, m, out=np.zeros_like(A), where=m > 0)
    l1 = A.sum(axis=1)
    l2 = np.sqrt((A * A).sum(axis=1))
    sqrt_d = np.sqrt(D)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (sqrt_d - l1 / l2) / (sqrt_d - 1.0)
    return np.clip(out, 0.0, 1.0, where=np.isfinite(out), out=out)
