"""Annealed importance sampling for the partition function of a binary RBM.

Intermediate distributions interpolate between an independent-visible base
model with biases ``b_A`` (plus H hidden units with no couplings) and the
target RBM:

    log p*_beta(x) = b_A.x + beta (b - b_A).x + sum_j softplus(beta (x W + c)_j)

so beta=0 is the base (log Z_A = sum softplus(b_A) + H log 2) and beta=1 the
target. Each chain carries its own random stream derived from the master
seed by its index, so adding chains never changes existing ones.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from ._kernels import softplus
from .errors import EstimationError, ParameterError, UnsupportedOperation

SCHEDULES = ("linear", "geometric-tail")


@dataclass
class AisConfig:
    num_temperatures: int = 1000
    num_chains: int = 100
    schedule: str = "linear"
    base_visible_bias: np.ndarray | None = None

    def __post_init__(self):
        if self.num_temperatures < 2:
            raise ParameterError("AIS needs at least 2 temperatures")
        if self.num_chains < 2:
            raise ParameterError("AIS needs at least 2 chains")
        if self.schedule not in SCHEDULES:
            raise ParameterError(f"schedule must be one of {SCHEDULES}")


@dataclass
class AisEstimate:
    log_z_mean: float
    log_z_ci_low: float
    log_z_ci_high: float
    effective_sample_size: float
    log_weight_std: float
    log_z_base: float


def base_bias_from_data(data, clip=1e-3):
    """Visible biases of the independent model fit to the data means."""
    p = np.clip(np.asarray(data, dtype=np.float64).mean(axis=0), clip, 1 - clip)
    return np.log(p) - np.log1p(-p)


def temperatures(n, schedule="linear", switch=0.5):
    """Strictly increasing inverse temperatures from 0 to 1 inclusive."""
    if schedule == "linear" or n < 4:
        return np.linspace(0.0, 1.0, n)
    n_lin = max(2, n // 2)
    head = np.linspace(0.0, switch, n_lin)
    # gaps shrink geometrically as beta approaches 1
    gaps = np.geomspace(1.0, 1e-2, n - n_lin)
    gaps = gaps / gaps.sum() * (1.0 - switch)
    tail = switch + np.cumsum(gaps)
    tail[-1] = 1.0
    return np.concatenate([head, tail])


def _log_unnorm(params, b_a, x, beta):
    """log p*_beta(x) up to the H log 2 shared by every beta at zero coupling."""
    return (
        x @ b_a
        + beta * (x @ (params.visible_bias - b_a))
        + softplus(beta * (x @ params.weights + params.hidden_bias)).sum(axis=1)
    )


def ais_log_partition(params, config, seed):
    """Estimate log Z; ``seed`` is an int or ``np.random.SeedSequence``."""
    if params.visible_type != "binary":
        raise UnsupportedOperation("AIS is implemented for binary visible units only")
    V, H = params.n_visible, params.n_hidden
    b_a = np.zeros(V) if config.base_visible_bias is None else np.asarray(config.base_visible_bias, float)
    betas = temperatures(config.num_temperatures, config.schedule)
    M = config.num_chains
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    gens = [
        np.random.Generator(np.random.PCG64(np.random.SeedSequence(root.entropy, spawn_key=root.spawn_key + (i,))))
        for i in range(M)
    ]

    def uniforms(n):
        return np.stack([g.random(n) for g in gens])

    x = (uniforms(V) < expit(b_a)).astype(np.float64)
    log_w = np.zeros(M)
    W, b, c = params.weights, params.visible_bias, params.hidden_bias
    prev = _log_unnorm(params, b_a, x, 0.0)
    for beta in betas[1:]:
        cur = _log_unnorm(params, b_a, x, beta)
        log_w += cur - prev
        # one Gibbs transition leaving p_beta invariant
        h = (uniforms(H) < expit(beta * (x @ W + c))).astype(np.float64)
        x = (uniforms(V) < expit(b_a + beta * (h @ W.T + b - b_a))).astype(np.float64)
        prev = _log_unnorm(params, b_a, x, beta)

    if not np.isfinite(log_w).any():
        raise EstimationError("all AIS importance weights are degenerate")
    log_w = np.where(np.isfinite(log_w), log_w, -np.inf)
    log_z_base = float(softplus(b_a).sum() + H * np.log(2.0))
    log_mean_w = logsumexp(log_w) - np.log(M)
    rel = np.exp(log_w - log_mean_w)
    # delta-method standard error of log(mean w)
    se = float(np.std(rel) / np.sqrt(M))
    log_z = log_z_base + float(log_mean_w)
    ess = float(rel.sum() ** 2 / (rel**2).sum())
    return AisEstimate(
        log_z_mean=log_z,
        log_z_ci_low=log_z - 3 * se,
        log_z_ci_high=log_z + 3 * se,
        effective_sample_size=ess,
        log_weight_std=float(np.std(log_w)),
        log_z_base=log_z_base,
    )
