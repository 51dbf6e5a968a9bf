"""Exact quantities for small binary RBMs by enumeration.

Two families live here. ``exact_log_partition`` is the production routine
(enumerate one layer, sum the other out in closed form). The ``joint_*``
helpers enumerate every (x, h) pair through ``rbm.energy`` and exist as
independent references for tests.
"""
import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .errors import ParameterError, UnsupportedOperation
from .rbm import GradientEstimate, energy, positive_statistics

ENUMERATION_BUDGET = 24
JOINT_BUDGET = 18


def all_configurations(n):
    """All 2**n binary vectors as rows, in counting order."""
    idx = np.arange(1 << n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(np.float64)


def _check_binary(params):
    if params.visible_type != "binary":
        raise UnsupportedOperation("exact enumeration supports binary visible units only")


def exact_log_partition(params, route="auto"):
    """log Z, enumerating the smaller layer (or the one named by ``route``:
    'visible' or 'hidden')."""
    _check_binary(params)
    V, H = params.n_visible, params.n_hidden
    if V + H > ENUMERATION_BUDGET:
        raise ParameterError(
            f"V + H = {V + H} exceeds the enumeration budget of {ENUMERATION_BUDGET}"
        )
    if route == "auto":
        route = "visible" if V <= H else "hidden"
    if route == "visible":
        return _kernels.enum_log_sum(params.weights, params.visible_bias, params.hidden_bias)
    if route == "hidden":
        return _kernels.enum_log_sum(params.weights.T, params.hidden_bias, params.visible_bias)
    raise ParameterError(f"unknown route {route!r}")


def _joint_energies(params):
    _check_binary(params)
    V, H = params.n_visible, params.n_hidden
    if V + H > JOINT_BUDGET:
        raise ParameterError(f"joint enumeration limited to V + H <= {JOINT_BUDGET}")
    xs = all_configurations(V)
    hs = all_configurations(H)
    X = np.repeat(xs, len(hs), axis=0)
    Hh = np.tile(hs, (len(xs), 1))
    return xs, hs, energy(params, X, Hh).reshape(len(xs), len(hs))


def joint_log_partition(params):
    _, _, E = _joint_energies(params)
    return float(logsumexp(-E))


def joint_log_marginals(params):
    """(configs, log P(x)) over every visible configuration."""
    xs, _, E = _joint_energies(params)
    logZ = logsumexp(-E)
    return xs, logsumexp(-E, axis=1) - logZ


def joint_hidden_conditional(params, x):
    """E[h | x] by summing over every hidden configuration."""
    hs = all_configurations(params.n_hidden)
    X = np.repeat(np.atleast_2d(x), len(hs), axis=0)
    w = -energy(params, X, hs)
    w = np.exp(w - w.max())
    return (w[:, None] * hs).sum(axis=0) / w.sum()


def joint_visible_conditional(params, h):
    """P(x_i = 1 | h) by summing over every visible configuration."""
    xs = all_configurations(params.n_visible)
    Hh = np.repeat(np.atleast_2d(h), len(xs), axis=0)
    w = -energy(params, xs, Hh)
    w = np.exp(w - w.max())
    return (w[:, None] * xs).sum(axis=0) / w.sum()


def joint_log_likelihood(params, data):
    """Mean log P(x) over the rows of ``data`` (binary rows only)."""
    xs, logp = joint_log_marginals(params)
    data = np.atleast_2d(data)
    codes = (data.astype(np.int64) << np.arange(params.n_visible)).sum(axis=1)
    return float(logp[codes].mean())


def joint_model_expectations(params):
    """<x h>, <x>, <h> under the model joint distribution."""
    xs, hs, E = _joint_energies(params)
    logZ = logsumexp(-E)
    P = np.exp(-E - logZ)
    px = P.sum(axis=1)
    ph = P.sum(axis=0)
    return GradientEstimate(xs.T @ P @ hs, px @ xs, ph @ hs, 1)


def exact_gradient(params, batch):
    """Log-likelihood gradient with the model expectation computed exactly."""
    pos = positive_statistics(params, batch)
    neg = joint_model_expectations(params)
    return GradientEstimate(
        pos.d_weights - neg.d_weights,
        pos.d_visible_bias - neg.d_visible_bias,
        pos.d_hidden_bias - neg.d_hidden_bias,
        pos.batch_size,
    )
