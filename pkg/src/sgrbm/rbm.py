"""Restricted Boltzmann machine core: energies, conditionals, Gibbs sampling
and the contrastive-divergence gradient.

Arrays follow the (batch, units) convention: a single visible vector has
shape (V,), a batch has shape (L, V). Weights are stored (V, H).
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DimensionError, NumericalError, ParameterError
from ._kernels import softplus

VISIBLE_TYPES = ("binary", "gaussian")


@dataclass
class RbmParams:
    weights: np.ndarray
    visible_bias: np.ndarray
    hidden_bias: np.ndarray
    visible_type: str = "binary"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.visible_bias = np.asarray(self.visible_bias, dtype=np.float64)
        self.hidden_bias = np.asarray(self.hidden_bias, dtype=np.float64)
        if self.visible_type not in VISIBLE_TYPES:
            raise ParameterError(f"unknown visible_type {self.visible_type!r}")
        if self.weights.ndim != 2:
            raise DimensionError("weights must be a (V, H) matrix")
        V, H = self.weights.shape
        if self.visible_bias.shape != (V,) or self.hidden_bias.shape != (H,):
            raise DimensionError(
                f"bias shapes {self.visible_bias.shape}, {self.hidden_bias.shape} "
                f"do not match weights {self.weights.shape}"
            )

    @property
    def n_visible(self):
        return self.weights.shape[0]

    @property
    def n_hidden(self):
        return self.weights.shape[1]

    @classmethod
    def zeros(cls, n_visible, n_hidden, visible_type="binary"):
        return cls(
            np.zeros((n_visible, n_hidden)),
            np.zeros(n_visible),
            np.zeros(n_hidden),
            visible_type,
        )

    def copy(self):
        return RbmParams(
            self.weights.copy(),
            self.visible_bias.copy(),
            self.hidden_bias.copy(),
            self.visible_type,
        )

    def is_finite(self):
        return bool(
            np.isfinite(self.weights).all()
            and np.isfinite(self.visible_bias).all()
            and np.isfinite(self.hidden_bias).all()
        )


@dataclass
class GibbsState:
    visible: np.ndarray
    hidden: np.ndarray
    hidden_probs: np.ndarray


@dataclass
class GradientEstimate:
    """Ascent direction for (weights, visible_bias, hidden_bias), already
    averaged over ``batch_size`` examples."""

    d_weights: np.ndarray
    d_visible_bias: np.ndarray
    d_hidden_bias: np.ndarray
    batch_size: int

    def __sub__(self, other):
        return GradientEstimate(
            self.d_weights - other.d_weights,
            self.d_visible_bias - other.d_visible_bias,
            self.d_hidden_bias - other.d_hidden_bias,
            self.batch_size,
        )

    def __add__(self, other):
        return GradientEstimate(
            self.d_weights + other.d_weights,
            self.d_visible_bias + other.d_visible_bias,
            self.d_hidden_bias + other.d_hidden_bias,
            self.batch_size,
        )

    def flat(self):
        return np.concatenate(
            [self.d_weights.ravel(), self.d_visible_bias, self.d_hidden_bias]
        )

    def is_finite(self):
        return bool(np.isfinite(self.flat()).all())


def init_params(n_visible, n_hidden, rng, visible_type="binary", init_std=0.01, data=None):
    """Small random weights, zero hidden biases.

    Binary visible biases start at the logit of the per-unit data mean
    (clamped to [-4, 4]); gaussian visible biases start at the data mean.
    """
    weights = rng.normal(0.0, init_std, size=(n_visible, n_hidden))
    visible_bias = np.zeros(n_visible)
    if data is not None:
        mean = np.asarray(data, dtype=np.float64).mean(axis=0)
        if visible_type == "binary":
            p = np.clip(mean, 1e-6, 1 - 1e-6)
            visible_bias = np.clip(np.log(p / (1 - p)), -4.0, 4.0)
        else:
            visible_bias = mean.copy()
    return RbmParams(weights, visible_bias, np.zeros(n_hidden), visible_type)


def _as_visible(params, visible):
    x = np.asarray(visible, dtype=np.float64)
    if x.shape[-1] != params.n_visible or x.ndim > 2:
        raise DimensionError(f"visible shape {x.shape} does not match V={params.n_visible}")
    return x


def _as_hidden(params, hidden):
    h = np.asarray(hidden, dtype=np.float64)
    if h.shape[-1] != params.n_hidden or h.ndim > 2:
        raise DimensionError(f"hidden shape {h.shape} does not match H={params.n_hidden}")
    return h


def energy(params, visible, hidden):
    x = _as_visible(params, visible)
    h = _as_hidden(params, hidden)
    interaction = np.einsum("...i,ij,...j->...", x, params.weights, h)
    e = -interaction - h @ params.hidden_bias
    if params.visible_type == "binary":
        e = e - x @ params.visible_bias
    else:
        e = e + 0.5 * ((x - params.visible_bias) ** 2).sum(axis=-1)
    return e if np.ndim(e) else float(e)


def hidden_probabilities(params, visible):
    x = _as_visible(params, visible)
    return expit(x @ params.weights + params.hidden_bias)


def visible_probabilities(params, hidden):
    """Bernoulli means for binary units, conditional means for gaussian."""
    h = _as_hidden(params, hidden)
    act = h @ params.weights.T + params.visible_bias
    if params.visible_type == "binary":
        return expit(act)
    return act


def free_energy(params, visible):
    x = _as_visible(params, visible)
    fe = -softplus(x @ params.weights + params.hidden_bias).sum(axis=-1)
    if params.visible_type == "binary":
        fe = fe - x @ params.visible_bias
    else:
        fe = fe + 0.5 * ((x - params.visible_bias) ** 2).sum(axis=-1)
    return fe if np.ndim(fe) else float(fe)


def sample_hidden(params, visible, rng):
    p = hidden_probabilities(params, visible)
    return (rng.random(p.shape) < p).astype(np.float64), p


def sample_visible(params, hidden, rng):
    mean = visible_probabilities(params, hidden)
    if params.visible_type == "binary":
        return (rng.random(mean.shape) < mean).astype(np.float64)
    return mean + rng.standard_normal(mean.shape)


def gibbs_step(params, state, rng):
    """h ~ P(h | x), then x' ~ P(x | h)."""
    h, p = sample_hidden(params, state.visible, rng)
    x = sample_visible(params, h, rng)
    return GibbsState(x, h, p)


def positive_statistics(params, batch):
    """Data-dependent expectations <x h>, <x>, <h> under P(h | x)."""
    x = np.atleast_2d(_as_visible(params, batch))
    p = hidden_probabilities(params, x)
    L = x.shape[0]
    return GradientEstimate(x.T @ p / L, x.mean(axis=0), p.mean(axis=0), L)


def cd_gradient(params, batch, k, rng):
    """CD-k estimate of the log-likelihood gradient (ascent direction).

    The chain starts at the data, samples binary hidden states for every
    hidden pass except the last, where probabilities are used.
    """
    if k < 1:
        raise ParameterError(f"cd steps must be >= 1, got {k}")
    x = np.atleast_2d(_as_visible(params, batch))
    L = x.shape[0]
    pos_p = hidden_probabilities(params, x)
    h = (rng.random(pos_p.shape) < pos_p).astype(np.float64)
    for step in range(k):
        neg_x = sample_visible(params, h, rng)
        neg_p = hidden_probabilities(params, neg_x)
        if step < k - 1:
            h = (rng.random(neg_p.shape) < neg_p).astype(np.float64)
    return GradientEstimate(
        (x.T @ pos_p - neg_x.T @ neg_p) / L,
        x.mean(axis=0) - neg_x.mean(axis=0),
        pos_p.mean(axis=0) - neg_p.mean(axis=0),
        L,
    )


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    momentum_initial: float = 0.5
    momentum_final: float = 0.9
    momentum_switch_epoch: int = 5
    weight_decay: float = 2e-4
    cd_steps: int = 1
    epochs: int = 50
    batch_size: int = 100
    init_std: float = 0.01
    visible_type: str = "binary"

    def momentum(self, epoch):
        return self.momentum_initial if epoch < self.momentum_switch_epoch else self.momentum_final


@dataclass
class OptimizerState:
    velocity_weights: np.ndarray
    velocity_visible: np.ndarray
    velocity_hidden: np.ndarray
    epoch: int = 0
    step: int = 0

    @classmethod
    def for_params(cls, params):
        return cls(
            np.zeros_like(params.weights),
            np.zeros_like(params.visible_bias),
            np.zeros_like(params.hidden_bias),
        )


def apply_update(params, grad, opt_state, config, momentum=None):
    """Momentum SGD with weight decay on the weights only.

    Order: velocity <- momentum * velocity + grad; weight decay is then
    subtracted from the weight step; the step is applied. Returns new params;
    ``opt_state`` is updated in place.
    """
    if grad.d_weights.shape != params.weights.shape:
        raise DimensionError("gradient does not match parameter shapes")
    mu = config.momentum(opt_state.epoch) if momentum is None else momentum
    lr = config.learning_rate
    vw = mu * opt_state.velocity_weights + grad.d_weights
    vb = mu * opt_state.velocity_visible + grad.d_visible_bias
    vc = mu * opt_state.velocity_hidden + grad.d_hidden_bias
    with np.errstate(over="ignore", invalid="ignore"):  # checked just below
        new = RbmParams(
            params.weights + lr * (vw - config.weight_decay * params.weights),
            params.visible_bias + lr * vb,
            params.hidden_bias + lr * vc,
            params.visible_type,
        )
    if not new.is_finite():
        bad = [
            name
            for name, arr in (("weights", new.weights), ("visible_bias", new.visible_bias),
                              ("hidden_bias", new.hidden_bias))
            if not np.isfinite(arr).all()
        ]
        raise NumericalError(
            f"non-finite parameters after update at epoch {opt_state.epoch}, "
            f"step {opt_state.step}: {', '.join(bad)}; max |grad| = "
            f"{np.nanmax(np.abs(grad.flat())):.3g}"
        )
    opt_state.velocity_weights = vw
    opt_state.velocity_visible = vb
    opt_state.velocity_hidden = vc
    opt_state.step += 1
    return new
