"""Two-layer deep Boltzmann machine with sparse group penalties on the
mean-field activations of both hidden layers.

Energy: E(x, h1, h2) = -x.W1.h1 - h1.W2.h2 - b.x - c1.h1 - c2.h2.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import DimensionError, NumericalError, ParameterError
from .rbm import RbmParams, hidden_probabilities, init_params
from .regularizer import Grouping, penalty_coefficients


@dataclass
class DbmParams:
    w1: np.ndarray
    w2: np.ndarray
    b: np.ndarray
    c1: np.ndarray
    c2: np.ndarray

    def __post_init__(self):
        for name in ("w1", "w2", "b", "c1", "c2"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        V, H1 = self.w1.shape
        if self.w2.shape[0] != H1:
            raise DimensionError("w2 rows must equal w1 columns")
        H2 = self.w2.shape[1]
        if self.b.shape != (V,) or self.c1.shape != (H1,) or self.c2.shape != (H2,):
            raise DimensionError("bias shapes do not match weights")

    @property
    def sizes(self):
        return self.w1.shape[0], self.w1.shape[1], self.w2.shape[1]

    def arrays(self):
        return {"w1": self.w1, "w2": self.w2, "b": self.b, "c1": self.c1, "c2": self.c2}

    def copy(self):
        return DbmParams(**{k: v.copy() for k, v in self.arrays().items()})

    def is_finite(self):
        return all(np.isfinite(v).all() for v in self.arrays().values())

    def layer1_rbm(self):
        return RbmParams(self.w1, self.b, self.c1)


@dataclass
class MeanFieldState:
    mu1: np.ndarray
    mu2: np.ndarray
    iterations_used: np.ndarray
    converged: np.ndarray
    residual: np.ndarray


def mean_field_residual(params, visible, mu1, mu2):
    """max |mu - f(mu)| of the undamped fixed-point map, per row."""
    x = np.atleast_2d(visible)
    t1 = expit(x @ params.w1 + np.atleast_2d(mu2) @ params.w2.T + params.c1)
    t2 = expit(np.atleast_2d(mu1) @ params.w2 + params.c2)
    return np.maximum(np.abs(t1 - mu1).max(axis=1), np.abs(t2 - mu2).max(axis=1))


def mean_field_posterior(params, visible, tol=1e-6, max_iters=50, damping=0.5):
    """Damped fixed-point iteration for q(h1) q(h2).

    Starts from the bottom-up pass mu1 = sigmoid(x W1 + c1),
    mu2 = sigmoid(mu1 W2 + c2). Each iteration evaluates the map
    f(mu) = (sigmoid(x W1 + mu2 W2^T + c1), sigmoid(mu1 W2 + c2)); a row stops
    (and is frozen) once max |f(mu) - mu| <= tol, otherwise
    mu <- damping * mu + (1 - damping) * f(mu). Works on a vector or a batch.
    """
    if tol <= 0:
        raise ParameterError("tol must be positive")
    single = np.ndim(visible) == 1
    x = np.atleast_2d(np.asarray(visible, dtype=np.float64))
    L = x.shape[0]
    bottom_up = x @ params.w1
    mu1 = expit(bottom_up + params.c1)
    mu2 = expit(mu1 @ params.w2 + params.c2)
    iters = np.zeros(L, dtype=np.int64)
    residual = np.full(L, np.inf)
    active = np.ones(L, dtype=bool)
    for _ in range(max_iters):
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        m1, m2 = mu1[rows], mu2[rows]
        t1 = expit(bottom_up[rows] + m2 @ params.w2.T + params.c1)
        t2 = expit(m1 @ params.w2 + params.c2)
        r = np.maximum(np.abs(t1 - m1).max(axis=1), np.abs(t2 - m2).max(axis=1))
        iters[rows] += 1
        residual[rows] = r
        done = r <= tol
        active[rows[done]] = False
        move = rows[~done]
        keep = ~done
        mu1[move] = damping * m1[keep] + (1.0 - damping) * t1[keep]
        mu2[move] = damping * m2[keep] + (1.0 - damping) * t2[keep]
    if active.any():
        # rows that used up max_iters: report the residual of the final state
        rows = np.flatnonzero(active)
        residual[rows] = mean_field_residual(params, x[rows], mu1[rows], mu2[rows])
    converged = ~active
    if single:
        return MeanFieldState(mu1[0], mu2[0], iters[0], bool(converged[0]), residual[0])
    return MeanFieldState(mu1, mu2, iters, converged, residual)


@dataclass
class FantasyParticles:
    x: np.ndarray
    h1: np.ndarray
    h2: np.ndarray

    @classmethod
    def random(cls, params, n_chains, rng):
        V, H1, H2 = params.sizes
        if n_chains < 1:
            raise ParameterError("need at least one fantasy particle")
        return cls(
            (rng.random((n_chains, V)) < 0.5).astype(np.float64),
            (rng.random((n_chains, H1)) < 0.5).astype(np.float64),
            (rng.random((n_chains, H2)) < 0.5).astype(np.float64),
        )

    def copy(self):
        return FantasyParticles(self.x.copy(), self.h1.copy(), self.h2.copy())


def gibbs_sweep(params, particles, rng):
    """h1 | x, h2; then x | h1 and h2 | h1 (drawn in that order)."""
    p1 = expit(particles.x @ params.w1 + particles.h2 @ params.w2.T + params.c1)
    h1 = (rng.random(p1.shape) < p1).astype(np.float64)
    px = expit(h1 @ params.w1.T + params.b)
    x = (rng.random(px.shape) < px).astype(np.float64)
    p2 = expit(h1 @ params.w2 + params.c2)
    h2 = (rng.random(p2.shape) < p2).astype(np.float64)
    return FantasyParticles(x, h1, h2)


@dataclass
class DbmGradient:
    w1: np.ndarray
    w2: np.ndarray
    b: np.ndarray
    c1: np.ndarray
    c2: np.ndarray


def dbm_penalty_gradient(params, visible, mf, grouping1, grouping2, lam1, lam2, epsilon=1e-8):
    """Gradient of lam1 * sum_k N_k(mu1) + lam2 * sum_k N_k(mu2), batch
    averaged, treating each layer's mean-field inputs as constants apart from
    its own weights and biases (W1, c1 for mu1; W2, c2 for mu2)."""
    x = np.atleast_2d(visible)
    L = x.shape[0]
    mu1, mu2 = np.atleast_2d(mf.mu1), np.atleast_2d(mf.mu2)
    V, H1, H2 = params.sizes
    g = DbmGradient(np.zeros((V, H1)), np.zeros((H1, H2)), np.zeros(V), np.zeros(H1), np.zeros(H2))
    if lam1:
        coef1, _ = penalty_coefficients(mu1, grouping1, epsilon)
        coef1 *= lam1
        g.w1 = x.T @ coef1 / L
        g.c1 = coef1.mean(axis=0)
    if lam2:
        coef2, _ = penalty_coefficients(mu2, grouping2, epsilon)
        coef2 *= lam2
        g.w2 = mu1.T @ coef2 / L
        g.c2 = coef2.mean(axis=0)
    return g


@dataclass
class DbmOptimizerState:
    velocity: dict
    epoch: int = 0
    step: int = 0

    @classmethod
    def for_params(cls, params):
        return cls({k: np.zeros_like(v) for k, v in params.arrays().items()})


def dbm_gradient(params, batch, particles, grouping1, grouping2, reg1, reg2, rng,
                 tol=1e-6, max_iters=50):
    """Stochastic-approximation gradient and the advanced particles."""
    x = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    L = x.shape[0]
    mf = mean_field_posterior(params, x, tol, max_iters)
    new = gibbs_sweep(params, particles, rng)
    M = new.x.shape[0]
    grad = DbmGradient(
        x.T @ mf.mu1 / L - new.x.T @ new.h1 / M,
        mf.mu1.T @ mf.mu2 / L - new.h1.T @ new.h2 / M,
        x.mean(axis=0) - new.x.mean(axis=0),
        mf.mu1.mean(axis=0) - new.h1.mean(axis=0),
        mf.mu2.mean(axis=0) - new.h2.mean(axis=0),
    )
    lam1 = reg1.lam if reg1.kind == "sparse_group" else 0.0
    lam2 = reg2.lam if reg2.kind == "sparse_group" else 0.0
    if lam1 or lam2:
        pen = dbm_penalty_gradient(params, x, mf, grouping1, grouping2, lam1, lam2, reg1.epsilon)
        for name in ("w1", "w2", "c1", "c2"):
            setattr(grad, name, getattr(grad, name) - getattr(pen, name))
    return grad, new, mf


def dbm_apply_update(params, grad, opt_state, config, momentum=None):
    """Same update rule as ``rbm.apply_update``: decay applies to w1 and w2."""
    mu = config.momentum(opt_state.epoch) if momentum is None else momentum
    lr = config.learning_rate
    new = {}
    with np.errstate(over="ignore", invalid="ignore"):  # checked below
        for name, value in params.arrays().items():
            v = mu * opt_state.velocity[name] + getattr(grad, name)
            opt_state.velocity[name] = v
            step = v - config.weight_decay * value if name in ("w1", "w2") else v
            new[name] = value + lr * step
    out = DbmParams(**new)
    if not out.is_finite():
        raise NumericalError(
            f"non-finite DBM parameters at epoch {opt_state.epoch}, step {opt_state.step}"
        )
    opt_state.step += 1
    return out


def dbm_train_step(params, batch, particles, grouping1, grouping2, config, reg1, reg2,
                   opt_state, rng, tol=1e-6, max_iters=50):
    """One update: returns (new params, advanced particles)."""
    if not params.is_finite():
        raise NumericalError("non-finite DBM parameters before update")
    grad, new_particles, _ = dbm_gradient(
        params, batch, particles, grouping1, grouping2, reg1, reg2, rng, tol, max_iters
    )
    return dbm_apply_update(params, grad, opt_state, config), new_particles


def assemble_dbm(rbm1, rbm2):
    """Compose two stacked RBMs into a DBM.

    The middle layer receives input from both neighbours in the DBM, so the
    pretrained weights are halved; the middle-layer bias averages the hidden
    bias of the lower RBM and the visible bias of the upper one.
    """
    if rbm1.n_hidden != rbm2.n_visible:
        raise DimensionError("layer-2 RBM must take layer-1 hidden units as its visible units")
    return DbmParams(
        0.5 * rbm1.weights,
        0.5 * rbm2.weights,
        rbm1.visible_bias.copy(),
        0.5 * (rbm1.hidden_bias + rbm2.visible_bias),
        rbm2.hidden_bias.copy(),
    )


def greedy_pretrain(data, sizes, config, reg1, reg2, rng, telemetry=None):
    """Train layer-1 and layer-2 sparse group RBMs and assemble a DBM.

    Returns (DbmParams, (rbm1, rbm2)). With ``config.epochs == 0`` the
    result is the assembly of the two freshly initialized RBMs.
    """
    from .training import train_rbm

    h1, h2 = sizes
    items = np.asarray(data, dtype=np.float64)
    rbm1 = init_params(items.shape[1], h1, rng, "binary", config.init_std, items)
    rbm1, _ = train_rbm(rbm1, items, config, reg1, Grouping.uniform(h1, reg1.group_size), rng,
                        telemetry=telemetry, layer=1)
    upper = hidden_probabilities(rbm1, items)
    rbm2 = init_params(h1, h2, rng, "binary", config.init_std, upper)
    rbm2, _ = train_rbm(rbm2, upper, config, reg2, Grouping.uniform(h2, reg2.group_size), rng,
                        telemetry=telemetry, layer=2)
    return assemble_dbm(rbm1, rbm2), (rbm1, rbm2)
