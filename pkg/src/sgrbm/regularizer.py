"""l1/l2 (sparse group) penalty on hidden activation probabilities, and the
squared-error sparse-RBM penalty used as a comparison baseline."""
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigurationError, ParameterError
from .rbm import GradientEstimate, cd_gradient, hidden_probabilities

KINDS = ("sparse_group", "sparse_rbm_baseline", "none")


@dataclass
class Grouping:
    """Partition of hidden units into non-overlapping groups.

    ``group_of[j]`` is the group id of hidden unit j; ``groups[k]`` lists the
    members of group k.
    """

    group_of: np.ndarray
    groups: list

    def __post_init__(self):
        self.group_of = np.asarray(self.group_of, dtype=np.int64)
        self.groups = [np.asarray(g, dtype=np.int64) for g in self.groups]
        H = self.group_of.shape[0]
        if any(len(g) == 0 for g in self.groups):
            raise ConfigurationError("grouping contains an empty group")
        members = np.concatenate(self.groups) if self.groups else np.empty(0, np.int64)
        if members.size != H or not np.array_equal(np.sort(members), np.arange(H)):
            raise ConfigurationError("groups must partition the hidden units exactly once")
        for k, g in enumerate(self.groups):
            if np.any(self.group_of[g] != k):
                raise ConfigurationError("group_of disagrees with groups")
        self._order = members
        self._offsets = np.concatenate([[0], np.cumsum([len(g) for g in self.groups])]).astype(np.int64)

    @property
    def n_hidden(self):
        return self.group_of.shape[0]

    @property
    def n_groups(self):
        return len(self.groups)

    @classmethod
    def uniform(cls, n_hidden, group_size):
        """Contiguous blocks of ``group_size``; the last block may be smaller."""
        if group_size < 1:
            raise ConfigurationError("group_size must be >= 1")
        if group_size > 10:
            warnings.warn(f"group size {group_size} exceeds the recommended bound of 10")
        if n_hidden % group_size:
            warnings.warn(
                f"group size {group_size} does not divide {n_hidden} hidden units; "
                "the last group is smaller"
            )
        group_of = np.arange(n_hidden) // group_size
        groups = [np.arange(s, min(s + group_size, n_hidden)) for s in range(0, n_hidden, group_size)]
        return cls(group_of, groups)

    @classmethod
    def from_group_of(cls, group_of):
        group_of = np.asarray(group_of, dtype=np.int64)
        K = int(group_of.max()) + 1 if group_of.size else 0
        return cls(group_of, [np.flatnonzero(group_of == k) for k in range(K)])


@dataclass
class RegularizerConfig:
    kind: str = "sparse_group"
    lam: float = 0.1
    group_size: int = 3
    epsilon: float = 1e-8
    # sparse-RBM baseline; target may be a probability or a count of active units
    baseline_target: float = 0.02
    baseline_target_is_count: bool = False
    baseline_weight: float = 0.02

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"regularizer.kind must be one of {KINDS}")
        if self.lam < 0:
            raise ConfigurationError("regularizer.lambda must be non-negative")
        if self.epsilon <= 0:
            raise ConfigurationError("regularizer.epsilon must be positive")
        if self.group_size < 1:
            raise ConfigurationError("regularizer.group_size must be >= 1")

    def target_probability(self, n_hidden):
        if self.baseline_target_is_count:
            return self.baseline_target / n_hidden
        return self.baseline_target


def _rows(probs):
    return np.atleast_2d(np.asarray(probs, dtype=np.float64))


def group_norms(probs, grouping):
    """N_k = sqrt(sum_{m in G_k} P_m^2); shape (K,) or (L, K)."""
    P = _rows(probs)
    norms = np.stack([np.sqrt((P[:, g] ** 2).sum(axis=1)) for g in grouping.groups], axis=1)
    return norms[0] if np.ndim(probs) == 1 else norms


def mixed_norm_penalty(probs, grouping):
    """Sum of group norms, per example."""
    P = _rows(probs)
    _, pen = _kernels.group_coefficients(P, grouping._order, grouping._offsets, 1e-300)
    return float(pen[0]) if np.ndim(probs) == 1 else pen


def penalty_coefficients(probs, grouping, epsilon=1e-8):
    """P_j^2 (1 - P_j) / max(N_k, eps) for every unit, plus the per-row penalty."""
    return _kernels.group_coefficients(_rows(probs), grouping._order, grouping._offsets, epsilon)


def penalty_gradient(params, visible, grouping, config):
    """Gradient of lam * mixed_norm_penalty(P(h|x)) w.r.t. weights and hidden
    biases, averaged over the rows of ``visible``. Subtract it from an
    ascent direction."""
    if config.kind != "sparse_group":
        raise ConfigurationError(f"penalty_gradient needs kind=sparse_group, got {config.kind}")
    if grouping.n_hidden != params.n_hidden:
        raise ConfigurationError("grouping size does not match hidden layer")
    x = _rows(visible)
    L = x.shape[0]
    coef, _ = penalty_coefficients(hidden_probabilities(params, x), grouping, config.epsilon)
    coef *= config.lam
    return GradientEstimate(
        x.T @ coef / L,
        np.zeros(params.n_visible),
        coef.mean(axis=0),
        L,
    )


def sparse_rbm_baseline_gradient(params, batch, target, weight):
    """Gradient of weight * sum_j (target - mean_l P(h_j=1|x_l))^2.

    Subtract it from an ascent direction.
    """
    if not 0.0 < target < 1.0:
        raise ParameterError(f"sparsity target must lie in (0, 1), got {target}")
    x = _rows(batch)
    L = x.shape[0]
    P = hidden_probabilities(params, x)
    q = P.mean(axis=0)
    # d/dtheta of (t - q_j)^2 = -2 (t - q_j) dq_j/dtheta
    scale = -2.0 * weight * (target - q)
    dpre = P * (1.0 - P) * scale
    return GradientEstimate(
        x.T @ dpre / L,
        np.zeros(params.n_visible),
        dpre.mean(axis=0),
        L,
    )


def baseline_penalty(params, batch, target, weight):
    q = hidden_probabilities(params, _rows(batch)).mean(axis=0)
    return float(weight * ((target - q) ** 2).sum())


def regularized_cd_gradient(params, batch, k, grouping, config, rng):
    """CD-k gradient with the configured penalty applied to the positive phase."""
    grad = cd_gradient(params, batch, k, rng)
    if config.kind == "none" or config.lam == 0.0 and config.kind == "sparse_group":
        return grad
    if config.kind == "sparse_group":
        return grad - penalty_gradient(params, batch, grouping, config)
    target = config.target_probability(params.n_hidden)
    if config.baseline_weight == 0.0:
        return grad
    return grad - sparse_rbm_baseline_gradient(params, batch, target, config.baseline_weight)
