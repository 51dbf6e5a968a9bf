"""Evaluation metrics: Hoyer sparseness, test log-probability, mixture
responsibilities, linear probes, and the report container."""
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .errors import DimensionError, InputError, ParameterError
from .rbm import free_energy, hidden_probabilities


def hoyer_sparseness(v):
    """(sqrt(D) - |v|_1 / |v|_2) / (sqrt(D) - 1), in [0, 1].

    Undefined (raises) for D < 2 or the all-zero vector.
    """
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size < 2:
        raise InputError("Hoyer sparseness needs at least 2 dimensions")
    if not np.any(v):
        raise InputError("Hoyer sparseness is undefined for the zero vector")
    return float(_kernels.hoyer_rows(v[None, :])[0])


def hoyer_sparseness_rows(X):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] < 2:
        raise InputError("Hoyer sparseness needs at least 2 dimensions")
    out = _kernels.hoyer_rows(X)
    if np.isnan(out).any():
        raise InputError(f"{int(np.isnan(out).sum())} all-zero rows have undefined sparseness")
    return out


@dataclass
class SparsenessReport:
    values: np.ndarray
    min: float
    max: float
    mean: float

    @classmethod
    def from_values(cls, values):
        values = np.asarray(values, dtype=np.float64)
        return cls(values, float(values.min()), float(values.max()), float(values.mean()))


def representation_sparseness(params, data, features=None):
    """Hoyer sparseness of each example's hidden-probability vector.

    ``features`` may be passed to score an arbitrary representation (e.g. DBM
    mean-field activations) instead of the RBM's hidden probabilities.
    """
    if features is None:
        features = hidden_probabilities(params, np.atleast_2d(data))
    return SparsenessReport.from_values(hoyer_sparseness_rows(features))


def avg_test_log_prob(params, data, log_z):
    """Mean of -F(x) - log Z over the test rows; with an AIS log Z this is
    an estimate of a stochastic lower bound on the average log-probability."""
    return float(np.mean(-free_energy(params, np.atleast_2d(data))) - log_z)


def third_order_responsibility(components, visible, temperature=1.0):
    """Posterior over K component RBMs of an implicit mixture.

    Each component scores sum_j softplus(x.w_j + c_j) = log prod_j 1/(1-P(h_j|x));
    scores are divided by the temperature and passed through a softmax.
    """
    if len(components) == 0:
        raise ParameterError("need at least one component")
    if temperature <= 0:
        raise ParameterError("temperature must be positive")
    V = components[0].n_visible
    if any(c.n_visible != V for c in components):
        raise DimensionError("components must share the visible dimension")
    x = np.asarray(visible, dtype=np.float64)
    scores = np.stack(
        [_kernels.softplus(x @ c.weights + c.hidden_bias).sum(axis=-1) for c in components],
        axis=-1,
    ) / temperature
    return np.exp(scores - logsumexp(scores, axis=-1, keepdims=True))


@dataclass
class ProbeResult:
    train_accuracy: float
    test_accuracy: float


def linear_probe(train_features, train_labels, test_features, test_labels,
                 n_classes=None, iterations=500, learning_rate=0.5, l2=1e-4):
    """Multinomial logistic regression by full-batch gradient descent.

    Features are standardized with the training statistics; the weights start
    at zero, so the result is deterministic.
    """
    Xtr = np.asarray(train_features, dtype=np.float64)
    Xte = np.asarray(test_features, dtype=np.float64)
    ytr = np.asarray(train_labels, dtype=np.int64)
    yte = np.asarray(test_labels, dtype=np.int64)
    if Xtr.shape[0] != ytr.shape[0] or Xte.shape[0] != yte.shape[0]:
        raise DimensionError("feature and label counts differ")
    if Xtr.shape[1] != Xte.shape[1]:
        raise DimensionError("train and test features have different widths")
    K = int(n_classes or max(ytr.max(), yte.max()) + 1)
    mu = Xtr.mean(axis=0)
    sd = Xtr.std(axis=0)
    sd[sd < 1e-8] = 1.0
    Xtr = (Xtr - mu) / sd
    Xte = (Xte - mu) / sd
    N, D = Xtr.shape
    Y = np.eye(K)[ytr]
    W = np.zeros((D, K))
    bias = np.zeros(K)
    for _ in range(iterations):
        logits = Xtr @ W + bias
        P = np.exp(logits - logsumexp(logits, axis=1, keepdims=True))
        G = (P - Y) / N
        W -= learning_rate * (Xtr.T @ G + l2 * W)
        bias -= learning_rate * G.sum(axis=0)
    train_acc = float(np.mean(np.argmax(Xtr @ W + bias, axis=1) == ytr))
    test_acc = float(np.mean(np.argmax(Xte @ W + bias, axis=1) == yte))
    return ProbeResult(train_acc, test_acc)


@dataclass
class EvalReport:
    entries: dict = field(default_factory=dict)

    def __setitem__(self, key, value):
        self.entries[key] = value

    def __getitem__(self, key):
        return self.entries[key]

    def to_keyvalue(self):
        lines = []
        for key in sorted(self.entries):
            value = self.entries[key]
            if isinstance(value, float):
                value = repr(value)
            lines.append(f"{key}={value}")
        return "\n".join(lines) + "\n"

    def to_text(self):
        width = max((len(k) for k in self.entries), default=0)
        lines = ["Evaluation report", "=" * 17]
        for key in sorted(self.entries):
            value = self.entries[key]
            shown = f"{value:.6g}" if isinstance(value, float) else str(value)
            lines.append(f"{key.ljust(width)}  {shown}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def parse_keyvalue(text):
        out = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, _, value = line.partition("=")
            out[key] = value
        return out
