"""Epoch loops for RBMs and DBMs with optional per-batch telemetry."""
import time

import numpy as np

from .data import minibatches
from .dbm import DbmOptimizerState, FantasyParticles, dbm_train_step, mean_field_posterior
from .errors import NumericalError
from .rbm import OptimizerState, apply_update, hidden_probabilities, visible_probabilities
from .regularizer import mixed_norm_penalty, regularized_cd_gradient


def _epoch_seed(rng):
    return int(rng.integers(2**63 - 1))


def train_rbm(params, data, config, reg, grouping, rng, telemetry=None, opt_state=None,
              layer=None, on_epoch_end=None):
    """Run ``config.epochs`` epochs of (regularized) CD-k.

    ``telemetry`` receives one dict per batch. ``on_epoch_end(params,
    opt_state)`` is called after each epoch. On a numerical failure the raised
    ``NumericalError`` carries ``last_good = (params, opt_state_epoch)``.
    Returns (params, opt_state).
    """
    items = np.asarray(data, dtype=np.float64)
    if opt_state is None:
        opt_state = OptimizerState.for_params(params)
    t0 = time.perf_counter()
    while opt_state.epoch < config.epochs:
        epoch = opt_state.epoch
        seed = _epoch_seed(rng)
        for b, batch in enumerate(minibatches(items, config.batch_size, seed)):
            grad = regularized_cd_gradient(params, batch, config.cd_steps, grouping, reg, rng)
            try:
                new = apply_update(params, grad, opt_state, config)
            except NumericalError as err:
                err.last_good = (params, opt_state)
                raise
            if telemetry is not None:
                p = hidden_probabilities(params, batch)
                recon = visible_probabilities(params, p)
                record = {
                    "epoch": epoch,
                    "batch": b,
                    "reconstruction_error": float(((batch - recon) ** 2).sum(axis=1).mean()),
                    "penalty": float(np.mean(mixed_norm_penalty(p, grouping))),
                    "mean_activation": float(p.mean()),
                    "wall_time": time.perf_counter() - t0,
                }
                if layer is not None:
                    record["layer"] = layer
                telemetry(record)
            params = new
        opt_state.epoch += 1
        if on_epoch_end is not None:
            on_epoch_end(params, opt_state)
    return params, opt_state


def train_dbm(params, data, config, reg1, reg2, grouping1, grouping2, rng, n_particles=100,
              telemetry=None, opt_state=None, particles=None, on_epoch_end=None,
              tol=1e-6, max_iters=50):
    """Stochastic-approximation training with persistent fantasy particles."""
    items = np.asarray(data, dtype=np.float64)
    if opt_state is None:
        opt_state = DbmOptimizerState.for_params(params)
    if particles is None:
        particles = FantasyParticles.random(params, n_particles, rng)
    t0 = time.perf_counter()
    while opt_state.epoch < config.epochs:
        epoch = opt_state.epoch
        seed = _epoch_seed(rng)
        for b, batch in enumerate(minibatches(items, config.batch_size, seed)):
            try:
                new, particles = dbm_train_step(
                    params, batch, particles, grouping1, grouping2, config, reg1, reg2,
                    opt_state, rng, tol, max_iters,
                )
            except NumericalError as err:
                err.last_good = (params, opt_state)
                raise
            if telemetry is not None:
                mf = mean_field_posterior(params, batch, tol, max_iters)
                recon = 1.0 / (1.0 + np.exp(-(mf.mu1 @ params.w1.T + params.b)))
                telemetry({
                    "epoch": epoch,
                    "batch": b,
                    "reconstruction_error": float(((batch - recon) ** 2).sum(axis=1).mean()),
                    "penalty": float(np.mean(mixed_norm_penalty(mf.mu1, grouping1))),
                    "mean_activation": float(mf.mu1.mean()),
                    "wall_time": time.perf_counter() - t0,
                    "layer": "dbm",
                })
            params = new
        opt_state.epoch += 1
        if on_epoch_end is not None:
            on_epoch_end(params, opt_state)
    return params, opt_state, particles
