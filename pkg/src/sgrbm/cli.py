"""Command-line interface: ``sgrbm {train,eval,visualize,sample}``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failure.
"""
import argparse
import json
import logging
import os
import sys
from dataclasses import asdict

import numpy as np

from . import checkpoint as ckpt
from .ais import AisConfig, ais_log_partition, base_bias_from_data
from .config import _shape, load_config, load_eval_config
from .data import PatchSpec, extract_patches, load_idx, load_pgm_directory, write_pgm
from .dbm import FantasyParticles, gibbs_sweep, greedy_pretrain, mean_field_posterior
from .errors import InputError, NumericalError, UnsupportedOperation
from .images import filter_grid, mosaic
from .metrics import EvalReport, avg_test_log_prob, representation_sparseness
from .oracle import ENUMERATION_BUDGET, exact_log_partition
from .rbm import (
    TrainConfig,
    gibbs_step,
    GibbsState,
    init_params,
    visible_probabilities,
)
from .regularizer import Grouping
from .training import train_dbm, train_rbm

log = logging.getLogger("sgrbm")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


# -- train -------------------------------------------------------------------

def _load_training_data(cfg):
    d = cfg.data
    if d["format"] == "idx":
        ds = load_idx(d["images"], d["labels"])
        return ds.subset(d["count"], d["subset_seed"])
    images = load_pgm_directory(d["pgm_dir"])
    spec = PatchSpec(images, d["patch_size"], d["patch_count"], d["whitening"], d["zca_epsilon"])
    return extract_patches(spec, np.random.default_rng([cfg.seed, 1]))


def _meta(cfg, dataset):
    shape = cfg.image_shape or dataset.metadata.get("shape")
    return {
        "seed": cfg.seed,
        "image_shape": list(shape) if shape else None,
        "train": asdict(cfg.train),
        "regularizer": asdict(cfg.regularizer),
        "regularizer2": asdict(cfg.regularizer2) if cfg.model_type == "dbm" else None,
        "data_items": len(dataset),
        "preprocessing": list(dataset.metadata.get("preprocessing", ())),
    }


def cmd_train(args):
    cfg = load_config(args.config, seed_override=args.seed_override, data_override=args.data)
    out = args.out or cfg.output
    os.makedirs(out, exist_ok=True)
    dataset = _load_training_data(cfg)
    meta = _meta(cfg, dataset)
    rng = np.random.default_rng(cfg.seed)
    items = dataset.items
    telemetry_path = os.path.join(out, "telemetry.jsonl")
    with open(telemetry_path, "w", encoding="utf-8") as tel:
        def record(rec):
            tel.write(json.dumps(rec, sort_keys=True) + "\n")
            tel.flush()

        if cfg.model_type == "rbm":
            return _train_rbm(cfg, items, meta, rng, out, record)
        return _train_dbm(cfg, items, meta, rng, out, record)


def _train_rbm(cfg, items, meta, rng, out, record):
    params = init_params(items.shape[1], cfg.hidden, rng, cfg.visible_type, cfg.train.init_std, items)
    grouping = Grouping.uniform(cfg.hidden, cfg.regularizer.group_size)

    def on_epoch_end(p, state):
        if cfg.save_interval and state.epoch % cfg.save_interval == 0:
            ckpt.save_rbm(os.path.join(out, f"epoch_{state.epoch:04d}.sgrbm"), p, state, rng,
                          grouping, meta)

    try:
        params, state = train_rbm(params, items, cfg.train, cfg.regularizer, grouping, rng,
                                  telemetry=record, on_epoch_end=on_epoch_end)
    except NumericalError as err:
        good, state = err.last_good
        ckpt.save_rbm(os.path.join(out, "last_good.sgrbm"), good, state, rng, grouping, meta)
        raise
    path = os.path.join(out, "final.sgrbm")
    ckpt.save_rbm(path, params, state, rng, grouping, meta)
    log.info("wrote %s", path)
    return EXIT_OK


def _train_dbm(cfg, items, meta, rng, out, record):
    pre = TrainConfig(**{**asdict(cfg.train), "epochs": cfg.pretrain_epochs})
    params, _ = greedy_pretrain(items, (cfg.hidden, cfg.hidden2), pre, cfg.regularizer,
                                cfg.regularizer2, rng, telemetry=record)
    g1 = Grouping.uniform(cfg.hidden, cfg.regularizer.group_size)
    g2 = Grouping.uniform(cfg.hidden2, cfg.regularizer2.group_size)

    def on_epoch_end(p, state):
        if cfg.save_interval and state.epoch % cfg.save_interval == 0:
            ckpt.save_dbm(os.path.join(out, f"epoch_{state.epoch:04d}.sgdbm"), p, state, rng,
                          (g1, g2), None, meta)

    try:
        params, state, particles = train_dbm(
            params, items, cfg.train, cfg.regularizer, cfg.regularizer2, g1, g2, rng,
            n_particles=cfg.particles, telemetry=record, on_epoch_end=on_epoch_end,
            tol=cfg.mean_field_tol, max_iters=cfg.mean_field_max_iters,
        )
    except NumericalError as err:
        good, state = err.last_good
        ckpt.save_dbm(os.path.join(out, "last_good.sgdbm"), good, state, rng, (g1, g2), None, meta)
        raise
    ckpt.save_dbm(os.path.join(out, "final.sgdbm"), params, state, rng, (g1, g2), particles, meta)
    return EXIT_OK


# -- eval --------------------------------------------------------------------

EVAL_DEFAULTS = {
    "exact": None,  # None: exact when enumerable
    "ais": False,
    "ais_temperatures": 10_000,
    "ais_chains": 100,
    "ais_schedule": "linear",
    "sparseness": True,
    "seed": 0,
    "count": None,
}


def _load_checkpoint(path):
    if not os.path.isfile(path):
        raise InputError(f"checkpoint not found: {path}")
    return ckpt.load(path)


def run_eval(cp, dataset, options):
    report = EvalReport()
    opts = {**EVAL_DEFAULTS, **options}
    data = dataset.subset(opts["count"], opts["seed"]).items if opts["count"] else dataset.items
    report["n_examples"] = int(data.shape[0])
    report["model"] = cp.kind
    if cp.kind == "dbm":
        if opts["ais"] or opts["exact"]:
            raise UnsupportedOperation("log-partition estimates are not available for DBMs")
        if opts["sparseness"]:
            mf = mean_field_posterior(cp.params, data)
            for name, mu in (("layer1", mf.mu1), ("layer2", mf.mu2)):
                rep = representation_sparseness(None, None, features=mu)
                report[f"sparseness_{name}_mean"] = rep.mean
                report[f"sparseness_{name}_min"] = rep.min
                report[f"sparseness_{name}_max"] = rep.max
            report["mean_field_converged_fraction"] = float(np.mean(mf.converged))
        return report

    params = cp.params
    enumerable = params.n_visible + params.n_hidden <= ENUMERATION_BUDGET
    want_exact = opts["exact"] if opts["exact"] is not None else enumerable and params.visible_type == "binary"
    if (want_exact or opts["ais"]) and params.visible_type != "binary":
        raise UnsupportedOperation("partition-function estimates need binary visible units")
    log_z = None
    if want_exact:
        log_z = exact_log_partition(params)
        report["log_z_exact"] = log_z
        report["log_z_method"] = "exact"
    if opts["ais"]:
        est = ais_log_partition(
            params,
            AisConfig(opts["ais_temperatures"], opts["ais_chains"], opts["ais_schedule"],
                      base_bias_from_data(data)),
            opts["seed"],
        )
        report["log_z_ais"] = est.log_z_mean
        report["log_z_ais_ci_low"] = est.log_z_ci_low
        report["log_z_ais_ci_high"] = est.log_z_ci_high
        report["ais_effective_sample_size"] = est.effective_sample_size
        report["ais_temperatures"] = int(opts["ais_temperatures"])
        report["ais_chains"] = int(opts["ais_chains"])
        if log_z is None:
            log_z = est.log_z_mean
            report["log_z_method"] = "ais"
    if log_z is not None:
        report["log_z"] = log_z
        report["avg_test_log_prob"] = avg_test_log_prob(params, data, log_z)
    if opts["sparseness"]:
        rep = representation_sparseness(params, data)
        report["sparseness_mean"] = rep.mean
        report["sparseness_min"] = rep.min
        report["sparseness_max"] = rep.max
    return report


def cmd_eval(args):
    cp = _load_checkpoint(args.checkpoint)
    options = load_eval_config(args.config) if args.config else {}
    if args.seed_override is not None:
        options["seed"] = args.seed_override
    if args.data is None:
        raise InputError("--data (IDX image file) is required for eval")
    dataset = load_idx(args.data, args.labels)
    report = run_eval(cp, dataset, options)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(report.to_text())
    with open(os.path.join(out, "report.kv"), "w", encoding="utf-8") as fh:
        fh.write(report.to_keyvalue())
    sys.stdout.write(report.to_text())
    return EXIT_OK


# -- visualize / sample --------------------------------------------------------

def _image_shape(cp, override):
    if override:
        return _shape(override)
    shape = cp.meta.get("image_shape")
    if not shape:
        raise InputError("image shape unknown; pass --shape ROWSxCOLS")
    return tuple(shape)


def cmd_visualize(args):
    cp = _load_checkpoint(args.checkpoint)
    shape = _image_shape(cp, args.shape)
    weights = cp.params.weights if cp.kind == "rbm" else cp.params.w1
    group_size, order = 1, None
    if cp.groupings:
        g = cp.groupings[0]
        group_size = max(len(m) for m in g.groups)
        order = np.concatenate(g.groups)
    img = filter_grid(weights, shape, group_size, args.group_columns, order)
    write_pgm(args.out, img)
    return EXIT_OK


def sample_frames(cp, chains, steps, thin, rng):
    """(chains, snapshots, V) visible probabilities; snapshot 0 is the
    random binary start."""
    if thin < 1:
        raise InputError("--thin must be >= 1")
    if cp.kind == "rbm":
        params = cp.params
        if params.visible_type != "binary":
            raise UnsupportedOperation("sampling mosaics need binary visible units")
        x = (rng.random((chains, params.n_visible)) < 0.5).astype(np.float64)
        state = GibbsState(x, None, None)
        frames = [x]
        for t in range(1, steps + 1):
            state = gibbs_step(params, state, rng)
            if t % thin == 0:
                frames.append(visible_probabilities(params, state.hidden))
    else:
        params = cp.params
        V, H1, H2 = params.sizes
        parts = FantasyParticles.random(params, chains, rng)
        frames = [parts.x]
        for t in range(1, steps + 1):
            parts = gibbs_sweep(params, parts, rng)
            if t % thin == 0:
                frames.append(1.0 / (1.0 + np.exp(-(parts.h1 @ params.w1.T + params.b))))
    return np.stack(frames, axis=1)


def cmd_sample(args):
    cp = _load_checkpoint(args.checkpoint)
    shape = _image_shape(cp, args.shape)
    seed = args.seed_override if args.seed_override is not None else cp.meta.get("seed", 0)
    frames = sample_frames(cp, args.chains, args.steps, args.thin, np.random.default_rng(seed))
    write_pgm(args.out, mosaic(frames, shape))
    return EXIT_OK


# -- entry point ---------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="sgrbm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train an RBM, sparse group RBM or DBM from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--data", help="override the training data path from the config")
    p.add_argument("--out", help="output directory (default: [run] output)")
    p.add_argument("--seed-override", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="log Z, test log-probability and sparseness of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", help="IDX image file to evaluate on")
    p.add_argument("--labels", help="optional IDX label file")
    p.add_argument("--config", help="file with an [eval] section")
    p.add_argument("--out", help="report directory (default: .)")
    p.add_argument("--seed-override", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("visualize", help="write learned filters as a PGM tile grid")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--shape", help="visible layout ROWSxCOLS (default: from checkpoint)")
    p.add_argument("--group-columns", type=int, help="group cells per row of the grid")
    p.set_defaults(func=cmd_visualize)

    p = sub.add_parser("sample", help="write Gibbs samples as a PGM mosaic")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--chains", type=int, default=10)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--thin", type=int, default=100)
    p.add_argument("--shape")
    p.add_argument("--seed-override", type=int)
    p.set_defaults(func=cmd_sample)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except NumericalError as err:
        print(f"sgrbm: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, OSError) as err:
        print(f"sgrbm: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
