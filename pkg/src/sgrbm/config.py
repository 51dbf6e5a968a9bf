"""Run configuration files.

Grammar: INI-style sections in square brackets, one ``key = value`` per line,
``#`` or ``;`` starts a comment line. Keys are fixed per section (unknown keys
are rejected). Relative paths resolve against the config file's directory.
The ``[run] seed`` key is mandatory.

    [run]        seed, output, save_interval
    [model]      type (rbm|dbm), hidden, hidden2, visible_type, image_shape (RxC)
    [regularizer] kind, lambda, group_size, epsilon, lambda2, group_size2,
                 baseline_target, baseline_target_mode (probability|count),
                 baseline_weight
    [optimizer]  learning_rate, momentum_initial, momentum_final,
                 momentum_switch_epoch, weight_decay, cd_steps, epochs,
                 batch_size, init_std, pretrain_epochs, particles,
                 mean_field_tol, mean_field_max_iters
    [data]       format (idx|pgm-patches), images, labels, count, subset_seed,
                 pgm_dir, patch_size, patch_count, whitening, zca_epsilon
    [eval]       exact, ais, ais_temperatures, ais_chains, ais_schedule,
                 sparseness, seed, count
"""
import configparser
import os
from dataclasses import dataclass, field

from .errors import ConfigurationError
from .rbm import TrainConfig
from .regularizer import RegularizerConfig


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _shape(text):
    parts = text.lower().replace(" ", "").split("x")
    if len(parts) != 2:
        raise ValueError(f"expected ROWSxCOLS, got {text!r}")
    r, c = (int(p) for p in parts)
    if r < 1 or c < 1:
        raise ValueError("image dimensions must be positive")
    return (r, c)


def _choice(*options):
    def parse(text):
        text = text.strip()
        if text not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return text
    return parse


PATH = "path"
OPTIONAL_INT = "optional-int"

SCHEMA = {
    "run": {"seed": int, "output": PATH, "save_interval": int},
    "model": {
        "type": _choice("rbm", "dbm"),
        "hidden": int,
        "hidden2": int,
        "visible_type": _choice("binary", "gaussian"),
        "image_shape": _shape,
    },
    "regularizer": {
        "kind": _choice("sparse_group", "sparse_rbm_baseline", "none"),
        "lambda": float,
        "group_size": int,
        "epsilon": float,
        "lambda2": float,
        "group_size2": int,
        "baseline_target": float,
        "baseline_target_mode": _choice("probability", "count"),
        "baseline_weight": float,
    },
    "optimizer": {
        "learning_rate": float,
        "momentum_initial": float,
        "momentum_final": float,
        "momentum_switch_epoch": int,
        "weight_decay": float,
        "cd_steps": int,
        "epochs": int,
        "batch_size": int,
        "init_std": float,
        "pretrain_epochs": int,
        "particles": int,
        "mean_field_tol": float,
        "mean_field_max_iters": int,
    },
    "data": {
        "format": _choice("idx", "pgm-patches"),
        "images": PATH,
        "labels": PATH,
        "count": OPTIONAL_INT,
        "subset_seed": int,
        "pgm_dir": PATH,
        "patch_size": int,
        "patch_count": int,
        "whitening": _choice("zca", "assume-prewhitened"),
        "zca_epsilon": float,
    },
    "eval": {
        "exact": _bool,
        "ais": _bool,
        "ais_temperatures": int,
        "ais_chains": int,
        "ais_schedule": _choice("linear", "geometric-tail"),
        "sparseness": _bool,
        "seed": int,
        "count": OPTIONAL_INT,
    },
}


@dataclass
class RunConfig:
    seed: int
    output: str
    save_interval: int = 0
    model_type: str = "rbm"
    hidden: int = 64
    hidden2: int = 0
    visible_type: str = "binary"
    image_shape: tuple | None = None
    regularizer: RegularizerConfig = field(default_factory=RegularizerConfig)
    regularizer2: RegularizerConfig | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    pretrain_epochs: int = 0
    particles: int = 100
    mean_field_tol: float = 1e-6
    mean_field_max_iters: int = 50
    data: dict = field(default_factory=dict)
    eval: dict = field(default_factory=dict)
    source: str | None = None


def _read_raw(text, where):
    parser = configparser.ConfigParser(
        interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=None,
        delimiters=("=",),
    )
    parser.optionxform = str
    try:
        parser.read_string(text, source=where)
    except configparser.Error as err:
        raise ConfigurationError(f"{where}: {err}") from None
    return parser


def _typed(parser, base_dir, where):
    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigurationError(f"{where}: unknown section [{section}]")
        for key, raw in parser.items(section):
            kind = SCHEMA[section].get(key)
            if kind is None:
                raise ConfigurationError(f"{where}: [{section}] {key}: unknown key")
            raw = raw.strip()
            try:
                if kind is PATH:
                    value = os.path.normpath(os.path.join(base_dir, os.path.expanduser(raw)))
                elif kind is OPTIONAL_INT:
                    value = None if raw.lower() in ("", "all", "none") else int(raw)
                else:
                    value = kind(raw)
            except ValueError as err:
                raise ConfigurationError(f"{where}: [{section}] {key}: {err}") from None
            values[(section, key)] = value
    return values


def parse_config(text, base_dir=".", where="<config>", check_paths=True, seed_override=None):
    values = _typed(_read_raw(text, where), base_dir, where)

    def get(section, key, default=None):
        return values.get((section, key), default)

    def fail(section, key, msg):
        raise ConfigurationError(f"{where}: [{section}] {key}: {msg}")

    seed = seed_override if seed_override is not None else get("run", "seed")
    if seed is None:
        fail("run", "seed", "missing (a seed is mandatory)")

    try:
        reg = RegularizerConfig(
            kind=get("regularizer", "kind", "none"),
            lam=get("regularizer", "lambda", 0.1),
            group_size=get("regularizer", "group_size", 3),
            epsilon=get("regularizer", "epsilon", 1e-8),
            baseline_target=get("regularizer", "baseline_target", 0.02),
            baseline_target_is_count=get("regularizer", "baseline_target_mode", "probability") == "count",
            baseline_weight=get("regularizer", "baseline_weight", 0.02),
        )
        reg2 = RegularizerConfig(
            kind=reg.kind,
            lam=get("regularizer", "lambda2", reg.lam),
            group_size=get("regularizer", "group_size2", reg.group_size),
            epsilon=reg.epsilon,
        )
    except ConfigurationError as err:
        raise ConfigurationError(f"{where}: {err}") from None

    visible_type = get("model", "visible_type", "binary")
    train = TrainConfig(
        learning_rate=get("optimizer", "learning_rate", 0.05 if visible_type == "binary" else 0.001),
        momentum_initial=get("optimizer", "momentum_initial", 0.5),
        momentum_final=get("optimizer", "momentum_final", 0.9),
        momentum_switch_epoch=get("optimizer", "momentum_switch_epoch", 5),
        weight_decay=get("optimizer", "weight_decay", 2e-4),
        cd_steps=get("optimizer", "cd_steps", 1),
        epochs=get("optimizer", "epochs", 50),
        batch_size=get("optimizer", "batch_size", 100),
        init_std=get("optimizer", "init_std", 0.01),
        visible_type=visible_type,
    )
    for key in ("cd_steps", "batch_size"):
        if getattr(train, key) < 1:
            fail("optimizer", key, "must be >= 1")
    if train.epochs < 0:
        fail("optimizer", "epochs", "must be >= 0")
    if train.learning_rate <= 0:
        fail("optimizer", "learning_rate", "must be positive")

    model_type = get("model", "type", "rbm")
    hidden = get("model", "hidden")
    if hidden is None or hidden < 1:
        fail("model", "hidden", "missing or not positive")
    hidden2 = get("model", "hidden2", 0)
    if model_type == "dbm":
        if hidden2 < 1:
            fail("model", "hidden2", "a DBM needs a positive second hidden layer size")
        if visible_type != "binary":
            fail("model", "visible_type", "DBMs support binary visible units only")

    data = {
        "format": get("data", "format", "idx"),
        "images": get("data", "images"),
        "labels": get("data", "labels"),
        "count": get("data", "count"),
        "subset_seed": get("data", "subset_seed", 0),
        "pgm_dir": get("data", "pgm_dir"),
        "patch_size": get("data", "patch_size", 14),
        "patch_count": get("data", "patch_count", 100_000),
        "whitening": get("data", "whitening", "zca"),
        "zca_epsilon": get("data", "zca_epsilon", 1e-8),
    }
    evaluation = {
        "exact": get("eval", "exact", False),
        "ais": get("eval", "ais", False),
        "ais_temperatures": get("eval", "ais_temperatures", 10_000),
        "ais_chains": get("eval", "ais_chains", 100),
        "ais_schedule": get("eval", "ais_schedule", "linear"),
        "sparseness": get("eval", "sparseness", True),
        "seed": get("eval", "seed", seed),
        "count": get("eval", "count"),
    }

    cfg = RunConfig(
        seed=seed,
        output=get("run", "output", os.path.normpath(os.path.join(base_dir, "out"))),
        save_interval=get("run", "save_interval", 0),
        model_type=model_type,
        hidden=hidden,
        hidden2=hidden2,
        visible_type=visible_type,
        image_shape=get("model", "image_shape"),
        regularizer=reg,
        regularizer2=reg2,
        train=train,
        pretrain_epochs=get("optimizer", "pretrain_epochs", 0),
        particles=get("optimizer", "particles", 100),
        mean_field_tol=get("optimizer", "mean_field_tol", 1e-6),
        mean_field_max_iters=get("optimizer", "mean_field_max_iters", 50),
        data=data,
        eval=evaluation,
        source=where,
    )
    if check_paths:
        check_data_paths(cfg)
    return cfg


def check_data_paths(cfg):
    where = cfg.source
    d = cfg.data
    if d["format"] == "idx":
        if d["images"] is None:
            raise ConfigurationError(f"{where}: [data] images: required for format=idx")
        for key in ("images", "labels"):
            if d[key] is not None and not os.path.isfile(d[key]):
                raise ConfigurationError(f"{where}: [data] {key}: no such file {d[key]}")
    else:
        if d["pgm_dir"] is None or not os.path.isdir(d["pgm_dir"]):
            raise ConfigurationError(f"{where}: [data] pgm_dir: no such directory {d['pgm_dir']}")


def load_config(path, check_paths=True, seed_override=None, data_override=None):
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigurationError(f"cannot read config {path}: {err.strerror}") from None
    cfg = parse_config(text, os.path.dirname(os.path.abspath(path)), path, check_paths=False,
                       seed_override=seed_override)
    if data_override is not None:
        key = "pgm_dir" if cfg.data["format"] == "pgm-patches" else "images"
        cfg.data[key] = os.path.abspath(data_override)
    if check_paths:
        check_data_paths(cfg)
    return cfg


def load_eval_config(path):
    """Read only the [eval] section (and optionally [run] seed) of a file."""
    path = os.fspath(path)
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigurationError(f"cannot read config {path}: {err.strerror}") from None
    values = _typed(_read_raw(text, path), os.path.dirname(os.path.abspath(path)), path)
    out = {key: value for (section, key), value in values.items() if section == "eval"}
    if ("run", "seed") in values:
        out.setdefault("seed", values[("run", "seed")])
    return out


def recipe_names():
    from importlib import resources

    return sorted(p.name[:-4] for p in resources.files("sgrbm").joinpath("recipes").iterdir()
                  if p.name.endswith(".cfg"))


def recipe_path(name):
    """Filesystem path of a shipped recipe, e.g. ``recipe_path("mnist_desk")``."""
    from importlib import resources

    path = resources.files("sgrbm").joinpath("recipes", f"{name}.cfg")
    if not path.is_file():
        raise ConfigurationError(f"no recipe named {name!r}; known: {', '.join(recipe_names())}")
    return str(path)
