"""Versioned binary checkpoints.

Layout::

    magic      6 bytes   b"SGRBM1" (RBM) or b"SGDBM1" (two-layer DBM)
    newline    1 byte
    hlen       uint32, little-endian
    header     hlen bytes of UTF-8 JSON (sorted keys): dimensions, unit
               types, epoch/step counters, RNG state, grouping, configs and
               an array table [{name, shape, offset, nbytes}]
    payload    concatenated little-endian float64 arrays (C order); offsets
               in the table are relative to the payload start

Files are written to a temporary name and renamed, so an interrupted write
never replaces the previous checkpoint.
"""
import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .dbm import DbmOptimizerState, DbmParams, FantasyParticles
from .errors import ParseError
from .rbm import OptimizerState, RbmParams
from .regularizer import Grouping

RBM_MAGIC = b"SGRBM1"
DBM_MAGIC = b"SGDBM1"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    kind: str
    params: object
    opt_state: object = None
    rng_state: dict | None = None
    groupings: list = field(default_factory=list)
    particles: FantasyParticles | None = None
    meta: dict = field(default_factory=dict)

    def rng(self):
        """A Generator restored to the saved state (fresh PCG64 if none saved)."""
        gen = np.random.Generator(np.random.PCG64())
        if self.rng_state is not None:
            gen.bit_generator.state = self.rng_state
        return gen


def _encode(magic, header, arrays):
    table, chunks, offset = [], [], 0
    for name, arr in arrays:
        data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        table.append({"name": name, "shape": list(np.shape(arr)), "offset": offset, "nbytes": len(data)})
        chunks.append(data)
        offset += len(data)
    header = dict(header, arrays=table, version=FORMAT_VERSION)
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return magic + b"\n" + struct.pack("<I", len(blob)) + blob + b"".join(chunks)


def _atomic_write(path, payload):
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def _opt_arrays(opt_state, names):
    if opt_state is None:
        return []
    if isinstance(opt_state, OptimizerState):
        return [
            ("velocity_weights", opt_state.velocity_weights),
            ("velocity_visible", opt_state.velocity_visible),
            ("velocity_hidden", opt_state.velocity_hidden),
        ]
    return [(f"velocity_{n}", opt_state.velocity[n]) for n in names]


def save_rbm(path, params, opt_state=None, rng=None, grouping=None, meta=None):
    header = {
        "model": "rbm",
        "n_visible": params.n_visible,
        "n_hidden": params.n_hidden,
        "visible_type": params.visible_type,
        "hidden_type": "binary",
        "epoch": opt_state.epoch if opt_state else 0,
        "step": opt_state.step if opt_state else 0,
        "has_optimizer": opt_state is not None,
        "rng_state": rng.bit_generator.state if rng is not None else None,
        "groupings": [grouping.group_of.tolist()] if grouping is not None else [],
        "meta": meta or {},
    }
    arrays = [
        ("weights", params.weights),
        ("visible_bias", params.visible_bias),
        ("hidden_bias", params.hidden_bias),
    ] + _opt_arrays(opt_state, None)
    _atomic_write(path, _encode(RBM_MAGIC, header, arrays))


def save_dbm(path, params, opt_state=None, rng=None, groupings=(), particles=None, meta=None):
    V, H1, H2 = params.sizes
    names = list(params.arrays())
    header = {
        "model": "dbm",
        "layers": 2,
        "sizes": [V, H1, H2],
        "visible_type": "binary",
        "hidden_type": "binary",
        "epoch": opt_state.epoch if opt_state else 0,
        "step": opt_state.step if opt_state else 0,
        "has_optimizer": opt_state is not None,
        "has_particles": particles is not None,
        "rng_state": rng.bit_generator.state if rng is not None else None,
        "groupings": [g.group_of.tolist() for g in groupings],
        "meta": meta or {},
    }
    arrays = list(params.arrays().items()) + _opt_arrays(opt_state, names)
    if particles is not None:
        arrays += [("particles_x", particles.x), ("particles_h1", particles.h1),
                   ("particles_h2", particles.h2)]
    _atomic_write(path, _encode(DBM_MAGIC, header, arrays))


def load(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    magic = raw[:6]
    if magic not in (RBM_MAGIC, DBM_MAGIC) or raw[6:7] != b"\n":
        raise ParseError(f"{path}: not an SGRBM1/SGDBM1 checkpoint", offset=0)
    if len(raw) < 11:
        raise ParseError(f"{path}: truncated checkpoint header", offset=len(raw))
    (hlen,) = struct.unpack("<I", raw[7:11])
    start = 11 + hlen
    if len(raw) < start:
        raise ParseError(f"{path}: truncated checkpoint header", offset=len(raw))
    try:
        header = json.loads(raw[11:start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise ParseError(f"{path}: corrupt checkpoint header ({err})", offset=11) from None
    if header.get("version") != FORMAT_VERSION:
        raise ParseError(f"{path}: unsupported checkpoint version {header.get('version')}", offset=11)
    arrays = {}
    for entry in header["arrays"]:
        a = start + entry["offset"]
        if len(raw) < a + entry["nbytes"]:
            raise ParseError(f"{path}: truncated array {entry['name']}", offset=len(raw))
        arrays[entry["name"]] = (
            np.frombuffer(raw, dtype="<f8", count=entry["nbytes"] // 8, offset=a)
            .reshape(entry["shape"]).astype(np.float64)
        )
    groupings = [Grouping.from_group_of(g) for g in header["groupings"]]
    common = dict(rng_state=header["rng_state"], groupings=groupings, meta=header["meta"])
    if magic == RBM_MAGIC:
        params = RbmParams(arrays["weights"], arrays["visible_bias"], arrays["hidden_bias"],
                           header["visible_type"])
        opt = None
        if header["has_optimizer"]:
            opt = OptimizerState(arrays["velocity_weights"], arrays["velocity_visible"],
                                 arrays["velocity_hidden"], header["epoch"], header["step"])
        return Checkpoint("rbm", params, opt, **common)
    params = DbmParams(*(arrays[n] for n in ("w1", "w2", "b", "c1", "c2")))
    opt = None
    if header["has_optimizer"]:
        opt = DbmOptimizerState({n: arrays[f"velocity_{n}"] for n in params.arrays()},
                                header["epoch"], header["step"])
    particles = None
    if header["has_particles"]:
        particles = FantasyParticles(arrays["particles_x"], arrays["particles_h1"],
                                     arrays["particles_h2"])
    return Checkpoint("dbm", params, opt, particles=particles, **common)
