"""Experiment configuration: JSON loading, schema validation, assembly.

A config is one JSON object (schema shipped with the package).  Syntax
errors surface with line and column; schema violations surface with the
JSON path of the offending value.
"""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from importlib import resources

import jsonschema

from . import freegroup as fg
from . import rose
from . import tree as treemod
from . import walk


class ConfigError(ValueError):
    """Invalid configuration, with file/path context in the message."""


def _schema():
    path = resources.files("outwalk.schema").joinpath("experiment.schema.json")
    return json.loads(path.read_text())


def load_config(path):
    """Read, parse, and schema-validate a config file."""
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc)) from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("%s: line %d column %d: %s"
                          % (path, exc.lineno, exc.colno, exc.msg)) from exc
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError("%s: at %s: %s" % (path, e.json_path, e.message))
    _cross_validate(path, cfg)
    return cfg


def _cross_validate(path, cfg):
    mode = cfg["mode"]
    for i, atom in enumerate(cfg["measure"]):
        has_word = "word" in atom
        if mode == "tree" and not has_word:
            raise ConfigError("%s: at $.measure[%d]: tree mode needs word atoms"
                              % (path, i))
        if mode == "outer" and has_word:
            raise ConfigError("%s: at $.measure[%d]: outer mode needs trace atoms"
                              % (path, i))
    cps = cfg["checkpoints"]
    if isinstance(cps, list):
        if sorted(set(cps)) != cps or cps[-1] > cfg["horizon"]:
            raise ConfigError("%s: at $.checkpoints: must be strictly increasing "
                              "and end at or before the horizon" % path)


def parse_weight(w):
    if isinstance(w, str):
        value = float(Fraction(w))
    else:
        value = float(w)
    if value <= 0:
        raise ConfigError("weights must be positive")
    return value


def build_measure(cfg):
    rank = cfg["rank"]
    weights = [parse_weight(a["weight"]) for a in cfg["measure"]]
    if cfg["mode"] == "outer":
        atoms = [fg.from_trace(rank, a["trace"]) for a in cfg["measure"]]
    else:
        atoms = []
        for a in cfg["measure"]:
            w = fg.parse_word(a["word"])
            fg.check_rank(w, rank)
            atoms.append(w)
    try:
        return walk.MeasureSpec(atoms, weights)
    except ValueError as exc:
        raise ConfigError("invalid measure: %s" % exc) from exc


def resolve_checkpoints(cfg):
    cps = cfg["checkpoints"]
    horizon = cfg["horizon"]
    if isinstance(cps, dict):
        every = cps["every"]
        out = list(range(every, horizon + 1, every))
        if not out or out[-1] != horizon:
            out.append(horizon)
        return tuple(out)
    return tuple(cps)


def build_tracked(cfg):
    tracked = cfg.get("tracked", [])
    if cfg["mode"] == "outer":
        out = []
        for t in tracked:
            w = fg.parse_word(t)
            fg.check_rank(w, cfg["rank"])
            out.append(w)
        return tuple(out)
    return tuple(treemod.parse_boundary(t) for t in tracked)


def build_walk_config(cfg, seed_override=None):
    seed = cfg["seed"] if seed_override is None else seed_override
    kwargs = {}
    if "max_word_letters" in cfg:
        kwargs["max_word_letters"] = cfg["max_word_letters"]
    if "spot_check_rate" in cfg:
        kwargs["spot_check_rate"] = cfg["spot_check_rate"]
    try:
        return walk.WalkConfig(
            horizon=cfg["horizon"], trials=cfg["trials"], master_seed=int(seed),
            checkpoints=resolve_checkpoints(cfg),
            tracked_classes=build_tracked(cfg), **kwargs)
    except ValueError as exc:
        raise ConfigError("invalid walk settings: %s" % exc) from exc


def build_rose_points(cfg):
    """Rose points for the distance command."""
    section = cfg.get("distance")
    if not section:
        raise ConfigError("config has no distance section")
    rank = cfg["rank"]
    pts = []
    for entry in section["points"]:
        lengths = [Fraction(x) if isinstance(x, str) else x
                   for x in entry["lengths"]]
        if len(lengths) != rank:
            raise ConfigError("distance point needs %d lengths" % rank)
        marking = fg.from_trace(rank, entry["marking_trace"]) \
            if entry.get("marking_trace") else fg.Automorphism.identity(rank)
        pts.append(rose.rose_point(lengths, marking))
    return pts


DEFAULT_TOLERANCES = {
    "drift_interval": [0.48, 0.52],
    "variance_interval": [0.67, 0.83],
    "ks_p_min": 0.01,
    "class_spread_max": 0.05,
    "gap_ratio_tol": 0.20,
    "deviation_final_max": 0.05,
    "variance_ratio_interval": [0.7, 1.4],
}


def tolerances(cfg):
    out = dict(DEFAULT_TOLERANCES)
    out.update(cfg.get("tolerances", {}))
    return out


def config_hash(cfg):
    """Stable hash of the canonical JSON form."""
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()
