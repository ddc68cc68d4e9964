"""JSON experiment configs: parse, fill task defaults, apply overrides, validate.

Unknown keys are rejected rather than ignored so a typo cannot silently fall
back to a default.
"""
from __future__ import annotations

import copy
import json
import numbers
from typing import Any, Iterable, Optional

from .autodiff import ContractError
from .objectives import DISTANCES, NOISES, PENALTIES
from .pipelines import COMMON_DEFAULTS, SYNTHETIC, TASK_DEFAULTS, TASKS, ExperimentConfig, objective_spec


class ConfigError(ValueError):
    pass


TOP_KEYS = {"task", "seed", "dataset", "architecture", "objective", "optimizer", "epochs", "batch_size",
            "patience", "min_delta", "test_fraction", "options", "record_duration"}
DATASET_KEYS = {"synthetic", "params", "openml_id", "fallback", "path", "image_dir", "target"}
SOURCE_KEYS = ("synthetic", "openml_id", "path", "image_dir")
OBJECTIVE_KEYS = {"distance", "penalties", "corruption", "class_weight"}
PENALTY_KEYS = {"kind", "weight", "rho"}
CORRUPTION_KEYS = {"kind", "sigma", "p"}
OPTIMIZER_KEYS = {"kind", "lr"}
MERGED = ("architecture", "objective", "optimizer", "options")


def _is_int(v) -> bool:
    return isinstance(v, numbers.Integral) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, numbers.Real) and not isinstance(v, bool)


def _check_keys(d, allowed: set, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected an object, got {type(d).__name__}")
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"{where}: unknown key {extra[0]!r} (allowed: {', '.join(sorted(allowed))})")


def _int(d: dict, key: str, where: str, lo: int = None, nullable: bool = False):
    v = d.get(key)
    if v is None and nullable:
        return
    if not _is_int(v) or (lo is not None and v < lo):
        bound = f" >= {lo}" if lo is not None else ""
        name = f"{where}.{key}" if where else key
        raise ConfigError(f"{name}: expected an integer{bound}, got {v!r}")


def _num(d: dict, key: str, where: str, lo=None, hi=None, lo_open=False, hi_open=False, nullable=False):
    v = d.get(key)
    name = f"{where}.{key}" if where else key
    if v is None and nullable:
        return
    if not _is_num(v):
        raise ConfigError(f"{name}: expected a number, got {v!r}")
    if lo is not None and (v < lo or (lo_open and v == lo)):
        raise ConfigError(f"{name}: {v} out of range ({'>' if lo_open else '>='} {lo} required)")
    if hi is not None and (v > hi or (hi_open and v == hi)):
        raise ConfigError(f"{name}: {v} out of range ({'<' if hi_open else '<='} {hi} required)")


def _bool(d: dict, key: str, where: str):
    if not isinstance(d.get(key), bool):
        raise ConfigError(f"{where + '.' if where else ''}{key}: expected true or false, got {d.get(key)!r}")


def _choice(d: dict, key: str, where: str, options, nullable=False):
    v = d.get(key)
    if v is None and nullable:
        return
    if v not in options:
        raise ConfigError(f"{where}.{key}: {v!r} is not one of {', '.join(map(str, options))}")


def _validate_dataset(ds: dict):
    _check_keys(ds, DATASET_KEYS, "dataset")
    present = [k for k in SOURCE_KEYS if k in ds]
    if len(present) != 1:
        raise ConfigError(f"dataset: give exactly one of {', '.join(SOURCE_KEYS)}")
    if "synthetic" in ds:
        _choice(ds, "synthetic", "dataset", sorted(SYNTHETIC))
    if "openml_id" in ds:
        _int(ds, "openml_id", "dataset", lo=1)
    for key in ("path", "image_dir", "target"):
        if key in ds and ds[key] is not None and not isinstance(ds[key], str):
            raise ConfigError(f"dataset.{key}: expected a string")
    if "fallback" in ds:
        _choice(ds, "fallback", "dataset", sorted(SYNTHETIC), nullable=True)
    if not isinstance(ds.get("params", {}), dict):
        raise ConfigError("dataset.params: expected an object")


def _validate_objective(obj: dict):
    _check_keys(obj, OBJECTIVE_KEYS, "objective")
    _choice(obj, "distance", "objective", DISTANCES)
    pens = obj.get("penalties") or []
    if not isinstance(pens, list):
        raise ConfigError("objective.penalties: expected a list")
    for i, p in enumerate(pens):
        where = f"objective.penalties[{i}]"
        _check_keys(p, PENALTY_KEYS, where)
        _choice(p, "kind", where, PENALTIES)
        _num(p, "weight", where, lo=0.0)
        if "rho" in p:
            _num(p, "rho", where, lo=0.0, hi=1.0, lo_open=True, hi_open=True)
    corr = obj.get("corruption")
    if corr is not None:
        _check_keys(corr, CORRUPTION_KEYS, "objective.corruption")
        _choice(corr, "kind", "objective.corruption", NOISES)
        if "sigma" in corr:
            _num(corr, "sigma", "objective.corruption", lo=0.0)
        if "p" in corr:
            _num(corr, "p", "objective.corruption", lo=0.0, hi=1.0)
    _num(obj, "class_weight", "objective", lo=0.0, hi=1.0, nullable=True)
    try:
        objective_spec(obj)
    except ContractError as exc:
        raise ConfigError(f"objective: {exc}") from None


def _validate_architecture(task: str, arch: dict):
    _check_keys(arch, set(TASK_DEFAULTS[task]["architecture"]), "architecture")
    for key in arch:
        if key in ("sigma",):
            _num(arch, key, "architecture", lo=0.0)
        elif key == "scale":
            _num(arch, key, "architecture", lo=0.0, lo_open=True)
        else:
            _int(arch, key, "architecture", lo=1, nullable=key == "hidden")


def _validate_options(task: str, opts: dict):
    _check_keys(opts, set(TASK_DEFAULTS[task]["options"]), "options")
    checks = {
        "examples": lambda: _int(opts, "examples", "options", lo=0),
        "threshold": lambda: _num(opts, "threshold", "options", lo=0.0, hi=1.0),
        "top_terms": lambda: _int(opts, "top_terms", "options", lo=1),
        "threshold_sigmas": lambda: _num(opts, "threshold_sigmas", "options", lo=0.0),
        "drop_train_anomalies": lambda: _bool(opts, "drop_train_anomalies", "options"),
        "kl_scale": lambda: _choice(opts, "kl_scale", "options", ("per_pixel", "none")),
        "lambda_steps": lambda: _int(opts, "lambda_steps", "options", lo=2),
        "samples": lambda: _int(opts, "samples", "options", lo=0),
        "pair": lambda: _pair(opts.get("pair")),
    }
    for key in opts:
        checks[key]()


def _pair(v):
    if not (isinstance(v, list) and len(v) == 2 and all(_is_int(i) and i >= 0 for i in v)):
        raise ConfigError(f"options.pair: expected two non-negative integers, got {v!r}")


def validate(d: dict) -> ExperimentConfig:
    """Check a fully merged config dict and build the ExperimentConfig."""
    _check_keys(d, TOP_KEYS, "config")
    if d.get("task") not in TASKS:
        raise ConfigError(f"task: unknown task {d.get('task')!r} (choose from {', '.join(TASKS)})")
    task = d["task"]
    if "seed" not in d or d["seed"] is None:
        raise ConfigError("seed: required (give it in the config or with --seed)")
    _int(d, "seed", "", lo=0)
    _int(d, "epochs", "", lo=1)
    _int(d, "batch_size", "", lo=1)
    _int(d, "patience", "", lo=0)
    _num(d, "min_delta", "", lo=0.0)
    _num(d, "test_fraction", "", lo=0.0, hi=1.0, hi_open=True)
    _bool(d, "record_duration", "")
    _validate_dataset(d["dataset"])
    _validate_objective(d["objective"])
    _check_keys(d["optimizer"], OPTIMIZER_KEYS, "optimizer")
    _choice(d["optimizer"], "kind", "optimizer", ("adam", "sgd"))
    _num(d["optimizer"], "lr", "optimizer", lo=0.0, lo_open=True, nullable=True)
    _validate_architecture(task, d["architecture"])
    _validate_options(task, d["options"])
    try:
        return ExperimentConfig(**d)
    except ContractError as exc:
        raise ConfigError(str(exc)) from None


def with_defaults(raw: dict) -> dict:
    """Task defaults under the user's values; dict sections merge one level deep,
    and a user ``dataset`` replaces the default source entirely."""
    task = raw.get("task")
    if task not in TASKS:
        raise ConfigError(f"task: unknown task {task!r} (choose from {', '.join(TASKS)})")
    out = copy.deepcopy({**COMMON_DEFAULTS, **TASK_DEFAULTS[task]})
    for key, value in raw.items():
        if key in MERGED and isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = {**out[key], **copy.deepcopy(value)}
        else:
            out[key] = copy.deepcopy(value)
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(d: dict, assignment: str) -> None:
    """Apply one ``dotted.key=value`` override in place; the value is read as JSON
    when it parses, else as a plain string. Integer segments index lists."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r}: expected key=value")
    path, _, text = assignment.partition("=")
    keys = path.strip().split(".")
    if not all(keys):
        raise ConfigError(f"override {assignment!r}: empty key segment")
    node: Any = d
    for i, key in enumerate(keys[:-1]):
        if isinstance(node, list):
            node = _list_item(node, key, ".".join(keys[:i + 1]))
        else:
            if node.get(key) is None:
                node[key] = {}
            node = node[key]
            if not isinstance(node, (dict, list)):
                raise ConfigError(f"override {path}: {'.'.join(keys[:i + 1])} is not an object")
    last = keys[-1]
    if isinstance(node, list):
        idx = _index(last, path)
        if idx >= len(node):
            raise ConfigError(f"override {path}: index {idx} out of range")
        node[idx] = _parse_value(text)
    else:
        node[last] = _parse_value(text)


def _index(key: str, path: str) -> int:
    if not key.isdigit():
        raise ConfigError(f"override {path}: {key!r} is not a list index")
    return int(key)


def _list_item(node: list, key: str, path: str):
    idx = _index(key, path)
    if idx >= len(node):
        raise ConfigError(f"override {path}: index {idx} out of range")
    return node[idx]


def parse_config(data, overrides: Iterable[str] = (), seed: Optional[int] = None) -> ExperimentConfig:
    """Config bytes/str -> validated ExperimentConfig.

    Precedence, lowest to highest: task defaults, file values, ``--set``
    overrides, the ``seed`` argument.
    """
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")
    overrides = list(overrides)
    for ov in overrides:
        if ov.partition("=")[0].strip() == "task":
            apply_override(raw, ov)
    _check_keys(raw, TOP_KEYS, "config")
    merged = with_defaults(raw)
    for ov in overrides:
        if ov.partition("=")[0].strip() != "task":
            apply_override(merged, ov)
    if seed is not None:
        merged["seed"] = seed
    return validate(merged)
