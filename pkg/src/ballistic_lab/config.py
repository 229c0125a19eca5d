"""Experiment configuration and the single table of numeric defaults.

A config file is JSON::

    {
      "operator": {"q": 2, "a": [1, 1], "b": [1, -1]},   # or a path, or a family
      "params": {"horizon": 50},                        # per-command overrides
      "tolerances": {"boundary_tol": 1e-10},
      "seed": 0
    }

``operator`` may be an inline document or a path (relative to the config
file) to one. Unknown parameter or tolerance keys are rejected.
"""

from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .exceptions import ValidationError
from .lattice import Operator, load_operator

# Every grid size, horizon and tolerance used by the command-line front end.
DEFAULTS = {
    "operator": {"q": 1, "a": [1.0], "b": [0.0]},
    "seed": 0,
    "tolerances": {
        "boundary_tol": 1e-10,  # evolved mass allowed on the window edges
        "lyapunov_tol": 1e-6,  # L(E) below this counts as vanishing
        "curve_floor": 1e-13,  # convergence-curve values below are treated as zero
    },
    "bands": {
        "sweep_M": 256,  # theta points validating band ordering
        "dos_points": 401,  # energies in the DOS table
    },
    "transport": {
        "horizon": 100.0,
        "n_times": 81,  # log-spaced times in [t_min, horizon]
        "t_min": 1.0,
        "moments": [1.0, 2.0],
        "packet": "delta0",  # "delta0", {"random": k}, or {"offset": n, "re": [..], "im": [..]}
        "window_decades": 0.5,
        "stride_decades": 0.25,
        "span_decades": 1.0,
    },
    "converge": {
        "M": 512,  # midpoint theta grid
        "k_max": 10,  # dyadic times 1 .. 2**k_max
    },
    "spectral": {
        "lyapunov_points": 401,
        "dirichlet_n": 2000,
        "dos_points": 201,
        "homogeneity_points": 30,
        "delta_min": 1e-4,
    },
    "xy": {
        "epsilon": 1e-3,
        "horizon": 200.0,
        "n_times": 40,
        "many_body_length": 8,  # 0 disables the exact commutator samples
        "ceiling_M": 1024,
    },
}

COMMANDS = ("bands", "transport", "converge", "spectral", "xy")


@dataclass
class ExperimentConfig:
    command: str
    operator: Operator
    params: dict
    tolerances: dict
    seed: int
    operator_doc: dict = field(repr=False, default_factory=dict)

    def echo(self) -> dict:
        """Effective configuration, for embedding in JSON reports."""
        return {
            "command": self.command,
            "operator": self.operator_doc,
            "params": self.params,
            "tolerances": self.tolerances,
            "seed": self.seed,
        }


def read_json(path: str | os.PathLike) -> dict:
    """Load a JSON file; syntax errors become validation errors with line and column."""
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"file not found: {p}")
    text = p.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(
            f"malformed JSON in {p} at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from None


def _merge(kind: str, base: dict, over: dict) -> dict:
    unknown = set(over) - set(base)
    if unknown:
        raise ValidationError(f"unknown {kind} keys: {sorted(unknown)}")
    out = copy.deepcopy(base)
    out.update(over)
    return out


def parse_tolerance(item: str) -> tuple:
    key, sep, value = item.partition("=")
    if not sep:
        raise ValidationError(f"tolerance override must be key=value, got {item!r}")
    try:
        v = float(value)
    except ValueError:
        raise ValidationError(f"tolerance {key!r} is not a number: {value!r}") from None
    return key.strip(), v


def load_config(
    command: str,
    path: str | None = None,
    seed: int | None = None,
    tolerance_overrides=(),
) -> ExperimentConfig:
    if command not in COMMANDS:
        raise ValidationError(f"unknown command {command!r}")
    raw = read_json(path) if path else {}
    if not isinstance(raw, dict):
        raise ValidationError("config must be a JSON object")
    unknown = set(raw) - {"operator", "params", "tolerances", "seed", "experiment"}
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    op_doc = raw.get("operator", DEFAULTS["operator"])
    if isinstance(op_doc, str):
        base = Path(path).parent if path else Path.cwd()
        op_doc = read_json(base / op_doc)
    if not isinstance(op_doc, dict):
        raise ValidationError("operator must be an object or a path to one")
    operator = load_operator(op_doc)
    params = _merge("parameter", DEFAULTS[command], raw.get("params", {}) or {})
    tolerances = _merge("tolerance", DEFAULTS["tolerances"], raw.get("tolerances", {}) or {})
    for item in tolerance_overrides:
        k, v = parse_tolerance(item)
        tolerances = _merge("tolerance", tolerances, {k: v})
    for k, v in tolerances.items():
        if not (isinstance(v, (int, float)) and v > 0):
            raise ValidationError(f"tolerance {k!r} must be positive, got {v!r}")
    s = raw.get("seed", DEFAULTS["seed"]) if seed is None else seed
    if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < 2**64:
        raise ValidationError(f"seed must be an unsigned 64-bit integer, got {s!r}")
    return ExperimentConfig(command, operator, params, tolerances, int(s), op_doc)
