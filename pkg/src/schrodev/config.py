"""Run configuration: JSON schema, validation, defaults, hashing."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import jsonschema
import numpy as np

from .coefficients import NoiseCoefficient, make_potential
from .dynamics import IntegratorConfig, Model
from .noise import ControlPath, CovarianceSpectrum
from .spectral import SpectralBasis

__all__ = ["ConfigError", "load_config", "validate_config", "config_hash",
           "build_model", "build_control", "EXPERIMENT_KINDS"]

EXPERIMENT_KINDS = ("simulate", "skeleton", "rate", "tail_scan", "fw_check",
                    "lil", "modulus")

_COMPLEX = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"},
         "minItems": 2, "maxItems": 2},
    ]
}

_CONTROL = {
    "oneOf": [
        {"type": "null"},
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["zero", "single_mode", "certificate"]},
                "mode": {"type": "integer", "minimum": 1},
                "amplitude": _COMPLEX,
                "profile": {"enum": ["constant", "resonant"]},
                "index": {"type": "integer", "minimum": 0},
                "budget": {"type": "number", "exclusiveMinimum": 0},
                "count": {"type": "integer", "minimum": 1},
            },
        },
    ]
}

_SCALE = {
    "type": "object",
    "additionalProperties": False,
    "required": ["mode"],
    "properties": {
        "mode": {"enum": ["lil", "power"]},
        "exponent": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.5},
    },
}

_EXPERIMENTS = {
    "simulate": {
        "required": ["equation"],
        "properties": {
            "equation": {"enum": ["original", "moderate", "shifted"]},
            "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
            "scale": _SCALE,
            "path_index": {"type": "integer", "minimum": 0},
            "control": _CONTROL,
        },
    },
    "skeleton": {
        "required": ["control"],
        "properties": {"control": _CONTROL},
    },
    "rate": {
        "required": ["terminal"],
        "properties": {
            "terminal": {"type": "array", "items": _COMPLEX, "minItems": 1},
            "horizon": {"type": "number", "exclusiveMinimum": 0},
        },
    },
    "tail_scan": {
        "required": ["epsilons", "rho", "paths"],
        "properties": {
            "epsilons": {"type": "array", "minItems": 4,
                         "items": {"type": "number", "exclusiveMinimum": 0,
                                   "exclusiveMaximum": 1}},
            "rho": {"type": "number", "exclusiveMinimum": 0},
            "paths": {"type": "integer", "minimum": 1},
            "scale": _SCALE,
            "slope_tolerance": {"type": "number", "exclusiveMinimum": 0},
        },
    },
    "fw_check": {
        "required": ["epsilons", "rho", "R", "paths"],
        "properties": {
            "epsilons": {"type": "array", "minItems": 1,
                         "items": {"type": "number", "exclusiveMinimum": 0,
                                   "exclusiveMaximum": 0.1}},
            "rho": {"type": "number", "exclusiveMinimum": 0},
            "eta": {"oneOf": [{"type": "null"},
                              {"type": "number", "exclusiveMinimum": 0}]},
            "R": {"type": "number", "exclusiveMinimum": 0},
            "paths": {"type": "integer", "minimum": 1},
            "control": _CONTROL,
            "rho_factor": {"type": "number", "exclusiveMinimum": 1},
        },
    },
    "lil": {
        "required": ["c", "j_min", "j_max", "budget"],
        "properties": {
            "c": {"type": "number", "exclusiveMinimum": 1},
            "j_min": {"type": "integer", "minimum": 1},
            "j_max": {"type": "integer", "minimum": 1},
            "budget": {"type": "number", "exclusiveMinimum": 0},
            "certificates": {"type": "integer", "minimum": 1},
            "delta_rec": {"oneOf": [{"type": "null"}, {"type": "number", "minimum": 0}]},
            "delta_esc": {"oneOf": [{"type": "null"}, {"type": "number", "minimum": 0}]},
        },
    },
    "modulus": {
        "required": ["level", "epsilons", "threshold", "R", "paths"],
        "properties": {
            "level": {"type": "integer", "minimum": 0},
            "epsilons": {"type": "array", "minItems": 1,
                         "items": {"type": "number", "exclusiveMinimum": 0,
                                   "exclusiveMaximum": 0.1}},
            "threshold": {"type": "number", "exclusiveMinimum": 0},
            "R": {"type": "number", "exclusiveMinimum": 0},
            "paths": {"type": "integer", "minimum": 1},
            "control": _CONTROL,
        },
    },
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["basis", "spectrum", "integrator", "experiment", "seed"],
    "properties": {
        "basis": {
            "type": "object",
            "additionalProperties": False,
            "required": ["J"],
            "properties": {
                "J": {"type": "integer", "minimum": 1, "maximum": 1024},
                "P": {"type": "integer", "minimum": 3},
            },
        },
        "spectrum": {
            "type": "object",
            "additionalProperties": False,
            "required": ["law"],
            "properties": {
                "law": {"enum": ["power"]},
                "exponent": {"type": "number", "exclusiveMinimum": 1},
                "scale": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "coefficients": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "alpha": _COMPLEX,
                "beta": _COMPLEX,
                "potential": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["zero", "imaginary_sine", "constant"]},
                        "amplitude": _COMPLEX,
                    },
                },
            },
        },
        "initial_state": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["mode"],
                    "properties": {
                        "mode": {"type": "integer", "minimum": 1},
                        "amplitude": _COMPLEX,
                    },
                },
                {"type": "array", "items": _COMPLEX, "minItems": 1},
            ]
        },
        "integrator": {
            "type": "object",
            "additionalProperties": False,
            "required": ["dt", "T"],
            "properties": {
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "T": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "experiment": {
            "type": "object",
            "required": ["kind"],
            "properties": {"kind": {"enum": list(EXPERIMENT_KINDS)}},
        },
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
    },
}

DEFAULTS = {
    "spectrum": {"exponent": 2.0, "scale": 1.0},
    "coefficients": {"alpha": 1.0, "beta": 0.25,
                     "potential": {"kind": "imaginary_sine", "amplitude": 0.5}},
    "experiment_defaults": {
        "simulate": {"epsilon": 0.0, "scale": {"mode": "lil"}, "path_index": 0,
                     "control": None},
        "tail_scan": {"scale": {"mode": "power", "exponent": 0.25},
                      "slope_tolerance": 0.25},
        "fw_check": {"eta": None, "control": None, "rho_factor": 1.5},
        "lil": {"certificates": 5, "delta_rec": None, "delta_esc": None},
        "modulus": {"control": None},
        "rate": {},
        "skeleton": {},
    },
}


class ConfigError(ValueError):
    """Invalid run configuration; carries a JSON-pointer-ish path."""

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer or "/"


def _merge_defaults(cfg: dict) -> dict:
    cfg = json.loads(json.dumps(cfg))  # deep copy, JSON-clean
    for key, block in DEFAULTS.items():
        if key == "experiment_defaults":
            continue
        section = cfg.setdefault(key, {})
        for k, v in block.items():
            if k == "potential":
                pot = section.setdefault("potential", dict(v))
                pot.setdefault("amplitude", 0.5)
            else:
                section.setdefault(k, v)
    kind = cfg.get("experiment", {}).get("kind")
    for k, v in DEFAULTS["experiment_defaults"].get(kind, {}).items():
        cfg["experiment"].setdefault(k, v)
    cfg.setdefault("initial_state", None)
    cfg.setdefault("output_dir", "out")
    return cfg


def validate_config(cfg: dict) -> dict:
    """Validate and normalize a raw config dict; raises ConfigError."""
    if not isinstance(cfg, dict):
        raise ConfigError("configuration must be a JSON object")
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(exc.message, _pointer(exc)) from None
    kind = cfg["experiment"]["kind"]
    exp_schema = {"type": "object", "additionalProperties": False}
    exp_schema.update(_EXPERIMENTS[kind])
    exp_schema["properties"] = dict(exp_schema["properties"])
    exp_schema["properties"]["kind"] = {"const": kind}
    exp_schema["required"] = ["kind"] + list(exp_schema.get("required", []))
    merged = _merge_defaults(cfg)
    try:
        jsonschema.validate(merged["experiment"], exp_schema)
    except jsonschema.ValidationError as exc:
        raise ConfigError(exc.message, "/experiment" + _pointer(exc)) from None
    if kind == "lil" and merged["experiment"]["j_max"] < merged["experiment"]["j_min"]:
        raise ConfigError("j_max must be >= j_min", "/experiment/j_max")
    return merged


def _pointer(exc: jsonschema.ValidationError) -> str:
    return "".join(f"/{part}" for part in exc.absolute_path)


def load_config(path) -> dict:
    """Read, validate, and default-fill a config file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(str(exc)) from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}") from None
    return validate_config(raw)


def config_hash(cfg: dict) -> str:
    """Stable hash of the canonical JSON encoding."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _as_complex(value) -> complex:
    if isinstance(value, (list, tuple)):
        return complex(value[0], value[1])
    return complex(value)


def _initial_state(cfg: dict, basis: SpectralBasis):
    spec = cfg.get("initial_state")
    if spec is None:
        return None
    gamma = np.zeros(basis.mode_count, dtype=complex)
    if isinstance(spec, dict):
        mode = spec["mode"]
        if mode > basis.mode_count:
            raise ConfigError(f"mode {mode} exceeds J={basis.mode_count}",
                              "/initial_state/mode")
        gamma[mode - 1] = _as_complex(spec.get("amplitude", 1.0))
        return gamma
    if len(spec) > basis.mode_count:
        raise ConfigError("more coefficients than retained modes", "/initial_state")
    for i, v in enumerate(spec):
        gamma[i] = _as_complex(v)
    return gamma


def build_model(cfg: dict) -> Model:
    """Instantiate the model a validated config describes."""
    basis = SpectralBasis(cfg["basis"]["J"], cfg["basis"].get("P"))
    spectrum = CovarianceSpectrum.power(basis.mode_count,
                                        exponent=cfg["spectrum"]["exponent"],
                                        scale=cfg["spectrum"]["scale"])
    co = cfg["coefficients"]
    noise = NoiseCoefficient(alpha=_as_complex(co["alpha"]),
                             beta=_as_complex(co["beta"]))
    potential = make_potential(co["potential"]["kind"],
                               _as_complex(co["potential"].get("amplitude", 0.5)))
    integrator = IntegratorConfig(dt=cfg["integrator"]["dt"],
                                  horizon=cfg["integrator"]["T"])
    return Model(basis, spectrum, noise, potential, integrator,
                 gamma=_initial_state(cfg, basis))


def build_control(spec, model: Model) -> ControlPath | None:
    """Materialize a control described by a config block (or None)."""
    if spec is None or spec.get("kind") == "zero":
        return None if spec is None else ControlPath.zero(model.steps,
                                                          model.spectrum, model.dt)
    if spec["kind"] == "single_mode":
        mode = spec.get("mode", 1)
        if mode > model.basis.mode_count:
            raise ConfigError(f"control mode {mode} exceeds J", "/experiment/control/mode")
        amp = _as_complex(spec.get("amplitude", 1.0))
        values = np.zeros((model.steps, model.basis.mode_count), dtype=complex)
        if spec.get("profile", "constant") == "constant":
            values[:, mode - 1] = amp
        else:
            mids = (np.arange(model.steps) + 0.5) * model.dt
            mu = model.basis.eigenvalues[mode - 1]
            values[:, mode - 1] = amp * np.exp(1j * mu * (model.horizon - mids))
        return ControlPath(values, model.dt, model.spectrum)
    if spec["kind"] == "certificate":
        from .action import LimitSetSpec, certificate_dictionary
        budget = spec.get("budget", 1.0)
        count = spec.get("count", max(spec.get("index", 0) + 1, 5))
        pairs = certificate_dictionary(model, LimitSetSpec(budget), count)
        index = spec.get("index", 0)
        if index >= len(pairs):
            raise ConfigError(f"certificate index {index} >= count {len(pairs)}",
                              "/experiment/control/index")
        return pairs[index][0]
    raise ConfigError(f"unknown control kind {spec['kind']!r}", "/experiment/control")
