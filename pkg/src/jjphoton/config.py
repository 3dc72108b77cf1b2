"""Experiment configuration: JSON document, schema, defaults and loading.

A config is a single JSON object. Every section is optional; missing keys
take the defaults below, which describe the reference detector (170 nA
junction at 17 mK, two-mode cavity). ``CONFIG_SCHEMA`` is the published
schema (also written to ``docs/config.schema.json``).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass
import hashlib
import json
from pathlib import Path

import jsonschema

from .detector import DetectorModel, SdeConfig
from .errors import ConfigError, ParameterError
from .escape import PREFACTOR_MODELS, EscapeConfig
from .junction import JunctionParams
from .source import STATS_MODELS, CavityMode, SourceConfig

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_PROB = {"type": "number", "minimum": 0, "maximum": 1}


def _obj(props: dict, required=()) -> dict:
    out = {"type": "object", "additionalProperties": False, "properties": props}
    if required:
        out["required"] = list(required)
    return out


def _list(item, min_items=1) -> dict:
    return {"type": "array", "items": item, "minItems": min_items}


CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "jjphoton experiment configuration",
    **_obj({
        "master_seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "threads": {"type": "integer", "minimum": 1},
        "junction": _obj({
            "I_c": _POS, "C": _POS, "R_N": _POS,
            "R_qp": {"type": ["number", "null"], "exclusiveMinimum": 0},
            "V_g": _POS,
        }),
        "modes": _list(_obj({
            "f": _POS, "Q": _POS, "eta": _PROB,
            "stats_model": {"enum": list(STATS_MODELS)},
            "tau_int": {"type": ["number", "null"], "exclusiveMinimum": 0},
        }, required=("f", "Q")), min_items=0),
        "source": _obj({"T": _POS, "dark_rate": _NONNEG}),
        "detector": _obj({
            "detection_prob": _list(_PROB, min_items=0),
            "dead_time": _NONNEG,
            "dark_rate": {"type": ["number", "null"], "minimum": 0},
        }),
        "escape": _obj({
            "T": _POS,
            "prefactor_model": {"enum": list(PREFACTOR_MODELS)},
            "include_mqt": {"type": "boolean"},
            "dark_rate_override": {"type": ["number", "null"], "minimum": 0},
        }),
        "sde": _obj({
            "timestep": _POS, "max_time": _POS,
            "Q": {"type": ["number", "null"], "exclusiveMinimum": 0},
            "threshold": _POS, "confirm_time": _POS, "v_confirm": _POS,
        }),
        "iv": _obj({
            "f": _POS,
            "alphas": _list(_NONNEG),
            "gap_V": _POS,
            "R_sg": {"type": ["number", "null"], "exclusiveMinimum": 0},
            "width_V": _POS,
            "v_max": _POS,
            "n_points": {"type": "integer", "minimum": 3},
            "V_probe": {"type": ["number", "null"]},
        }),
        "sweep_temp": _obj({
            "temps": _list(_POS, min_items=2),
            "rel_noise": _NONNEG,
            "fit": {"type": "boolean"},
        }),
        "fit_rate": _obj({
            "data": {"type": ["string", "null"]},
            "eta_bounds": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
            "dark_bounds": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
        }),
        "distribution": _obj({
            "duration": _POS,
            "stats_model": {"enum": list(STATS_MODELS) + ["from-modes"]},
            "binning": {"enum": ["log", "linear"]},
            "n_bins": {"type": "integer", "minimum": 1},
            "n_bootstrap": {"type": "integer", "minimum": 0},
            "fano_window": {"type": ["number", "null"], "exclusiveMinimum": 0},
        }),
        "sweep_bias": _obj({
            "bias": _list({"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}),
            "temps": _list(_POS),
            "T_junction": _POS,
            "trials": {"type": "integer", "minimum": 10},
        }),
        "pat": _obj({
            "cavities": _list(_obj({"f0": _POS, "Q": _POS}, required=("f0", "Q"))),
            "alpha_ref": _POS,
            "source_power_dB": _NUM,
            "n_freq": {"type": "integer", "minimum": 5},
            "span_linewidths": _POS,
            "gap_V": _POS,
        }),
    }),
}

DEFAULTS = {
    "master_seed": 0,
    "output_dir": "out",
    "threads": 1,
    "junction": {"I_c": 170e-9, "C": 80e-15, "R_N": 1480.0, "R_qp": None, "V_g": 0.4e-3},
    "modes": [
        {"f": 8.81e9, "Q": 7340.0, "eta": 0.0125, "stats_model": "poisson", "tau_int": None},
        {"f": 13.95e9, "Q": 4650.0, "eta": 0.45, "stats_model": "poisson", "tau_int": None},
    ],
    "source": {"T": 0.047, "dark_rate": 0.1},
    "detector": {"detection_prob": [], "dead_time": 5e-3, "dark_rate": None},
    "escape": {"T": 0.017, "prefactor_model": "transition-state", "include_mqt": True,
               "dark_rate_override": None},
    "sde": {"timestep": 0.01, "max_time": 1.0e4, "Q": None, "threshold": 12.566370614359172,
            "confirm_time": 20.0, "v_confirm": 0.1},
    "iv": {"f": 13.95e9, "alphas": [0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5], "gap_V": 0.4e-3,
           "R_sg": None, "width_V": 0.5e-6, "v_max": 0.6e-3, "n_points": 1201, "V_probe": None},
    "sweep_temp": {"temps": [0.021, 0.025, 0.03, 0.035, 0.04, 0.045, 0.047, 0.05, 0.055,
                             0.06, 0.065, 0.07, 0.08],
                   "rel_noise": 0.05, "fit": True},
    "fit_rate": {"data": None, "eta_bounds": [0.0, 1.0], "dark_bounds": [0.0, 10.0]},
    "distribution": {"duration": 600.0, "stats_model": "from-modes", "binning": "log",
                     "n_bins": 40, "n_bootstrap": 200, "fano_window": None},
    "sweep_bias": {"bias": [round(0.5 + 0.01 * k, 2) for k in range(21)],
                   "temps": [0.021, 0.03, 0.04, 0.047, 0.055, 0.065, 0.08],
                   "T_junction": 0.017, "trials": 100},
    "pat": {"cavities": [{"f0": 8.81e9, "Q": 7340.0}, {"f0": 13.95e9, "Q": 4650.0}],
            "alpha_ref": 0.5, "source_power_dB": -4.0, "n_freq": 81, "span_linewidths": 8.0,
            "gap_V": 0.4e-3},
}

# Keys that do not influence results and are left out of the config hash.
_UNHASHED = ("output_dir", "threads")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class ExperimentConfig:
    """Validated configuration plus the physical objects built from it."""

    raw: dict
    junction: JunctionParams
    modes: tuple
    source: SourceConfig
    detector: DetectorModel
    escape: EscapeConfig
    sde: SdeConfig

    @property
    def master_seed(self) -> int:
        return int(self.raw["master_seed"])

    @property
    def output_dir(self) -> Path:
        return Path(self.raw["output_dir"])

    @property
    def threads(self) -> int:
        return int(self.raw["threads"])

    def section(self, name: str) -> dict:
        return self.raw[name]

    def config_hash(self) -> str:
        return config_hash(self.raw)


def config_hash(raw: dict) -> str:
    """SHA-256 of the canonical JSON of the result-relevant settings."""
    doc = {k: v for k, v in raw.items() if k not in _UNHASHED}
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def build_config(user: dict | None = None, **overrides) -> ExperimentConfig:
    """Validate ``user`` against the schema, merge defaults, apply non-None
    ``overrides`` (``master_seed``, ``output_dir``, ``threads``) and build
    the physical objects.

    Raises:
        ConfigError: schema violation or a physical invariant failing.
    """
    user = {} if user is None else user
    try:
        jsonschema.validate(user, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {path}: {exc.message}") from None
    raw = _merge(DEFAULTS, user)
    for k, v in overrides.items():
        if v is not None:
            raw[k] = v
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
        junction = JunctionParams(**raw["junction"])
        modes = tuple(CavityMode(**m) for m in raw["modes"])
        source = SourceConfig(modes, **raw["source"])
        detector = DetectorModel(tuple(raw["detector"]["detection_prob"]),
                                 raw["detector"]["dead_time"], raw["detector"]["dark_rate"])
        escape = EscapeConfig(**raw["escape"])
        sde = SdeConfig(**raw["sde"])
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config invalid: {exc.message}") from None
    except (ParameterError, TypeError) as exc:
        raise ConfigError(f"config invalid: {exc}") from None
    for lo_hi in (raw["fit_rate"]["eta_bounds"], raw["fit_rate"]["dark_bounds"]):
        if not lo_hi[0] < lo_hi[1]:
            raise ConfigError("bounds must satisfy lower < upper")
    return ExperimentConfig(raw, junction, modes, source, detector, escape, sde)


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Read a JSON config file (``None`` means all defaults)."""
    user = None
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(user, dict):
            raise ConfigError("config must be a JSON object")
    return build_config(user, **overrides)
