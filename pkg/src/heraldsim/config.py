"""Run configuration: YAML file, JSON-schema validation, environment overrides.

Every physical quantity carries its unit in the key name.  Unknown keys are
rejected.  Validation errors are reported with the line of the offending
node in the file.
"""
from __future__ import annotations

import copy
import os
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import yaml

from .errors import ConfigError

ENV_PREFIX = "HERALDSIM_"

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_prob = {"type": "number", "minimum": 0, "maximum": 1}
_bg = {"type": "number", "minimum": 0, "exclusiveMaximum": 1}


def _obj(props: dict, required: list[str] | None = None) -> dict:
    return {"type": "object", "properties": props, "required": required or [], "additionalProperties": False}


SCHEMA = _obj({
    "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
    "pulses": {"type": "integer", "minimum": 1},
    "output_dir": {"type": "string"},
    "fibre": _obj({
        "reference_wavelength_nm": _pos,
        "beta2_s2_per_m": _num,
        "beta3_s3_per_m": _num,
        "beta4_s4_per_m": _num,
        "gamma_per_w_per_m": _nonneg,
        "length_m": _pos,
        "peak_power_w": _nonneg,
        "window_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    }, ["reference_wavelength_nm", "beta2_s2_per_m", "beta3_s3_per_m", "beta4_s4_per_m",
        "gamma_per_w_per_m", "length_m", "peak_power_w"]),
    "pump": _obj({
        "wavelength_nm": _pos,
        "rms_bandwidth_nm": _pos,
        "bandwidth_sweep_nm": _obj({"start": _pos, "stop": _pos, "points": {"type": "integer", "minimum": 1}},
                                   ["start", "stop", "points"]),
        "contour_scan_nm": _obj({"start": _pos, "stop": _pos, "points": {"type": "integer", "minimum": 2}},
                                ["start", "stop", "points"]),
    }, ["wavelength_nm", "rms_bandwidth_nm"]),
    "grid": _obj({
        "points": {"type": "integer", "minimum": 2},
        "signal_factor": _pos,
        "idler_factor": _pos,
    }),
    "schmidt": _obj({"weight_cutoff": _nonneg, "max_modes": {"type": "integer", "minimum": 1}}),
    "source": _obj({
        "mean_pairs": _nonneg,
        "herald_probability": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "herald_loss_db": _nonneg,
        "signal_loss_db": _nonneg,
        "detector_efficiency": _prob,
        "herald_background": _bg,
        "signal_background": _bg,
        "rep_rate_hz": _pos,
        "weights": {"oneOf": [{"const": "reference"}, {"type": "array", "items": _nonneg, "minItems": 1}]},
    }),
    "network": _obj({
        "sources": {"type": "integer", "minimum": 1},
        "switch_loss_db": _nonneg,
        "delay_loss_db": _nonneg,
        "polariser_loss_db": _nonneg,
        "policy": {"enum": ["priority", "random"]},
    }),
    "multiplex": _obj({
        "mean_pairs_sweep": {"type": "array", "items": _nonneg, "minItems": 1},
        "method": {"enum": ["monte_carlo", "exact"]},
        "cutoff": {"type": "integer", "minimum": 1},
    }),
    "sweep_g2m": _obj({
        "monte_carlo": {"type": "boolean"},
        "mean_pairs": _nonneg,
    }),
    "tomography": _obj({
        "strides": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
        "pump_wavelengths_nm": {"type": "array", "items": _pos},
        "osa_resolution_nm": _nonneg,
    }),
}, ["fibre", "pump"])

DEFAULTS = {
    "seed": 1,
    "pulses": 10_000_000,
    "output_dir": "out",
    "grid": {"points": 256, "signal_factor": 5.0, "idler_factor": 5.0},
    "schmidt": {"weight_cutoff": 1e-12, "max_modes": 64},
    "source": {
        "herald_probability": 0.01,
        "herald_loss_db": 5.6,
        "signal_loss_db": 7.0,
        "detector_efficiency": 1.0,
        "herald_background": 0.0,
        "signal_background": 0.0,
        "rep_rate_hz": 10e6,
        "weights": "reference",
    },
    "network": {"sources": 2, "switch_loss_db": 1.0, "delay_loss_db": 0.0, "polariser_loss_db": 1.0,
                "policy": "priority"},
    "multiplex": {"mean_pairs_sweep": [0.01, 0.02, 0.04], "method": "monte_carlo", "cutoff": 12},
    "sweep_g2m": {"monte_carlo": False, "mean_pairs": 0.02},
    "tomography": {"strides": [1, 2], "pump_wavelengths_nm": [], "osa_resolution_nm": 0.0},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _node_line(node, path) -> int | None:
    """1-based line of the YAML node at ``path`` (deepest existing ancestor)."""
    line = node.start_mark.line + 1 if node is not None else None
    for key in path:
        if isinstance(node, yaml.MappingNode):
            nxt = None
            for k, v in node.value:
                if k.value == key:
                    nxt = v
                    line = k.start_mark.line + 1
                    break
            if nxt is None:
                break
            node = nxt
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            break
    return line


def _unknown_key_line(node, path, err) -> int | None:
    """For additionalProperties errors point at the offending key itself."""
    if err.validator != "additionalProperties":
        return None
    extra = set(err.instance) - set(err.schema.get("properties", {}))
    for key in sorted(extra):
        line = _node_line(node, list(path) + [key])
        if line is not None:
            return line
    return None


def validate(data: dict, text: str | None = None, source: str | None = None) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if not errors:
        return
    err = errors[0]
    line = None
    if text is not None:
        node = yaml.compose(text)
        line = _unknown_key_line(node, err.absolute_path, err) or _node_line(node, err.absolute_path)
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    raise ConfigError(f"{where}: {err.message}", line=line, path=source)


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration with defaults filled in; ``data`` is the effective dict."""

    data: dict
    source_path: str | None = None

    def __getitem__(self, key):
        return self.data[key]

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def pulses(self) -> int:
        return int(self.data["pulses"])

    @property
    def output_dir(self) -> Path:
        return Path(self.data["output_dir"])

    def with_overrides(self, **over) -> "RunConfig":
        """Apply top-level or dotted-key overrides (``pump.rms_bandwidth_nm=...``), then revalidate."""
        data = copy.deepcopy(self.data)
        for key, val in over.items():
            if val is None:
                continue
            parts = key.split(".")
            d = data
            for p in parts[:-1]:
                d = d.setdefault(p, {})
            d[parts[-1]] = val
        validate(data, source=self.source_path)
        return RunConfig(data, self.source_path)


def parse_config(text: str, source: str | None = None) -> RunConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}",
                          line=mark.line + 1 if mark else None, path=source) from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping", line=1, path=source)
    validate(raw, text, source)
    data = _merge(DEFAULTS, raw)
    validate(data, source=source)
    return RunConfig(data, source)


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=str(p)) from None
    return parse_config(text, str(p))


def env_overrides(environ=None) -> dict:
    """CLI-level settings from ``HERALDSIM_CONFIG``, ``_SEED``, ``_OUT`` and ``_PULSES``."""
    env = os.environ if environ is None else environ
    out = {}
    for name, conv in (("CONFIG", str), ("SEED", int), ("OUT", str), ("PULSES", int)):
        v = env.get(ENV_PREFIX + name)
        if v is not None and v != "":
            try:
                out[name.lower()] = conv(v)
            except ValueError:
                raise ConfigError(f"environment variable {ENV_PREFIX + name}={v!r} is not valid") from None
    return out
