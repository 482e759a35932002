"""
Run configuration: defaults, key=value config files and their merge with command-line flags

Functions:
    parse_config
    load_config
    validate_config
    merge_config
    params_from_config
    settings_from_config
    backend_from_config
"""
import json
import logging
import pathlib
import re
from typing import Any, Dict, Mapping, Optional, Union

import jsonschema

from spinepr.exceptions import ConfigurationException, InvalidParameterException
from spinepr.measures import InferredVariant
from spinepr.model import ModelParams, SeedKind, SeedSpec, phase_matched_q
from spinepr.scans import Backend, ScanSettings

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

SCHEMA_FILE = pathlib.Path(__file__).parent / "resources" / "config_schema.json"
MATCHED = "matched"

DEFAULTS: Dict[str, Any] = {
    "n0": 175.0,
    "q": MATCHED,
    "p_over_g": 0.0,
    "seed.kind": "vacuum",
    "seed.nbar": 0.0,
    "seed.alpha_sq": 0.0,
    "tau_max": 0.012,
    "tau_steps": 600,
    "theta_steps": 512,
    "trajectories": 20000,
    "rng_seed": 0,
    "tol": 1e-10,
    "backend": "exact",
    "inferred": "optimal",
    "epsilon_cut": 1e-12,
    "threads": 1,
    "groups": 16,
    "out": ".",
}

_SECTION = re.compile(r"^\[\s*([A-Za-z_][\w.]*)\s*]$")
_INT = re.compile(r"^[+-]?\d+$")


def _coerce(value: str) -> Union[int, float, str]:
    if _INT.match(value):
        return int(value)
    try:
        return float(value)
    except ValueError:
        return value


def _unquote(value: str) -> str:
    if len(value) >= 2 and value[0] == value[-1] and value[0] in ("'", '"'):
        return value[1:-1]
    return value


def parse_config(text: str) -> Dict[str, Any]:
    """Parses key = value lines; a [section] header prefixes the keys that follow it."""
    data: Dict[str, Any] = {}
    section = ""
    for number, row in enumerate(text.splitlines(), start=1):
        row_s = row.strip()
        if not row_s or row_s.startswith("#"):
            continue
        header = _SECTION.match(row_s)
        if header:
            section = header.group(1) + "."
            continue
        if "=" not in row_s:
            log.error("line %s of the configuration is not a key = value pair: %s", number, row_s)
            raise ConfigurationException(f"line {number} is not a key = value pair: {row_s}")
        key, value = row_s.split("=", 1)
        key = section + key.strip()
        if not key or key == section:
            log.error("empty key at line %s", number)
            raise ConfigurationException(f"empty key at line {number}")
        data[key] = _coerce(_unquote(value.strip()))
    return data


def _schema() -> Dict[str, Any]:
    with open(SCHEMA_FILE, "r", encoding="utf-8") as f:
        return json.load(f)


def validate_config(values: Mapping[str, Any]) -> None:
    try:
        jsonschema.validate(instance=dict(values), schema=_schema())
    except jsonschema.ValidationError as e:
        location = ".".join(str(p) for p in e.path) or "configuration"
        log.error("invalid configuration (%s): %s", location, e.message)
        raise ConfigurationException(f"invalid configuration ({location}): {e.message}") from e


def _normalize(values: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(values)
    if "q_over_g" in out:
        if "q" in out:
            log.error("both q and q_over_g are set")
            raise ConfigurationException("set either q or q_over_g, not both")
        out["q"] = out.pop("q_over_g")
    return out


def load_config(filename: str) -> Dict[str, Any]:
    """Reads and validates a configuration file.

    Raises:
        ConfigurationException: unreadable file, malformed line, unknown key or bad value.
    """
    try:
        with open(filename, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        log.error("cannot read configuration file %s", filename)
        raise ConfigurationException(f"cannot read configuration file {filename}: {e}") from e
    values = parse_config(text)
    validate_config(values)
    log.debug("configuration loaded from %s: %s", filename, values)
    return _normalize(values)


def merge_config(*layers: Optional[Mapping[str, Any]]) -> Dict[str, Any]:
    """Later layers win; None values (unset flags) never override."""
    merged = dict(DEFAULTS)
    for layer in layers:
        if not layer:
            continue
        merged.update({k: v for k, v in _normalize(dict(layer)).items() if v is not None})
    validate_config(merged)
    return merged


def params_from_config(cfg: Mapping[str, Any]) -> ModelParams:
    n0 = float(cfg["n0"])
    q = phase_matched_q(n0) if cfg["q"] == MATCHED else float(cfg["q"])
    kind = SeedKind(cfg["seed.kind"])
    if kind == SeedKind.THERMAL:
        seed = SeedSpec.thermal(cfg["seed.nbar"])
    elif kind == SeedKind.COHERENT:
        seed = SeedSpec.coherent(cfg["seed.alpha_sq"])
    else:
        seed = SeedSpec.vacuum()
    return ModelParams(n0, q, float(cfg["p_over_g"]), seed)


def settings_from_config(cfg: Mapping[str, Any]) -> ScanSettings:
    try:
        return ScanSettings(
            tau_max=float(cfg["tau_max"]),
            tau_steps=int(cfg["tau_steps"]),
            theta_steps=int(cfg["theta_steps"]),
            trajectories=int(cfg["trajectories"]),
            rng_seed=int(cfg["rng_seed"]),
            tol=float(cfg["tol"]),
            epsilon_cut=float(cfg["epsilon_cut"]),
            variant=InferredVariant(cfg["inferred"]),
            workers=int(cfg["threads"]),
            groups=int(cfg["groups"]),
        )
    except InvalidParameterException as e:
        raise ConfigurationException(str(e)) from e


def backend_from_config(cfg: Mapping[str, Any]) -> Backend:
    return Backend(cfg["backend"])
