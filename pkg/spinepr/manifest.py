"""
Run manifests: the provenance record written next to every output file

Classes:
    RunManifest

Functions:
    tool_version
    write_manifest
    load_manifest
"""
import json
import logging
import pathlib
from dataclasses import dataclass, field, asdict
from importlib import metadata
from typing import Any, Dict, List, Optional

import jsonschema

from spinepr.exceptions import InvalidDataException

log = logging.getLogger(__name__)
log.addHandler(logging.NullHandler())

SCHEMA_FILE = pathlib.Path(__file__).parent / "resources" / "manifest_schema.json"
DISTRIBUTION = "spinepr"
ASSUMPTIONS = (
    "local oscillator uses pump moments at the same time as the signal/idler moments",
    "two-port beam splitter with a vacuum port splits the local oscillator off the pump",
    "coherent-seed curves are computed with the truncated Wigner backend",
)


def tool_version() -> str:
    try:
        return metadata.version(DISTRIBUTION)
    except metadata.PackageNotFoundError:
        return "0+unknown"


@dataclass
class RunManifest:
    """
    Attributes
    ----------
    command: str
        Subcommand or figure id that produced the outputs
    argv: List[str]
        Arguments replaying the run
    params: Dict[str, Any]
        Model parameter snapshot (or the swept parameter sets)
    backend: str
    rng_seed: Optional[int]
    trajectories: Optional[int]
    grids: Dict[str, Any]
    tolerances: Dict[str, float]
    outputs: List[str]
        File names (relative to the manifest) this manifest describes
    warnings: List[str]
        Validity advisories and statistical-quality flags
    assumptions: List[str]
    tool_version: str
    wall_clock_seconds: float
    """
    command: str
    argv: List[str]
    params: Dict[str, Any]
    backend: str
    rng_seed: Optional[int] = None
    trajectories: Optional[int] = None
    grids: Dict[str, Any] = field(default_factory=dict)
    tolerances: Dict[str, float] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    assumptions: List[str] = field(default_factory=lambda: list(ASSUMPTIONS))
    tool_version: str = field(default_factory=tool_version)
    wall_clock_seconds: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["warnings"] = sorted(set(self.warnings))
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _schema() -> Dict[str, Any]:
    with open(SCHEMA_FILE, "r", encoding="utf-8") as f:
        return json.load(f)


def _validate(document: Dict[str, Any]) -> None:
    try:
        jsonschema.validate(instance=document, schema=_schema())
    except jsonschema.ValidationError as e:
        log.error("invalid manifest: %s", e.message)
        raise InvalidDataException(f"invalid manifest: {e.message}") from e


def write_manifest(manifest: RunManifest, path: str) -> str:
    document = manifest.to_dict()
    _validate(document)
    with open(path, "w", encoding="utf-8") as f:
        f.write(manifest.to_json())
        f.write("\n")
    log.info("manifest written to %s", path)
    return path


def load_manifest(path: str) -> RunManifest:
    with open(path, "r", encoding="utf-8") as f:
        try:
            document = json.load(f)
        except json.JSONDecodeError as e:
            log.error("manifest %s is not valid JSON", path)
            raise InvalidDataException(f"manifest {path} is not valid JSON") from e
    _validate(document)
    return RunManifest(**document)
