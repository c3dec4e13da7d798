"""Config and report validation.

All validators raise ConfigParse (a ValueError) with the JSON path of the
offending field, e.g. "$.scenarios[1].K". Size limits are enforced here,
before any scenario is constructed.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np
import yaml
from jsonschema.exceptions import best_match

from geometry.errors import ConfigParse

# ---------------------------------------------------------------------------
# Size limits
# ---------------------------------------------------------------------------
MAX_TORUS_K: int = 32
MAX_SU2_SPIN: float = 4.0
MAX_DIMENSION: int = 5000
MAX_CONFIG_BYTES: int = 10 * 1024 * 1024  # 10 MB

_YAML_SUFFIXES: frozenset[str] = frozenset({".yaml", ".yml"})


def json_path(parts) -> str:
    """["scenarios", 1, "K"] -> "$.scenarios[1].K"."""
    out = "$"
    for p in parts:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def check_content_size(content: str, field_name: str, max_bytes: int = MAX_CONFIG_BYTES) -> None:
    """Raise ConfigParse if content exceeds the size limit."""
    size = len(content.encode("utf-8", errors="replace"))
    if size > max_bytes:
        raise ConfigParse(
            f"'{field_name}' size {size:,} bytes exceeds "
            f"maximum {max_bytes:,} bytes ({max_bytes // 1_048_576} MB)"
        )


def load_config_document(path: str | Path) -> dict[str, Any]:
    """Read a JSON (or .yaml/.yml) config into a plain dict."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParse(f"cannot read config '{path}': {exc}") from exc
    check_content_size(text, str(path))
    try:
        doc = yaml.safe_load(text) if path.suffix.lower() in _YAML_SUFFIXES else json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigParse(f"cannot parse config '{path}': {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigParse(f"$: config root must be an object, got {type(doc).__name__}")
    return doc


def load_schema(path: str | Path) -> dict[str, Any]:
    return json.loads(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Schema validation
# ---------------------------------------------------------------------------

def validate_against_schema(instance: Any, schema: dict, what: str = "config") -> None:
    """
    Validate instance against a JSON schema.

    The most relevant error is re-raised as ConfigParse carrying the JSON
    path of the failing field.
    """
    validator = jsonschema.Draft7Validator(schema)
    error = best_match(validator.iter_errors(instance))
    if error is not None:
        raise ConfigParse(f"{what} {json_path(error.absolute_path)}: {error.message}")


# ---------------------------------------------------------------------------
# Limits
# ---------------------------------------------------------------------------

def validate_tolerance(tol: Any, field_name: str = "tol") -> float:
    """Tolerances are finite floats in (0, 1)."""
    try:
        value = float(tol)
    except (TypeError, ValueError) as exc:
        raise ConfigParse(f"{field_name}: tolerance must be a number, got {tol!r}") from exc
    if not math.isfinite(value) or not 0.0 < value < 1.0:
        raise ConfigParse(f"{field_name}: tolerance {value} outside (0, 1)")
    return value


def estimate_dimension(scenario: dict[str, Any]) -> int:
    """Hilbert dimension the scenario will build, from its parameters alone."""
    kind = scenario.get("kind")
    if kind == "torus_crossed":
        K = int(scenario.get("K", 8))
        triple = int(scenario.get("triple_base_radius", 4))
        return (2 * K + 1) * 4 * (2 * triple + 1)
    if kind == "warped_u1":
        spectator = 2 * int(scenario.get("spectator_radius", 0)) + 1
        return (2 * int(scenario.get("K", 8)) + 1) * 2 * (2 * int(scenario.get("L", 20)) + 1) * spectator
    if kind == "su2_group":
        J = float(scenario.get("J", 2))
        # regular module (+)_{j <= J} (2j+1)^2, spinors of Cl_3 inside Cl_4
        return 4 * sum((k + 1) ** 2 for k in range(int(2 * J) + 1))
    if kind == "deform_t2":
        K = int(scenario.get("K", 4))
        return (2 * K + 1) * 4 * (2 * int(scenario.get("base_radius", 4)) + 1)
    if kind == "custom":
        return len(scenario.get("D", []))
    return 0


def check_limits(doc: dict[str, Any]) -> None:
    """Truncation, spin, dimension and tolerance limits for every scenario."""
    if "tol" in doc and doc["tol"] is not None:
        validate_tolerance(doc["tol"], "$.tol")
    for i, sc in enumerate(doc.get("scenarios", [])):
        where = json_path(["scenarios", i])
        for key in ("K", "L", "base_radius", "triple_base_radius", "spectator_radius"):
            if key in sc and int(sc[key]) > MAX_TORUS_K:
                raise ConfigParse(f"{where}.{key}: truncation {sc[key]} exceeds {MAX_TORUS_K}")
        if "J" in sc and float(sc["J"]) > MAX_SU2_SPIN:
            raise ConfigParse(f"{where}.J: spin cutoff {sc['J']} exceeds {MAX_SU2_SPIN:g}")
        if sc.get("tol") is not None:
            validate_tolerance(sc["tol"], f"{where}.tol")
        dim = estimate_dimension(sc)
        if dim > MAX_DIMENSION:
            raise ConfigParse(f"{where}: Hilbert dimension {dim} exceeds {MAX_DIMENSION}")


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------

def parse_matrix(raw: Any, field_name: str = "matrix") -> np.ndarray:
    """
    Nested rows of numbers or [re, im] pairs -> complex square matrix.

    Real matrices may be given as plain numbers; complex entries as
    two-element lists.
    """
    if not isinstance(raw, list) or not raw or not all(isinstance(row, list) for row in raw):
        raise ConfigParse(f"{field_name}: matrix must be a non-empty list of rows")
    n = len(raw)
    out = np.zeros((n, n), dtype=np.complex128)
    for i, row in enumerate(raw):
        if len(row) != n:
            raise ConfigParse(f"{field_name}[{i}]: row of length {len(row)} in a {n}x{n} matrix")
        for j, entry in enumerate(row):
            if isinstance(entry, list):
                if len(entry) != 2:
                    raise ConfigParse(f"{field_name}[{i}][{j}]: complex entries are [re, im] pairs")
                out[i, j] = complex(float(entry[0]), float(entry[1]))
            else:
                out[i, j] = float(entry)
    return out
