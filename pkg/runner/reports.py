"""Report assembly and persistence.

Reports are canonical JSON (sorted keys) validated against
schemas/report.schema.json before they touch disk. Spectra go to one CSV per
scenario with header ``eigenvalue,multiplicity,block_label``. Every write is
confined by the PathEnforcer.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import platform
import re
import sys
from importlib import metadata
from pathlib import Path
from typing import Any

import numpy as np

from framework.input_validator import load_schema, validate_against_schema
from framework.path_enforcer import PathEnforcer
from geometry.numerics import CheckReport, Spectrum
from runner.models import CheckRecord, Provenance, Report, ScenarioResult, SpectrumRow

SCHEMA_DIR = Path(__file__).resolve().parent / "schemas"
CONFIG_SCHEMA_PATH = SCHEMA_DIR / "config.schema.json"
REPORT_SCHEMA_PATH = SCHEMA_DIR / "report.schema.json"

# Distributions recorded in provenance.
PROVENANCE_PACKAGES: tuple[str, ...] = ("numpy", "scipy", "pydantic", "jsonschema", "PyYAML")

SPECTRA_HEADER = ("eigenvalue", "multiplicity", "block_label")


# ---------------------------------------------------------------------------
# Canonical JSON and provenance
# ---------------------------------------------------------------------------

def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, separators=(", ", ": "))


def config_sha256(doc: Any) -> str:
    """sha256 of the canonical JSON form, so YAML and JSON spellings agree."""
    return hashlib.sha256(canonical_json(doc).encode("utf-8")).hexdigest()


def package_versions() -> dict[str, str]:
    out = {}
    for name in PROVENANCE_PACKAGES:
        try:
            out[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            out[name] = "unknown"
    return out


def provenance(config_path: str | Path, doc: Any, seed: int, started_utc: str, wall_time_s: float) -> Provenance:
    return Provenance(
        config_path=str(config_path),
        config_sha256=config_sha256(doc),
        seed=seed,
        started_utc=started_utc,
        wall_time_s=wall_time_s,
        python=sys.version.split()[0],
        platform=platform.platform(),
        packages=package_versions(),
    )


# ---------------------------------------------------------------------------
# Conversion
# ---------------------------------------------------------------------------

def finite_or_none(x: float) -> float | None:
    x = float(x)
    return x if math.isfinite(x) else None


def jsonable(obj: Any) -> Any:
    """numpy scalars and arrays to plain JSON values; non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return finite_or_none(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [finite_or_none(obj.real), finite_or_none(obj.imag)]
    return obj if obj is None or isinstance(obj, str) else str(obj)


def check_records(report: CheckReport) -> list[CheckRecord]:
    return [
        CheckRecord(name=o.name, passed=o.passed, residual=finite_or_none(o.residual), tolerance=o.tolerance)
        for o in report.outcomes
    ]


def spectrum_rows(spectra: list[tuple[str, Spectrum]]) -> list[SpectrumRow]:
    return [
        SpectrumRow(eigenvalue=value, multiplicity=mult, block_label=label)
        for label, spectrum in spectra
        for value, mult in spectrum.rows()
    ]


def scenario_result(name: str, kind: str, outcome, wall_time_s: float) -> ScenarioResult:
    return ScenarioResult(
        name=name,
        kind=kind,
        passed=outcome.report.passed,
        checks=check_records(outcome.report),
        spectra=spectrum_rows(outcome.spectra),
        sizes=outcome.sizes,
        invariants=jsonable(outcome.invariants),
        wall_time_s=wall_time_s,
    )


def failed_result(name: str, kind: str, error: Exception, wall_time_s: float) -> ScenarioResult:
    return ScenarioResult(name=name, kind=kind, passed=False, wall_time_s=wall_time_s, error=str(error))


def build_report(run_id: str, results: list[ScenarioResult], prov: Provenance) -> Report:
    return Report(run_id=run_id, passed=all(r.passed for r in results), scenarios=results, provenance=prov)


# ---------------------------------------------------------------------------
# Writing
# ---------------------------------------------------------------------------

def write_report(report: Report, path: str | Path, enforcer: PathEnforcer) -> Path:
    """Validate against the report schema, then write canonical JSON."""
    doc = report.model_dump(mode="json")
    validate_against_schema(doc, load_schema(REPORT_SCHEMA_PATH), what="report")
    target = enforcer.prepare(path, "write report")
    target.write_text(canonical_json(doc) + "\n", encoding="utf-8")
    return target


def spectra_filename(scenario_name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", scenario_name).strip("._") or "scenario"


def write_spectra(result: ScenarioResult, directory: str | Path, enforcer: PathEnforcer) -> Path:
    target = enforcer.prepare(Path(directory) / f"{spectra_filename(result.name)}.csv", "write spectra")
    with open(target, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(SPECTRA_HEADER)
        for row in result.spectra:
            writer.writerow([repr(row.eigenvalue), row.multiplicity, row.block_label])
    return target
