"""bundlelab command line.

    python -m runner run <config> --out <report.json> [--emit-spectra <dir>]
                                  [--seed <n>] [--tol <float>]

Exit codes: 0 every check passed, 1 some check failed (report still
written), 2 config, build or output error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

from dotenv import load_dotenv
from pydantic import ValidationError

from framework.audit_logger import AuditEventType, AuditLogger
from framework.input_validator import (
    check_limits,
    json_path,
    load_config_document,
    load_schema,
    validate_against_schema,
    validate_tolerance,
)
from framework.path_enforcer import PathEnforcer
from geometry.errors import CheckFailure, ConfigParse, ScenarioBuild
from runner.models import RunConfig, ScenarioResult
from runner.reports import (
    CONFIG_SCHEMA_PATH,
    build_report,
    config_sha256,
    failed_result,
    finite_or_none,
    provenance,
    scenario_result,
    write_report,
    write_spectra,
)
from runner.scenarios import run_scenario

load_dotenv()

logger = logging.getLogger(__name__)

DEFAULT_TOL_ENV = "BUNDLELAB_DEFAULT_TOL"
MAX_WORKERS_ENV = "BUNDLELAB_MAX_WORKERS"
DEFAULT_TOL = 1e-9
DEFAULT_MAX_WORKERS = 4

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_ERROR = 2

PREFIX = "[bundlelab]"


# ---------------------------------------------------------------------------
# Arguments and environment
# ---------------------------------------------------------------------------

def _tolerance_arg(value: str) -> float:
    try:
        return validate_tolerance(value, "--tol")
    except ConfigParse as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _seed_arg(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2^64), got {value}")
    return seed


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        prog="bundlelab",
        description="Run spectral-triple scenarios and write residual reports.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging from the geometry modules.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="Run every scenario of a config and write a report.")
    run.add_argument("config", type=Path, help="Scenario config (.json, .yaml or .yml).")
    run.add_argument("--out", type=Path, required=True, help="Report JSON path.")
    run.add_argument("--emit-spectra", type=Path, default=None, metavar="DIR",
                     help="Also write one eigenvalue CSV per scenario into DIR.")
    run.add_argument("--seed", type=_seed_arg, default=None, help="Override the config seed.")
    run.add_argument("--tol", type=_tolerance_arg, default=None,
                     help=f"Override the run tolerance (default ${DEFAULT_TOL_ENV} or {DEFAULT_TOL:g}).")
    return parser.parse_args(argv)


def default_tol() -> float:
    return validate_tolerance(os.environ.get(DEFAULT_TOL_ENV, DEFAULT_TOL), DEFAULT_TOL_ENV)


def max_workers() -> int:
    raw = os.environ.get(MAX_WORKERS_ENV, str(DEFAULT_MAX_WORKERS))
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigParse(f"{MAX_WORKERS_ENV}: expected an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigParse(f"{MAX_WORKERS_ENV}: must be >= 1, got {n}")
    return n


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------

def load_run_config(path: str | Path) -> tuple[RunConfig, dict[str, Any]]:
    """Schema, size limits, then the typed model. Everything raises ConfigParse."""
    doc = load_config_document(path)
    validate_against_schema(doc, load_schema(CONFIG_SCHEMA_PATH))
    check_limits(doc)
    try:
        cfg = RunConfig.model_validate(doc)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = [p for p in err["loc"] if p not in {"torus_crossed", "warped_u1", "su2_group", "deform_t2", "custom"}]
        raise ConfigParse(f"config {json_path(loc)}: {err['msg']}") from exc
    return cfg, doc


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

def evaluate(spec, seed: int, tol: float, audit: AuditLogger) -> ScenarioResult:
    """Run one scenario; build errors become a failed result carrying the message."""
    audit.log(AuditEventType.SCENARIO_START, scenario=spec.name, kind=spec.kind)
    start = time.perf_counter()
    try:
        outcome = run_scenario(spec, seed, spec.tol or tol)
    except ScenarioBuild as exc:
        audit.log(AuditEventType.SCENARIO_FAILED, scenario=spec.name, error=str(exc))
        return failed_result(spec.name, spec.kind, exc, time.perf_counter() - start)
    wall = time.perf_counter() - start
    audit.log(AuditEventType.SCENARIO_BUILT, scenario=spec.name, sizes=outcome.sizes, wall_time_s=wall)
    for o in outcome.report.outcomes:
        audit.log(
            AuditEventType.CHECK_PASSED if o.passed else AuditEventType.CHECK_FAILED,
            scenario=spec.name, check=o.name, residual=finite_or_none(o.residual), tolerance=o.tolerance,
        )
    return scenario_result(spec.name, spec.kind, outcome, wall)


def _status_line(result: ScenarioResult) -> str:
    if result.error is not None:
        return f"{PREFIX} ERROR {result.name} ({result.error})"
    failed = [c for c in result.checks if not c.passed]
    word = "OK" if not failed else "FAIL"
    detail = f"{len(result.checks)} checks" if not failed else f"{len(failed)}/{len(result.checks)} checks failed"
    return f"{PREFIX} {word} {result.name} [{result.kind}] ({detail}, {result.wall_time_s:.2f}s)"


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _deny(audit: AuditLogger, path: Path, exc: PermissionError) -> int:
    audit.log(AuditEventType.OUTPUT_DENIED, path=str(path), error=str(exc))
    print(f"{PREFIX} FAIL ({exc})", file=sys.stderr)
    return EXIT_ERROR


def run(args: argparse.Namespace, audit: AuditLogger) -> int:
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    try:
        enforcer = PathEnforcer.from_env(protected_dirs=[audit.log_dir])
        cfg, doc = load_run_config(args.config)
        tol = args.tol or cfg.tol or default_tol()
        workers = max_workers()
    except ValueError as exc:
        # ConfigParse is a ValueError, as are bad output roots
        audit.log(AuditEventType.VALIDATION_FAILED, error=str(exc))
        print(f"{PREFIX} FAIL ({exc})", file=sys.stderr)
        return EXIT_ERROR
    seed = cfg.seed if args.seed is None else args.seed
    audit.log(
        AuditEventType.CONFIG_LOADED,
        config_sha256=config_sha256(doc), scenarios=len(cfg.scenarios), seed=seed, tol=tol,
    )

    # refuse before doing any work
    targets = [(args.out, "write report")]
    if args.emit_spectra is not None:
        targets.append((args.emit_spectra, "write spectra"))
    for path, operation in targets:
        try:
            enforcer.check(path, operation)
        except PermissionError as exc:
            return _deny(audit, path, exc)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(evaluate, spec, seed, tol, audit) for spec in cfg.scenarios]
        results = [f.result() for f in futures]
    for result in results:
        print(_status_line(result))

    prov = provenance(args.config, doc, seed, started, time.perf_counter() - t0)
    report = build_report(audit.run_id, results, prov)
    try:
        written = write_report(report, args.out, enforcer)
    except PermissionError as exc:
        return _deny(audit, args.out, exc)
    audit.log(AuditEventType.REPORT_WRITTEN, path=str(written), passed=report.passed)

    if args.emit_spectra is not None:
        for result in results:
            try:
                csv_path = write_spectra(result, args.emit_spectra, enforcer)
            except PermissionError as exc:
                return _deny(audit, args.emit_spectra, exc)
            audit.log(AuditEventType.SPECTRA_WRITTEN, scenario=result.name, path=str(csv_path),
                      rows=len(result.spectra))

    print(f"{PREFIX} report written to {written}")
    if any(r.error is not None for r in results):
        return EXIT_ERROR
    if not report.passed:
        failed = sum(not c.passed for r in results for c in r.checks)
        print(f"{PREFIX} FAIL ({CheckFailure(f'{failed} checks failed')})", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    audit = AuditLogger(config_path=str(args.config))
    exit_code = EXIT_ERROR
    try:
        exit_code = run(args, audit)
    finally:
        audit.close(exit_code)
    return exit_code


if __name__ == "__main__":
    raise SystemExit(main())
