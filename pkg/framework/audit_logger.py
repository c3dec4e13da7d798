"""Structured run log for scenario runs.

Every auditable step of a ``run`` invocation flows through AuditLogger.log().
Records are written as JSONL (one JSON object per line) to an append-only
file. Each record carries:
  - event_id        (unique per record)
  - timestamp_utc   (UTC, ISO 8601)
  - run_id          (correlates all records of one invocation)
  - event_type      (one of AuditEventType)
  + event-specific context fields (scenario, check, residual, path, ...)

The log file is opened in append mode on each write and never read back or
truncated by the runner. The log directory is protected from report output
by the path enforcer.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any

LOG_DIR_ENV = "BUNDLELAB_LOG_DIR"
_PROJECT_ROOT = Path(__file__).resolve().parent.parent


class AuditEventType(str, Enum):
    """Catalogue of run events."""
    # Run lifecycle
    RUN_START           = "RUN_START"
    RUN_END             = "RUN_END"
    # Config
    CONFIG_LOADED       = "CONFIG_LOADED"
    VALIDATION_FAILED   = "VALIDATION_FAILED"
    # Scenarios
    SCENARIO_START      = "SCENARIO_START"
    SCENARIO_BUILT      = "SCENARIO_BUILT"
    SCENARIO_FAILED     = "SCENARIO_FAILED"   # build error, wrapped core exception
    CHECK_PASSED        = "CHECK_PASSED"
    CHECK_FAILED        = "CHECK_FAILED"
    # Output
    SPECTRA_WRITTEN     = "SPECTRA_WRITTEN"
    REPORT_WRITTEN      = "REPORT_WRITTEN"
    OUTPUT_DENIED       = "OUTPUT_DENIED"     # path outside allowed roots


def default_log_dir() -> Path:
    """BUNDLELAB_LOG_DIR if set, else <project root>/.run_logs. Read at call time."""
    configured = os.environ.get(LOG_DIR_ENV)
    return Path(configured) if configured else _PROJECT_ROOT / ".run_logs"


class AuditLogger:
    """
    Thread-safe, append-only run logger.

    One instance per run. Created before any scenario is built and closed
    after the report is written. The log file path is
    run_<run_prefix>_<date>.jsonl inside log_dir.
    """

    def __init__(
        self,
        log_dir: str | Path | None = None,
        run_id: str | None = None,
        config_path: str | None = None,
    ):
        self.run_id = run_id or str(uuid.uuid4())
        self.config_path = config_path

        self.log_dir = Path(log_dir) if log_dir is not None else default_log_dir()
        self.log_dir.mkdir(parents=True, exist_ok=True)

        date_str = datetime.now(timezone.utc).strftime("%Y%m%d")
        self._log_path = self.log_dir / f"run_{self.run_id[:8]}_{date_str}.jsonl"
        self._lock = threading.Lock()

        self.log(AuditEventType.RUN_START, config_path=config_path)

    @property
    def log_path(self) -> Path:
        return self._log_path

    def log(self, event_type: AuditEventType, **kwargs: Any) -> None:
        """
        Write one record.

        Mandatory fields are always present; callers add context via kwargs.
        None values are omitted to keep records compact. Raises OSError on
        write failure.
        """
        record: dict[str, Any] = {
            "event_id":      str(uuid.uuid4()),
            "timestamp_utc": datetime.now(timezone.utc).isoformat(),
            "run_id":        self.run_id,
            "event_type":    event_type.value,
            **{k: v for k, v in kwargs.items() if v is not None},
        }
        # numpy scalars and paths fall back to str()
        line = json.dumps(record, default=str)

        # scenarios log from worker threads
        with self._lock, open(self._log_path, "a", encoding="utf-8") as f:
            f.write(line + "\n")
            f.flush()

    def close(self, exit_code: int | None = None) -> None:
        """Write RUN_END. Call in a finally block."""
        self.log(AuditEventType.RUN_END, exit_code=exit_code)
