"""Tests for the JSONL run log."""

import json
import threading

import pytest

from framework.audit_logger import LOG_DIR_ENV, AuditEventType, AuditLogger, default_log_dir


def _read_events(log_path):
    with open(log_path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


@pytest.fixture
def audit(tmp_path):
    return AuditLogger(log_dir=tmp_path, config_path="configs/demo.json")


class TestAuditLogger:
    def test_run_start_written_on_construction(self, audit):
        events = _read_events(audit.log_path)
        assert len(events) == 1
        assert events[0]["event_type"] == "RUN_START"
        assert events[0]["config_path"] == "configs/demo.json"

    def test_mandatory_fields(self, audit):
        audit.log(AuditEventType.CHECK_PASSED, scenario="t2", check="Z = Z*", residual=0.0, tolerance=1e-9)
        record = _read_events(audit.log_path)[-1]
        for key in ("event_id", "timestamp_utc", "run_id", "event_type"):
            assert key in record
        assert record["run_id"] == audit.run_id
        assert record["residual"] == 0.0

    def test_none_fields_dropped(self, audit):
        audit.log(AuditEventType.SCENARIO_START, scenario="t2", kind=None)
        record = _read_events(audit.log_path)[-1]
        assert "kind" not in record

    def test_file_name_carries_run_prefix(self, tmp_path):
        audit = AuditLogger(log_dir=tmp_path, run_id="abcdef0123456789")
        assert audit.log_path.name.startswith("run_abcdef01_")
        assert audit.log_path.suffix == ".jsonl"

    def test_close_writes_run_end_with_exit_code(self, audit):
        audit.close(exit_code=1)
        record = _read_events(audit.log_path)[-1]
        assert record["event_type"] == "RUN_END"
        assert record["exit_code"] == 1

    def test_append_only_across_instances(self, tmp_path):
        first = AuditLogger(log_dir=tmp_path, run_id="same-run-id")
        first.log(AuditEventType.CONFIG_LOADED, scenarios=0)
        second = AuditLogger(log_dir=tmp_path, run_id="same-run-id")
        assert first.log_path == second.log_path
        assert [e["event_type"] for e in _read_events(second.log_path)] == [
            "RUN_START", "CONFIG_LOADED", "RUN_START",
        ]

    def test_concurrent_writes_keep_lines_intact(self, audit):
        def worker(i):
            for j in range(20):
                audit.log(AuditEventType.CHECK_PASSED, scenario=f"s{i}", check=f"c{j}")

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        events = _read_events(audit.log_path)
        assert len(events) == 1 + 4 * 20
        assert len({e["event_id"] for e in events}) == len(events)

    def test_non_json_values_are_stringified(self, audit, tmp_path):
        audit.log(AuditEventType.REPORT_WRITTEN, path=tmp_path / "report.json")
        assert _read_events(audit.log_path)[-1]["path"] == str(tmp_path / "report.json")


class TestDefaultLogDir:
    def test_env_override_read_at_call_time(self, monkeypatch, tmp_path):
        monkeypatch.setenv(LOG_DIR_ENV, str(tmp_path / "logs"))
        assert default_log_dir() == tmp_path / "logs"
        audit = AuditLogger()
        assert audit.log_path.parent == tmp_path / "logs"

    def test_fallback_is_project_run_logs(self, monkeypatch):
        monkeypatch.delenv(LOG_DIR_ENV, raising=False)
        assert default_log_dir().name == ".run_logs"
