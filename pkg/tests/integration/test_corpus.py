import json

import pytest

from databricks.labs.specfix.cli import main
from databricks.labs.specfix.corpus import EntryKind, EntryStatus
from databricks.labs.specfix.overflow.rules import rule_disagreements


def _failures(report):
    return {e.name: e.mismatches or e.error for e in report.entries if e.status != EntryStatus.PASSED}


def test_every_bundled_entry_passes(bundled_report):
    assert not _failures(bundled_report)
    assert bundled_report.passed


def test_corpus_size(bundled_report):
    kinds = [e.kind for e in bundled_report.entries]
    loops = sum(len(e.verdicts) for e in bundled_report.entries)

    assert kinds.count(EntryKind.IO_BUG) >= 10
    assert loops >= 20


def test_verdicts_are_mostly_definite(bundled_report):
    counters = bundled_report.counters

    assert counters["verdicts:TR"] + counters["verdicts:NT"] >= 15
    assert counters["wrong-verdicts"] == 0
    assert counters["witness-replay-failures"] == 0
    assert counters["prover-contradictions"] == 0


@pytest.mark.parametrize(
    "counter",
    [
        "revalidation-failures",
        "rule-soundness-failures",
        "validity-mismatches",
        "prover-on-failing-candidate",
        "prover-invocation-mismatches",
        "slice-disagreements",
    ],
)
def test_cross_checks_stay_at_zero(bundled_report, counter):
    assert bundled_report.counters[counter] == 0


def test_cross_checks_ran(bundled_report):
    counters = bundled_report.counters

    assert counters["revalidated-rewrites"] > 0
    assert counters["rule-soundness-checked"] > 0
    assert counters["slice-checked-loops"] >= 20


def test_monotone_bugs_are_repaired_and_the_rest_reported(bundled_report):
    for entry in bundled_report.entries:
        if entry.kind != EntryKind.TERMINATION_BUG:
            continue
        assert entry.repair is not None
        assert entry.repair["outcome"] in ("valid", "no-valid-patch", "fallback-unsupported"), entry.name
        if entry.repair["outcome"] == "fallback-unsupported":
            assert entry.repair["patch"] is None


@pytest.mark.timeout(30)
def test_rule_oracle_on_every_i8_pair():
    counts = rule_disagreements()

    assert all(row["corrected-vs-oracle"] == 0 for row in counts.values())
    assert counts["+"]["paper-vs-corrected"] == 0
    assert counts["-"]["paper:IU"] > 0
    assert counts["*"]["paper-vs-corrected"] > 0


@pytest.mark.timeout(600)
def test_reports_do_not_depend_on_parallelism(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    serial, parallel = tmp_path / "serial.json", tmp_path / "parallel.json"

    assert main(["corpus", "--jobs", "1", "--report", str(serial)]) == 0
    assert main(["corpus", "--jobs", "4", "--report", str(parallel)]) == 0

    first, second = json.loads(serial.read_text()), json.loads(parallel.read_text())
    first["body"]["config"].pop("jobs")
    second["body"]["config"].pop("jobs")
    assert first["body"] == second["body"]
