import json

import pytest

from databricks.labs.specfix.cli import main
from databricks.labs.specfix.repair.patches import FIXED_SUFFIX, PATCH_SUFFIX
from databricks.labs.specfix.repair.termination import Outcome, TerminationRepair

WRONG_WAY = "input i8 x;\nwhile (x < 10) x = x - 1;\n"
WRONG_WAY_TESTS = "in: x=0 ; out: x=10\nin: x=3 ; out: x=10\nin: x=15 ; out: x=15\n"


@pytest.fixture(autouse=True)
def no_config_file(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("SPECFIX_SEED", raising=False)


def test_detect_reports_findings(make_program_file, capsys):
    path = make_program_file()

    assert main(["detect", str(path)]) == 1
    out = capsys.readouterr().out
    assert "IO stmt=1 sub=a + b witness=a=1,b=127 mode=exhaustive count=8128" in out
    assert "IU stmt=1" in out


def test_detect_within_ranges(make_program_file, capsys):
    path = make_program_file()

    assert main(["detect", str(path), "--ranges", "a=0..50,b=0..50"]) == 0
    assert capsys.readouterr().out == ""


def test_detect_writes_a_report(make_program_file, tmp_path):
    path = make_program_file()
    report = tmp_path / "report.json"

    assert main(["detect", str(path), "--report", str(report)]) == 1
    document = json.loads(report.read_text())
    assert len(document["findings"]) == 2
    assert document["diagnostics"] == []


def test_config_file_selects_the_mode(make_program_file, tmp_path, capsys):
    path = make_program_file()
    config = tmp_path / "tuned.conf"
    config.write_text("mode=interval\n")

    assert main(["detect", str(path), "--config", str(config)]) == 1
    assert "mode=interval" in capsys.readouterr().out


@pytest.mark.parametrize(
    "source, args, message",
    [
        (None, [], "no such file"),
        ("input i8 a;\na = ;\n", [], "line 2"),
        ("input i8 a, b;\ni8 c;\nc = a + b;\n", ["--mode", "concrete"], "concrete detection needs --tests"),
        ("input i8 a, b;\ni8 c;\nc = a + b;\n", ["--ranges", "a=1"], "not a range"),
    ],
)
def test_usage_errors(make_program_file, tmp_path, capsys, source, args, message):
    path = tmp_path / "missing.mi" if source is None else make_program_file(source=source)

    assert main(["detect", str(path), *args]) == 2
    assert message in capsys.readouterr().err


def test_repair_overflow_by_widening(make_program_file, capsys):
    path = make_program_file(name="sum")

    assert main(["repair", str(path), "--kind", "io"]) == 0
    out = capsys.readouterr().out
    assert "outcome=repaired" in out
    assert "+i16 c;" in out
    assert (path.parent / f"sum{FIXED_SUFFIX}").exists()
    patches = json.loads((path.parent / f"sum{PATCH_SUFFIX}").read_text())
    assert len(patches) == 1


def test_repair_without_a_wider_width(make_program_file, capsys):
    path = make_program_file(source="input i64 a;\ni64 b;\nb = a * a;\n")

    assert main(["repair", str(path), "--ranges", "a=4000000000..4000000001"]) == 4
    assert "unrepaired: IO stmt=1" in capsys.readouterr().out


def test_unconstrained_i64_inputs_use_interval_detection(make_program_file, capsys):
    path = make_program_file(source="input i64 a, b;\ni64 e;\ne = a + b;\n")

    assert main(["detect", str(path)]) == 1
    assert "IO stmt=1 sub=a + b witness= mode=interval" in capsys.readouterr().out

    assert main(["repair", str(path)]) == 4
    out = capsys.readouterr().out
    assert "outcome=no-valid-patch-found" in out
    assert "unrepaired: IO stmt=1" in out


def test_repair_termination(make_program_file, make_test_file, capsys):
    path = make_program_file(source=WRONG_WAY, name="down")
    tests = make_test_file(cases=WRONG_WAY_TESTS)

    assert main(["repair", str(path), "--tests", str(tests), "--ranges", "x=0..20"]) == 0
    out = capsys.readouterr().out
    assert "outcome=valid" in out
    assert "+    x = x + 1;" in out
    assert (path.parent / f"down{FIXED_SUFFIX}").exists()


def test_termination_repair_needs_tests(make_program_file, capsys):
    path = make_program_file(source=WRONG_WAY)

    assert main(["repair", str(path), "--ranges", "x=0..20"]) == 2
    assert "termination repair needs --tests" in capsys.readouterr().err


def test_plausible_repair(make_program_file, make_test_file, mocker):
    path = make_program_file(source=WRONG_WAY)
    tests = make_test_file(cases=WRONG_WAY_TESTS)
    mocker.patch(
        "databricks.labs.specfix.cli.repair_termination", return_value=TerminationRepair(Outcome.PLAUSIBLE)
    )

    assert main(["repair", str(path), "--kind", "termination", "--tests", str(tests)]) == 3


@pytest.mark.parametrize(
    "source, ranges, code",
    [
        ("input i8 x;\nwhile (x < 10) x = x + 1;\n", "x=0..20", 0),
        (WRONG_WAY, "x=0..20", 1),
        ("input i32 x;\nwhile (x > 0) x = x / 2;\n", "", 5),
    ],
)
def test_prove(make_program_file, source, ranges, code):
    path = make_program_file(source=source)

    assert main(["prove", str(path), "--ranges", ranges, "--seed", "3"]) == code


def test_prove_needs_a_loop(make_program_file, capsys):
    path = make_program_file()

    assert main(["prove", str(path)]) == 2
    assert "has no loop" in capsys.readouterr().err


def test_check_equiv(capsys):
    assert main(["check-equiv", "(a + b) * (a + b)", "a * a + 2 * a * b + b * b"]) == 0
    assert capsys.readouterr().out.strip() == "equivalent"
    assert main(["check-equiv", "a - b", "b - a"]) == 1
    assert capsys.readouterr().out.startswith("inequivalent witness=")
    assert main(["check-equiv", "a / b", "a"]) == 2


def test_rules(capsys):
    assert main(["rules"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [line.split()[0] for line in lines] == ["+", "-", "*"]


def test_empty_corpus(make_manifest, capsys):
    assert main(["corpus", str(make_manifest(entries=[]))]) == 0
    assert "corpus report (0 entries)" in capsys.readouterr().out


def test_version(capsys):
    with pytest.raises(SystemExit) as exc_info:
        main(["--version"])

    assert exc_info.value.code == 0
    assert capsys.readouterr().out.startswith("specfix ")


@pytest.mark.parametrize("command", ["prove", "repair"])
def test_help_names_the_default_semantics(command, capsys):
    with pytest.raises(SystemExit) as exc_info:
        main([command, "--help"])

    assert exc_info.value.code == 0
    assert "mathematical by default" in " ".join(capsys.readouterr().out.split())


def test_unknown_command():
    with pytest.raises(SystemExit) as exc_info:
        main(["fix"])

    assert exc_info.value.code == 2
