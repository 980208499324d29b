import pytest

from databricks.labs.specfix.lang.parser import parse, parse_expr
from databricks.labs.specfix.lang.printer import print_expr
from databricks.labs.specfix.lang.widths import IntWidth
from databricks.labs.specfix.overflow.detection import DetectionMode, OverflowFinding, detect
from databricks.labs.specfix.overflow.intervals import parse_ranges
from databricks.labs.specfix.overflow.rules import OverflowKind
from databricks.labs.specfix.repair.overflow import (
    NO_VALID_PATCH,
    RewritePatch,
    Scope,
    Strategy,
    derive_mutants,
    repair_all,
    repair_io,
    validate_rewrite,
    widen,
)

OFFSET = parse("input i8 a, b;\ni8 c;\nc = a + 100 - b;\n")
OFFSET_RANGES = parse_ranges("a=0..60,b=50..100")
SUM = parse("input i8 a, b;\ni8 c;\nc = a + b;\n")
CHAIN = parse("input i8 a, b;\ni8 c, d;\nc = a + b;\nd = c + c;\n")


def _printed(patches):
    return [print_expr(patch.mutated) for patch in patches]


def test_mutants_reorder_the_additive_chain():
    assert _printed(derive_mutants(parse_expr("a + 100 - b"))) == ["100 + a - b", "100 - b + a", "a - b + 100"]


def test_mutants_reorder_factors_inside_terms():
    mutants = derive_mutants(parse_expr("a * b + c"))

    assert _printed(mutants) == ["b * a + c", "c + a * b", "c + b * a"]
    assert mutants[1].derivation == ("swap terms +a * b and +c",)


def test_subtracted_term_never_leads():
    assert not derive_mutants(parse_expr("a - b"))


def test_division_is_never_reordered():
    assert not derive_mutants(parse_expr("a * b / 4"))


def test_mutants_are_capped():
    assert len(derive_mutants(parse_expr("a + b + c + d + e"), limit=10)) == 10


def test_rewrite_that_overflows_is_rejected():
    patch = RewritePatch(1, parse_expr("a + 100 - b"), parse_expr("100 + a - b"))

    validation = validate_rewrite(OFFSET, patch, ranges=OFFSET_RANGES)

    assert not validation.accepted
    assert validation.scope == Scope.EXHAUSTIVE
    assert validation.equivalent and not validation.overflow_free
    assert validation.violation is not None
    assert validation.violation.witness == {"a": 28, "b": 50}
    assert validation.reason == "sub-expression 100 + a can IO (witness a=28,b=50)"


def test_rewrite_that_changes_the_value_is_rejected():
    patch = RewritePatch(1, parse_expr("a + 100 - b"), parse_expr("a - b"))

    validation = validate_rewrite(OFFSET, patch, ranges=OFFSET_RANGES)

    assert not validation.accepted
    assert validation.overflow_free and not validation.equivalent
    assert validation.reason == "not equivalent to a + 100 - b (witness a=0,b=0)"


@pytest.mark.parametrize("scope", [Scope.EXHAUSTIVE, Scope.INTERVAL])
def test_valid_rewrite(scope):
    patch = RewritePatch(1, parse_expr("a + 100 - b"), parse_expr("100 - b + a"))

    validation = validate_rewrite(OFFSET, patch, scope=scope, ranges=OFFSET_RANGES)

    assert validation.accepted
    assert validation.scope == scope


def test_exhaustive_scope_needs_an_enumerable_domain():
    p = parse("input i32 a;\ni32 b;\nb = a + 1;\n")
    patch = RewritePatch(1, parse_expr("a + 1"), parse_expr("1 + a"))

    with pytest.raises(ValueError, match="exceed the limit"):
        validate_rewrite(p, patch, scope=Scope.EXHAUSTIVE)


def test_widening_one_variable():
    patch = widen(SUM, "c", IntWidth.I16, ranges=parse_ranges("a=0..127,b=0..127"))

    assert patch.widened == {"c": (IntWidth.I8, IntWidth.I16)}
    assert patch.trace == (("c", None),)
    assert str(patch) == "widen c: i8 -> i16"
    assert patch.apply(SUM).width_of("c") == IntWidth.I16


def test_widening_follows_the_data_flow():
    patch = widen(CHAIN, "c", IntWidth.I16, ranges=parse_ranges("a=0..100,b=0..100"))

    assert patch.widened == {"c": (IntWidth.I8, IntWidth.I16), "d": (IntWidth.I8, IntWidth.I16)}
    assert patch.trace == (("c", None), ("d", 2))


def test_widening_stops_when_readers_fit():
    patch = widen(CHAIN, "c", IntWidth.I16, ranges=parse_ranges("a=0..10,b=0..10"))

    assert patch.widened == {"c": (IntWidth.I8, IntWidth.I16)}
    assert patch.verified == (2,)


def test_widening_must_grow_the_type():
    with pytest.raises(ValueError, match="already i16"):
        widen(parse("input i8 a;\ni16 c;\nc = a;\n"), "c", IntWidth.I16)


def test_repair_tries_rewrites_before_widening():
    ranges = parse_ranges("a=0..127,b=0..127")
    finding = detect(SUM, DetectionMode.EXHAUSTIVE, ranges=ranges)[0]

    report = repair_io(SUM, finding, ranges=ranges)

    assert report.repaired
    assert report.strategy == Strategy.WIDEN
    assert report.program is not None and report.program.width_of("c") == IntWidth.I16
    assert [c["strategy"] for c in report.candidates] == ["rewrite", "widen"]
    assert not report.candidates[0]["accepted"]
    record = report.record(SUM)
    assert record is not None
    assert (record.before, record.after) == ("i8 c = a + b", "i16 c = a + b")
    assert record.evidence == {"scope": "exhaustive", "patch": "widen c: i8 -> i16"}


def test_repair_by_rewrite():
    finding = detect(OFFSET, DetectionMode.EXHAUSTIVE, ranges=OFFSET_RANGES)[0]

    report = repair_io(OFFSET, finding, ranges=OFFSET_RANGES)

    assert report.strategy == Strategy.REWRITE
    assert report.program is not None
    assert print_expr(report.program.find(1).expr) == "100 - b + a"
    assert [c["edit"] for c in report.candidates] == ["100 + a - b", "100 - b + a"]


def test_no_patch_when_widths_run_out():
    p = parse("input i64 a;\ni64 b;\nb = a * a;\n")
    ranges = parse_ranges("a=4000000000..4000000001")
    finding = detect(p, DetectionMode.EXHAUSTIVE, ranges=ranges)[0]

    report = repair_io(p, finding, ranges=ranges)

    assert report.outcome == NO_VALID_PATCH
    assert report.record(p) is None
    assert [c["strategy"] for c in report.candidates] == ["widen"]


def test_no_patch_for_unconstrained_i64_inputs():
    p = parse("input i64 a, b;\ni64 e;\ne = a + b;\n")
    finding = OverflowFinding(1, 0, OverflowKind.IO, "a + b", DetectionMode.INTERVAL)

    report = repair_io(p, finding)

    assert report.outcome == NO_VALID_PATCH
    assert report.program is None
    assert report.candidates[-1]["strategy"] == "widen"

    result = repair_all(p, DetectionMode.INTERVAL)

    assert result.outcome == NO_VALID_PATCH
    assert [f.key for f in result.remaining] == [(1, 0, "IO"), (1, 0, "IU")]


def test_only_assignments_are_repaired():
    p = parse("input i8 x;\nwhile (x + 1 < 10) x = x + 1;\n")
    finding = OverflowFinding(1, 0, OverflowKind.IO, "x + 1", DetectionMode.INTERVAL)

    report = repair_io(p, finding)

    assert report.outcome == NO_VALID_PATCH
    assert report.candidates[0]["reason"] == "not an assignment"


def test_repair_all_detects_again_after_each_patch():
    result = repair_all(CHAIN, ranges=parse_ranges("a=0..100,b=0..100"))

    assert result.outcome == "repaired"
    assert len(result.repairs) == 1
    assert result.program.width_of("d") == IntWidth.I16
    assert not detect(result.program, DetectionMode.EXHAUSTIVE, ranges=parse_ranges("a=0..100,b=0..100"))


def test_repair_all_without_findings():
    result = repair_all(SUM, ranges=parse_ranges("a=0..50,b=0..50"))

    assert result.outcome == "no-findings"
    assert result.as_dict() == {"outcome": "no-findings", "repairs": [], "remaining": []}
