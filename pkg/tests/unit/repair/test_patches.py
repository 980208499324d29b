import json

from databricks.labs.specfix.lang.parser import parse
from databricks.labs.specfix.lang.widths import IntWidth
from databricks.labs.specfix.repair.patches import PatchRecord, fixed_path, unified_diff, write_fixed, write_patches

SUM = parse("input i8 a, b;\ni8 c;\nc = a + b;\n")


def test_unified_diff():
    widened = SUM.retyped({"c": IntWidth.I16})

    diff = unified_diff(SUM, widened, "sum.mi")

    assert diff.startswith("--- a/sum.mi\n+++ b/sum.mi\n")
    assert "-i8 c;\n" in diff
    assert "+i16 c;\n" in diff
    assert not unified_diff(SUM, SUM)


def test_fixed_file_lands_next_to_the_source(tmp_path):
    source = tmp_path / "sum.mi"

    out = write_fixed(source, SUM.retyped({"c": IntWidth.I16}))

    assert out == fixed_path(source) == tmp_path / "sum.fixed.mi"
    assert parse(out.read_text()).width_of("c") == IntWidth.I16


def test_patch_records_serialize(tmp_path):
    record = PatchRecord("widen", "stmt 1", "i8 c = a + b", "i16 c = a + b", {"scope": "exhaustive"})

    out = write_patches(tmp_path / "sum.mi", [record])

    assert out.name == "sum.patch.json"
    assert json.loads(out.read_text()) == [record.as_dict()]
    assert json.loads(record.to_json())["evidence"] == {"scope": "exhaustive"}
