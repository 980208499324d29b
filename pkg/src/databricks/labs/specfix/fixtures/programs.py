import logging
import random
from collections.abc import Callable, Generator, Sequence
from pathlib import Path

from pytest import fixture

from databricks.labs.specfix.config import SpecfixConfig
from databricks.labs.specfix.fixtures.baseline import factory
from databricks.labs.specfix.generators import RING, ProgramShape, random_expr_pair, random_program
from databricks.labs.specfix.lang.ast import Expr, Program
from databricks.labs.specfix.lang.printer import pretty_print
from databricks.labs.specfix.lang.testcases import TestCase
from databricks.labs.specfix.overflow.intervals import Interval
from databricks.labs.specfix.repair.patches import FIXED_SUFFIX, PATCH_SUFFIX
from databricks.labs.specfix.termination.prover import Prover

logger = logging.getLogger(__name__)

_DEFAULT_PROGRAM = """input i8 a, b;
i8 c;
c = a + b;
"""


def _remove_program(path: Path) -> None:
    path.unlink(missing_ok=True)
    # repairs leave their output next to the program
    path.with_name(path.stem + FIXED_SUFFIX).unlink(missing_ok=True)
    path.with_name(path.stem + PATCH_SUFFIX).unlink(missing_ok=True)


@fixture
def make_program_file(tmp_path, make_random) -> Generator[Callable[..., Path]]:
    """
    Returns a function to write a program to a `.mi` file and remove it, along with any
    `.fixed.mi` and `.patch.json` written beside it, after the test.

    Keyword arguments:
    * `source` (str | Program, optional): The program text, or a program to pretty-print. Defaults to `c = a + b` over `i8`.
    * `name` (str, optional): The file name without suffix. Defaults to a random name.
    * `folder` (Path, optional): The directory to write to. Defaults to `tmp_path`.

    This example runs detection on a file:
    ```python
    def test_detects_overflow(make_program_file):
        path = make_program_file(source="input i8 a; i8 b; b = a * 2;")
        assert main(["detect", str(path)]) == 1
    ```
    """

    def create(*, source: str | Program = _DEFAULT_PROGRAM, name: str | None = None, folder: Path | None = None):
        folder = folder or tmp_path
        folder.mkdir(parents=True, exist_ok=True)
        path = folder / f"{name or make_random(8)}.mi"
        text = source if isinstance(source, str) else pretty_print(source)
        path.write_text(text, encoding="utf8")
        logger.info(f"Created program: {path}")
        return path

    yield from factory("program file", create, _remove_program)


@fixture
def make_test_file(tmp_path, make_random) -> Generator[Callable[..., Path]]:
    """
    Returns a function to write test cases to a `.tests` file and remove it after the test.

    Keyword arguments:
    * `cases` (str | Sequence[TestCase]): Lines of the form `in: x=3 ; out: x=10`, or parsed test cases.
    * `name` (str, optional): The file name without suffix. Defaults to a random name.
    * `folder` (Path, optional): The directory to write to. Defaults to `tmp_path`.

    ```python
    def test_repairs_loop(make_program_file, make_test_file):
        tests = make_test_file(cases="in: x=0 ; out: x=10")
    ```
    """

    def create(*, cases: str | Sequence[TestCase], name: str | None = None, folder: Path | None = None) -> Path:
        folder = folder or tmp_path
        folder.mkdir(parents=True, exist_ok=True)
        path = folder / f"{name or make_random(8)}.tests"
        text = cases if isinstance(cases, str) else "\n".join(str(case) for case in cases) + "\n"
        path.write_text(text, encoding="utf8")
        return path

    yield from factory("test file", create, lambda path: path.unlink(missing_ok=True))


@fixture
def make_manifest(tmp_path, make_random) -> Generator[Callable[..., Path]]:
    """
    Returns a function to write a corpus manifest into a fresh directory; program paths in the
    manifest are relative to that directory, which is also where `make_program_file(folder=...)`
    should put the programs.

    Keyword arguments:
    * `entries` (str | Sequence[str]): Manifest lines, `path ; kind ; key=value ...`.
    * `folder` (Path, optional): The directory to write to. Defaults to a new directory in `tmp_path`.

    ```python
    def test_runs_corpus(make_manifest, make_program_file):
        manifest = make_manifest(entries=[])
        assert main(["corpus", str(manifest)]) == 0
    ```
    """

    def create(*, entries: str | Sequence[str] = (), folder: Path | None = None) -> Path:
        folder = folder or tmp_path / f"corpus-{make_random(6)}"
        folder.mkdir(parents=True, exist_ok=True)
        path = folder / "manifest.txt"
        text = entries if isinstance(entries, str) else "".join(f"{line}\n" for line in entries)
        path.write_text(text, encoding="utf8")
        return path

    yield from factory("manifest", create, lambda path: path.unlink(missing_ok=True))


@fixture
def make_random_program(specfix_rng: random.Random) -> Callable[..., Program]:
    """
    Returns a function generating well-formed random programs from the seeded generator.

    Keyword arguments are the fields of `databricks.labs.specfix.generators.ProgramShape`:
    `inputs`, `locals`, `statements`, `depth`, `widths`, `input_width`, `ops`, `loops`, `constants`.

    ```python
    def test_round_trip(make_random_program):
        p = make_random_program(statements=6, loops=True)
        assert parse(pretty_print(p)) == p
    ```
    """

    def inner(**kwargs) -> Program:
        return random_program(specfix_rng, ProgramShape(**kwargs))

    return inner


@fixture
def make_random_expr(specfix_rng: random.Random) -> Callable[..., tuple[Expr, Expr]]:
    """
    Returns a function generating pairs of random expressions over the same variables, about half
    of them equivalent by construction.

    ```python
    def test_oracles_agree(make_random_expr):
        left, right = make_random_expr(variables=3, depth=4)
    ```
    """

    def inner(*, variables: int = 3, depth: int = 4, ops: Sequence[str] = RING) -> tuple[Expr, Expr]:
        return random_expr_pair(specfix_rng, variables, depth, ops)

    return inner


@fixture
def specfix_config(specfix_seed) -> Callable[..., SpecfixConfig]:
    """
    Returns a function building a `SpecfixConfig` seeded with `specfix_seed`; keyword arguments
    override single fields and may be given as strings, like in a config file.

    ```python
    def test_wrapped(specfix_config):
        config = specfix_config(semantics="wrapped", budget=1)
    ```
    """

    def inner(**overrides) -> SpecfixConfig:
        return SpecfixConfig(seed=specfix_seed).with_overrides(overrides)

    return inner


@fixture
def counting_prover(specfix_config) -> Callable[..., Prover]:
    """
    Returns a function creating a fresh prover; each prover counts how often it was asked to prove
    a loop, which lets tests check that failing candidates never reach it.

    ```python
    def test_prover_only_sees_passing_candidates(counting_prover):
        prover = counting_prover(ranges={"x": Interval(0, 20)})
        repair_termination(p, tests, prover=prover)
        assert prover.invocations == 2
    ```
    """

    def inner(*, ranges: dict[str, Interval] | None = None, **overrides) -> Prover:
        return specfix_config(**overrides).prover(ranges)

    return inner
