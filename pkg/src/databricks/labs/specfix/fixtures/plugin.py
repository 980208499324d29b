from databricks.labs.specfix.fixtures.baseline import make_random, specfix_rng, specfix_seed
from databricks.labs.specfix.fixtures.programs import (
    counting_prover,
    make_manifest,
    make_program_file,
    make_random_expr,
    make_random_program,
    make_test_file,
    specfix_config,
)

__all__ = [
    'make_random',
    'specfix_seed',
    'specfix_rng',
    'make_program_file',
    'make_test_file',
    'make_manifest',
    'make_random_program',
    'make_random_expr',
    'specfix_config',
    'counting_prover',
]


def pytest_addoption(parser):
    group = parser.getgroup("specfix")
    group.addoption(
        "--specfix-seed",
        action="store",
        dest="specfix_seed",
        default=None,
        help="Seed for the random program and expression generators.",
    )
