import logging

from pytest import fixture
from databricks.labs.blueprint.logger import install_logger

from databricks.labs.specfix.config import SpecfixConfig
from databricks.labs.specfix.corpus import BUNDLED, RunReport, run_corpus

install_logger()

logging.getLogger('databricks.labs.specfix').setLevel(logging.DEBUG)


@fixture(scope="session")
def bundled_report() -> RunReport:
    return run_corpus(BUNDLED, SpecfixConfig(jobs=4))
