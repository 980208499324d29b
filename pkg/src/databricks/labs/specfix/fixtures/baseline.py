import logging
import os
import random
import string
from collections.abc import Callable, Generator
from typing import Any, TypeVar

from pytest import fixture

from databricks.labs.specfix.config import SEED_VARIABLE
from databricks.labs.specfix.termination.prover import DEFAULT_SEED

_LOG = logging.getLogger(__name__)


@fixture
def make_random():
    """
    Fixture to generate random names.

    The names start with a lowercase letter followed by lowercase letters and digits, so they are
    valid both as file names and as variable names of the loop language.

    To generate a random name with default length of 16 characters:

    ```python
    random_name = make_random()
    assert len(random_name) == 16
    ```

    To generate a random name with a specified length:

    ```python
    random_name = make_random(k=8)
    assert len(random_name) == 8
    ```
    """

    def inner(k=16) -> str:
        charset = string.ascii_lowercase + string.digits
        return random.choice(string.ascii_lowercase) + "".join(random.choices(charset, k=int(k) - 1))

    return inner


@fixture
def specfix_seed(request) -> int:
    """
    Seed of every generator used by the fixtures.

    Taken from the `--specfix-seed` option, then from the `SPECFIX_SEED` environment variable,
    and falls back to the seed the prover samples with. Failing property tests log the seed so they
    can be replayed:

    ```shell
    pytest --specfix-seed 1234 tests/unit/test_generators.py
    ```
    """
    option = request.config.getoption("specfix_seed", default=None)
    if option is not None:
        return int(option)
    return int(os.environ.get(SEED_VARIABLE, DEFAULT_SEED))


@fixture
def specfix_rng(specfix_seed) -> random.Random:
    """A `random.Random` seeded with `specfix_seed`, fresh for every test."""
    _LOG.debug(f"seeding generators with {specfix_seed}")
    return random.Random(specfix_seed)


T = TypeVar("T")


def factory(name: str, create: Callable[..., T], remove: Callable[[T], None]) -> Generator[Callable[..., T]]:
    """
    Factory function for creating fixtures.

    The provided ``create`` function makes a resource, and the provided ``remove`` function
    disposes of it after the test is complete. Errors while removing are logged and ignored.

    Usage Example:
    --------------
    To create a fixture for managing scratch directories:

    .. code-block:: python

       @pytest.fixture
       def make_scratch_dir(tmp_path, make_random):
           def create():
               folder = tmp_path / make_random(8)
               folder.mkdir()
               return folder

           yield from factory("scratch directory", create, shutil.rmtree)
    """
    cleanup: list[T] = []

    def inner(**kwargs: Any) -> T:
        out = create(**kwargs)
        _LOG.debug(f"added {name} fixture: {out}")
        cleanup.append(out)
        return out

    yield inner
    _LOG.debug(f"clearing {len(cleanup)} {name} fixtures")
    for some in cleanup:
        try:
            _LOG.debug(f"removing {name} fixture: {some}")
            remove(some)
        except OSError as e:
            _LOG.debug(f"ignoring error while {name} {some} teardown: {e}")
