import random
from unittest.mock import MagicMock

from databricks.labs.specfix.fixtures.baseline import factory, make_random, specfix_rng, specfix_seed
from databricks.labs.specfix.fixtures.unwrap import call_fixture
from databricks.labs.specfix.termination.prover import DEFAULT_SEED


def test_make_random():
    random_name = call_fixture(make_random)

    assert len(random_name()) == 16
    assert len(random_name(k=8)) == 8
    assert random_name()[0].isalpha()


def _request(option):
    request = MagicMock()
    request.config.getoption.return_value = option
    return request


def test_seed_from_the_command_line(monkeypatch):
    monkeypatch.setenv("SPECFIX_SEED", "7")

    assert call_fixture(specfix_seed, _request("42")) == 42


def test_seed_from_the_environment(monkeypatch):
    monkeypatch.setenv("SPECFIX_SEED", "7")

    assert call_fixture(specfix_seed, _request(None)) == 7


def test_default_seed(monkeypatch):
    monkeypatch.delenv("SPECFIX_SEED", raising=False)

    assert call_fixture(specfix_seed, _request(None)) == DEFAULT_SEED


def test_seeded_generator():
    assert call_fixture(specfix_rng, 3).random() == random.Random(3).random()


def test_factory_removes_what_it_created():
    removed = []

    def remove(some):
        removed.append(some)
        if some == 2:
            raise OSError("gone already")

    counter = iter(range(1, 10))
    generator = factory("number", lambda: next(counter), remove)
    create = next(generator)

    assert [create(), create(), create()] == [1, 2, 3]
    assert not removed
    for _ in generator:
        pass
    assert removed == [1, 2, 3]
