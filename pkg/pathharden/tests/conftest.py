import os

import pytest

from pathharden.crypto_runtime import HashConfig
from pathharden.hardening import HardeningMode, HardeningPolicy
from pathharden.minilang import parse_file

PATH = os.path.dirname(os.path.realpath(__file__))
CORPUS = os.path.join(os.path.dirname(PATH), 'corpus')
CORPUS_FILES = sorted(f for f in os.listdir(CORPUS) if f.endswith('.ml1'))

PINNED_SALT = bytes(range(16))


def corpus_path(name: str) -> str:
    return os.path.join(CORPUS, name)


def load_corpus(name: str):
    return parse_file(corpus_path(name))


@pytest.fixture(scope='session')
def php_filter():
    return load_corpus('php_filter.ml1')


@pytest.fixture()
def pinned_policy():
    return HardeningPolicy(hash_config=HashConfig(salt=PINNED_SALT))


@pytest.fixture()
def best_effort_policy():
    return HardeningPolicy(hash_config=HashConfig(salt=PINNED_SALT),
                           mode=HardeningMode.BEST_EFFORT)


def pytest_addoption(parser):
    parser.addoption(
        "--runslow", action="store_true", default=False, help="run slow tests"
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        # --runslow given in cli: do not skip slow tests
        return
    skip_slow = pytest.mark.skip(reason="need --runslow option to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "slow: mark test to run only with --runslow option."
    )
