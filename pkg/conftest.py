from pathlib import Path

import pytest

import config_manager

PUZZLE_DIR = Path(__file__).parent / 'puzzles'


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance checks (deselect with -m 'not slow')")


@pytest.fixture(autouse=True)
def fresh_config():
    config_manager.get_runtime_config.cache_clear()
    yield
    config_manager.get_runtime_config.cache_clear()


@pytest.fixture
def easy_puzzle() -> str:
    return (PUZZLE_DIR / 'easy.txt').read_text()


@pytest.fixture
def hard_puzzle() -> str:
    return (PUZZLE_DIR / 'hard.txt').read_text()
