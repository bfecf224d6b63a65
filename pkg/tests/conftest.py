import random

import pytest

from eegpass.crypto import SecretKey
from eegpass.model import Pel, PelTemplate, StateLevel, parse_template

PAPER_TEMPLATE = "[[qwe,H,0],[rty,0,H],[123,H,0]]"


class FakeClock:
    """Deterministic unix-seconds source for throttle and TOTP tests."""

    def __init__(self, start: float = 1_700_000_000.0):
        self.now = start

    def __call__(self) -> float:
        return self.now

    def advance(self, seconds: float) -> None:
        self.now += seconds


@pytest.fixture
def clock() -> FakeClock:
    return FakeClock()


@pytest.fixture
def test_key() -> SecretKey:
    return SecretKey(bytes(range(32)))


@pytest.fixture
def paper_template() -> PelTemplate:
    return parse_template(PAPER_TEMPLATE)


def random_template(rng: random.Random, max_pels: int = 4, wildcards: bool = True) -> PelTemplate:
    """Template with distinct pel chars and adjacent-distinct patterns."""
    alphabet = "abcdefghijklmnopqrstuvwxyz0123456789"
    n = rng.randint(1, max_pels)
    levels = list(StateLevel)
    choices = [*levels, None] if wildcards else levels
    pels = []
    prev = None
    used = set()
    for i in range(n):
        while True:
            chars = "".join(rng.choice(alphabet) for _ in range(rng.randint(1, 3)))
            if chars not in used:
                used.add(chars)
                break
        while True:
            pattern = (rng.choice(choices), rng.choice(choices))
            if pattern != prev:
                break
        prev = pattern
        pels.append(Pel(chars, *pattern))
    return PelTemplate(tuple(pels))
