import math

import pytest
from hypothesis import settings

from crisnoma.scenario import ScenarioConfig
from crisnoma.special import SPEED_OF_LIGHT

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

F_CARRIER = 28e9
LAM = SPEED_OF_LIGHT / F_CARRIER


def make_scenario(**kw) -> ScenarioConfig:
    base = dict(d_ur=(20.0, 50.0), mod_orders=(16, 4), d_rb=30.0, psi=2.2, sigma_n_sq=1e-9,
                f_carrier=F_CARRIER, width=4 * LAM, height=2 * LAM)
    base.update(kw)
    return ScenarioConfig(**base)


@pytest.fixture
def lam():
    return LAM


@pytest.fixture
def desk():
    return make_scenario()


@pytest.fixture
def two_user_large():
    return make_scenario(mod_orders=(64, 16), width=20 * LAM, height=5 * LAM)


def rel(a, b):
    return abs(a - b) / abs(b) if b else abs(a)


def db(x):
    return 10 * math.log10(x)


ACCEPTANCE_LINES: dict = {}


def report(number: int, ok: bool, detail: str) -> bool:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
