import numpy as np
import pytest

from expsynth.breaker import BreakerConfig, check_hypotheses, run_breaker
from expsynth.genfun import SimpleExample
from expsynth.spectra import IntervalFamily

ACCEPTANCE = {}


def dyadic_family(k_min, k_max, shift=0.0, exponent=0.2):
    ks = range(k_min, k_max + 1)
    rho = [2.0**k + shift for k in ks]
    return IntervalFamily(rho, [r**exponent for r in rho], k_min)


@pytest.fixture(scope="session")
def simple_model():
    return SimpleExample()


@pytest.fixture(scope="session")
def simple_hypotheses(simple_model):
    cfg = BreakerConfig(simple_model, dyadic_family(10, 18), (-2**20, 2**20))
    return check_hypotheses(cfg)


@pytest.fixture(scope="session")
def simple_run(simple_model):
    cfg = BreakerConfig(simple_model, dyadic_family(10, 18, shift=-0.5), (-2**20, 2**20))
    return run_breaker(cfg)


@pytest.fixture(scope="session")
def defect_run(simple_model):
    cfg = BreakerConfig(simple_model, dyadic_family(10, 12, shift=-0.5), (-2**16, 2**16), s_rescale=0.2)
    return run_breaker(cfg)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")


def rng(seed=0):
    return np.random.default_rng(seed)


def synthetic_instance(seed, K):
    """Random family of K intervals with half-integer centres and a random sequence a on a window."""
    from expsynth.breaker import WindowSeq
    g = np.random.default_rng(seed)
    growth = g.uniform(1.08, 1.25)
    rho = np.round(1000.0 * growth ** np.arange(1, K + 1)) + 0.5
    d = g.uniform(1.0, 3.0, K)
    hi = int(rho[-1] + d[-1]) + 2
    vals = g.uniform(0.5, 1.5, 2 * hi + 1) * g.choice([-1.0, 1.0], 2 * hi + 1)
    return IntervalFamily(rho.tolist(), d.tolist(), 1), WindowSeq(-hi, vals)
