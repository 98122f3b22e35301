from fractions import Fraction

import pytest

from proxjobs import quantreg

# every fit built during the session, checked as it is produced
FIT_LOG: list = []


def assert_sign_conditions(fit):
    tau = Fraction(repr(fit.tau))
    assert fit.n_neg + fit.n_pos + fit.n_zero == fit.n
    assert fit.n_neg <= tau * fit.n, fit
    assert fit.n_pos <= (1 - tau) * fit.n, fit


@pytest.fixture(autouse=True, scope="session")
def _record_fits():
    original = quantreg._finalize_fit

    def checked(x, y, tau, intercept, slope):
        fit = original(x, y, tau, intercept, slope)
        assert_sign_conditions(fit)
        FIT_LOG.append(fit)
        return fit

    mp = pytest.MonkeyPatch()
    mp.setattr(quantreg, "_finalize_fit", checked)
    yield
    mp.undo()


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(20240501)


# acceptance criterion -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    from fractions import Fraction as F

    violations = sum(
        1 for f in FIT_LOG
        if f.n_neg > F(repr(f.tau)) * f.n or f.n_pos > (1 - F(repr(f.tau))) * f.n
    )
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split()[0].rstrip("ab")), k)):
        ok, detail = ACCEPTANCE[key]
        tr.write_line(f"[{'PASS' if ok else 'FAIL'}] {key}: {detail}")
    tr.write_line(
        f"[{'PASS' if violations == 0 else 'FAIL'}] 2 (session-wide): "
        f"{len(FIT_LOG)} fits produced in this session, {violations} sign-condition violations"
    )
