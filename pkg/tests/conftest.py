import math

import mpmath
import numpy as np
import pytest

from fracinv.multiml import FractionalOrders


def _compositions(k, m):
    if m == 1:
        yield (k,)
        return
    for first in range(k + 1):
        for rest in _compositions(k - first, m - 1):
            yield (first,) + rest


def mp_series(rho, beta, z, dps=50, max_k=400, tol=1e-40):
    """Multinomial double sum in extended precision.

    Independent of the library: plain composition enumeration with exact
    integer multinomials and mpmath reciprocal gamma.
    """
    rho_p = [rho[0]] + [rho[0] - r for r in rho[1:]]
    with mpmath.workdps(dps):
        zs = [mpmath.mpc(complex(v)) for v in z]
        rp = [mpmath.mpf(v) for v in rho_p]
        b = mpmath.mpf(beta)
        total = mpmath.mpc(0)
        quiet = 0
        for k in range(max_k):
            level = mpmath.mpc(0)
            for comp in _compositions(k, len(zs)):
                coef = math.factorial(k)
                for c in comp:
                    coef //= math.factorial(c)
                term = coef * mpmath.rgamma(b + mpmath.fsum(r * c for r, c in zip(rp, comp)))
                for zj, c in zip(zs, comp):
                    term *= zj ** c
                level += term
            total += level
            quiet = quiet + 1 if abs(level) < tol * max(abs(total), 1) else 0
            if quiet >= 3:
                return total
        raise RuntimeError("oracle series did not settle")


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def two_term():
    return FractionalOrders((0.7, 0.4), (1.0, 0.5))


@pytest.fixture
def one_term():
    return FractionalOrders((0.6,))


@pytest.fixture
def three_term():
    return FractionalOrders((0.8, 0.5, 0.2), (1.0, 0.5, 0.3))


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)
