"""Shared fixtures and independent oracles for the test suite.

Oracles deliberately go through different machinery than the code under
test: QUADPACK (scipy.integrate.quad, including the Fourier-weight rules)
for radial and line integrals, mpmath for incomplete gamma values.
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from temperfield.tstable import SpectralMeasure, StableParams


@pytest.fixture
def sigma_1d():
    return SpectralMeasure.one_d(0.5)


@pytest.fixture
def sigma_2d():
    return SpectralMeasure(2, [[1, 0], [-1, 0], [0, 1], [0, -1]], [0.25] * 4)


@pytest.fixture
def params_half():
    return StableParams(0.5, 1.0)


def radial_lcf_oracle(alpha: float, lam: float, a: float) -> float:
    """integral_0^inf (cos(ar)-1) r^{-alpha-1} e^{-lam r} dr via QUADPACK.

    Head piece by adaptive QAGS, oscillatory tail by the Fourier-weight rule
    (QAWF), power tail of the -1 term via mpmath incomplete gamma.
    """
    import mpmath as mp

    amp = abs(a)
    if amp == 0.0:
        return 0.0
    x = min(1.0, 2.0 * math.pi / amp)
    head, _ = quad(lambda r: (math.cos(amp * r) - 1.0) * r ** (-alpha - 1.0)
                   * math.exp(-lam * r), 0.0, x, limit=400)
    osc, _ = quad(lambda r: r ** (-alpha - 1.0) * math.exp(-lam * r),
                  x, np.inf, weight="cos", wvar=amp, limit=400)
    if lam > 0:
        drop = float(lam ** alpha * mp.gammainc(-alpha, lam * x))
    else:
        drop = x ** (-alpha) / alpha
    return head + osc - drop


def line_integral_oracle(f_scalar, pieces, tail_from=None):
    """Adaptive QAGS over finite pieces plus QAGI on infinite tails."""
    total = 0.0
    for a, b in pieces:
        v, _ = quad(f_scalar, a, b, limit=2000, epsabs=1e-12, epsrel=1e-12)
        total += v
    if tail_from is not None:
        v, _ = quad(f_scalar, tail_from, np.inf, limit=2000)
        total += v
        v, _ = quad(f_scalar, -np.inf, -tail_from, limit=2000)
        total += v
    return total
