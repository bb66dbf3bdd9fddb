"""Independent reference implementations used only by the test suite.

Everything here deliberately avoids the library's own evaluation paths:
K_nu comes from adaptive quadrature of its integral representation, the
order derivative from Richardson-extrapolated central differences of that
quadrature, and the log-likelihood from an explicit LU-based inverse and
determinant.
"""

import math

import mpmath as mp
import numpy as np

mp.mp.dps = 40


def bessel_k_quadrature(nu, x):
    """K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt by tanh-sinh quadrature.

    The integrand is cut off where x cosh T = 1200, far below the working
    precision's noise floor.
    """
    nu, x = mp.mpf(nu), mp.mpf(x)
    cutoff = mp.acosh(1200 / x) if x < 1200 else mp.mpf(2)
    return mp.quad(
        lambda t: mp.exp(-x * mp.cosh(t)) * mp.cosh(nu * t),
        [0, cutoff / 4, cutoff / 2, cutoff],
        maxdegree=8,
    )


def xnu_knu_reference(nu, x):
    return mp.mpf(x) ** mp.mpf(nu) * bessel_k_quadrature(nu, x)


def dnu_xnu_knu_reference(nu, x, step="1e-5"):
    """Richardson-extrapolated central difference of x^nu K_nu(x) over nu."""
    nu = mp.mpf(nu)
    h = mp.mpf(step)
    coarse = (xnu_knu_reference(nu + h, x) - xnu_knu_reference(nu - h, x)) / (2 * h)
    fine = (xnu_knu_reference(nu + h / 2, x) - xnu_knu_reference(nu - h / 2, x)) / h
    return (4 * fine - coarse) / 3


def richardson_derivative(func, x0, step):
    """Richardson-extrapolated central difference of a float callable."""
    coarse = (func(x0 + step) - func(x0 - step)) / (2.0 * step)
    fine = (func(x0 + step / 2) - func(x0 - step / 2)) / step
    return (4.0 * fine - coarse) / 3.0


def brute_force_loglik(data, theta, cov_fn):
    """Direct evaluation of the Gaussian log-density via inv + slogdet.

    ``cov_fn(h, theta)`` supplies covariance values; the linear algebra is
    LU-based, independent of the library's Cholesky path.
    """
    locs = np.asarray(data.locations)
    n = locs.shape[0]
    diff = locs[:, None, :] - locs[None, :, :]
    distances = np.sqrt((diff**2).sum(axis=2))
    sigma = cov_fn(distances, theta)
    sign, logdet = np.linalg.slogdet(sigma)
    assert sign > 0, "oracle covariance not positive definite"
    quad = data.values @ np.linalg.inv(sigma) @ data.values
    return -0.5 * n * math.log(2.0 * math.pi) - 0.5 * logdet - 0.5 * quad
