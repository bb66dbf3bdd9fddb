"""Modified Bessel function K_nu, the digamma function, and the order
derivative d/dnu [x^nu K_nu(x)].

The order derivative is the numerically delicate ingredient of smoothness
estimation: naive finite differences of K_nu over nu lose most of their
digits.  This module evaluates it through a four-regime dispatch:

* ``x = 0``          -- the derivative is exactly zero;
* ``0 < x < 8.5``    -- ascending series built from the two-sided power
  series of K_nu (requires nu away from integers, where the split into
  Gamma(nu)/Gamma(-nu) parts degenerates);
* ``8.5 <= x < 30``  -- uniform (Debye-type) asymptotic expansion in the
  polynomials U_k, valid jointly in nu and x;
* ``x >= 30``        -- large-argument asymptotic series (requires nu away
  from half-integers, where its coefficients degenerate);
* fallback           -- forward difference with lag 1e-9 near the excluded
  integer/half-integer bands.

All series evaluators accept scalars or numpy arrays for ``x`` (the order
``nu`` is a scalar) so that covariance matrices can be filled in bulk.
"""

from __future__ import annotations

import enum
import math
import warnings

import numpy as np
from scipy import special as _sp

__all__ = [
    "BesselRegime",
    "MidRangeSmallOrderWarning",
    "bessel_k",
    "digamma",
    "select_regime",
    "dnu_xnu_knu",
    "case2_series",
    "case3_series",
    "case4_series",
    "u_poly_coeffs",
]

# Regime boundaries and tolerances of the dispatch.
SMALL_MID_SPLIT = 8.5
MID_LARGE_SPLIT = 30.0
MID_TRUNCATION_SPLIT = 15.0
INTEGER_BAND = 1e-6
FD_LAG = 1e-9

# Truncation indices: each series is summed for k = 0..K inclusive.
CASE2_TERMS = 20
CASE3_TERMS_NEAR = 12
CASE3_TERMS_FAR = 8
CASE4_TERMS = 5

_LOG2 = math.log(2.0)
_SQRT_HALF_PI = math.sqrt(0.5 * math.pi)


class BesselRegime(enum.Enum):
    """Which evaluation strategy applies to a given (nu, x)."""

    ZERO_ARG = "zero_arg"
    SMALL_X = "small_x"
    MID_X = "mid_x"
    LARGE_X = "large_x"
    FINITE_DIFF = "finite_diff"


class MidRangeSmallOrderWarning(UserWarning):
    """The mid-range expansion was invoked with a very small order.

    The uniform asymptotic series has no stated validity floor in nu; for
    nu < 0.05 it is still used but flagged so callers can audit results.
    """


def bessel_k(nu, x):
    """Modified Bessel function of the second kind, K_nu(x).

    Negative orders are reduced through the symmetry K_nu = K_{-nu}.
    Accepts scalars or arrays (broadcast together).

    Raises
    ------
    ValueError
        If any x <= 0 or any input is not finite.
    """
    nu_arr = np.asarray(nu, dtype=float)
    x_arr = np.asarray(x, dtype=float)
    if not (np.all(np.isfinite(nu_arr)) and np.all(np.isfinite(x_arr))):
        raise ValueError("bessel_k requires finite nu and x")
    if np.any(x_arr <= 0.0):
        raise ValueError("bessel_k requires x > 0")
    out = _sp.kv(np.abs(nu_arr), x_arr)
    if np.isscalar(nu) and np.isscalar(x):
        return float(out)
    return out


def digamma(nu):
    """Digamma function psi(nu) = Gamma'(nu)/Gamma(nu).

    Raises
    ------
    ValueError
        At the poles nu in {0, -1, -2, ...}.
    """
    nu_arr = np.asarray(nu, dtype=float)
    if np.any((nu_arr <= 0.0) & (nu_arr == np.floor(nu_arr))):
        raise ValueError("digamma has poles at non-positive integers")
    out = _sp.digamma(nu_arr)
    return float(out) if np.isscalar(nu) else out


def _near_integer(nu: float) -> bool:
    return abs(nu - round(nu)) <= INTEGER_BAND


def _near_half_integer(nu: float) -> bool:
    return abs((nu + 0.5) - round(nu + 0.5)) <= INTEGER_BAND


def select_regime(nu: float, x: float) -> BesselRegime:
    """Pick the unique evaluation regime for d/dnu [x^nu K_nu(x)].

    Requires nu >= 0 and x >= 0; exactly one regime matches any such pair.
    """
    if x == 0.0:
        return BesselRegime.ZERO_ARG
    if x < SMALL_MID_SPLIT:
        if not _near_integer(nu):
            return BesselRegime.SMALL_X
        return BesselRegime.FINITE_DIFF
    if x < MID_LARGE_SPLIT:
        return BesselRegime.MID_X
    if not _near_half_integer(nu):
        return BesselRegime.LARGE_X
    return BesselRegime.FINITE_DIFF


def u_poly_coeffs(k_max: int):
    """Coefficient vectors of the Debye polynomials U_0..U_{k_max}.

    U_0 = 1 and U_{k+1}(p) = p^2(1-p^2)U_k'(p)/2 + (1/8)int_0^p (1-5t^2)U_k(t)dt,
    which translates into the coefficient recursion

        c_j^{(k+1)} = (j-1+1/(4j))/2 * c_{j-1}^{(k)} - (j-3+5/(4j))/2 * c_{j-3}^{(k)}

    for j = 1..3k+3 (out-of-range c treated as zero, c_0 = 0).  Entry k of
    the returned list has length 3k+1.
    """
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    tables = [np.array([1.0])]
    for k in range(k_max):
        prev = tables[-1]
        nxt = np.zeros(3 * (k + 1) + 1)
        for j in range(1, 3 * (k + 1) + 1):
            cj = 0.0
            if 0 <= j - 1 < prev.size:
                cj += 0.5 * (j - 1 + 1.0 / (4.0 * j)) * prev[j - 1]
            if 0 <= j - 3 < prev.size:
                cj -= 0.5 * (j - 3 + 5.0 / (4.0 * j)) * prev[j - 3]
            nxt[j] = cj
        tables.append(nxt)
    return tables


# Precomputed once; read-only afterwards, so concurrent use is safe.
_U_COEFFS = u_poly_coeffs(CASE3_TERMS_NEAR)
_U_DERIV_COEFFS = [
    c[1:] * np.arange(1, c.size) if c.size > 1 else np.zeros(1) for c in _U_COEFFS
]


def _as_x_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def case2_series(nu: float, x):
    """Ascending-series value of d/dnu [x^nu K_nu(x)] for 0 < x < 8.5.

    Sums, for k = 0..20,

        (x/2)^{2k}/(2 k!) * [ 2^nu (log2 + psi(nu) - d_k(-nu)) Gamma(nu) g_k(-nu)
          + 2^{-nu} x^{2nu} (-log2 + 2 log x - psi(-nu) + d_k(nu)) Gamma(-nu) g_k(nu) ]

    with g_k(nu) = prod_{j<=k} 1/(nu+j) and d_k(nu) = -sum_{j<=k} 1/(nu+j).
    Gamma(-nu) is evaluated by reflection to stay clear of pole overflow.
    """
    x_arr, scalar = _as_x_array(x)
    if np.any(x_arr <= 0.0) or np.any(x_arr >= SMALL_MID_SPLIT):
        raise ValueError("case2_series requires 0 < x < 8.5")
    if _near_integer(nu):
        raise ValueError("case2_series requires nu away from integers")

    gam_pos = _sp.gamma(nu)
    gam_neg = -math.pi / (math.sin(math.pi * nu) * nu * gam_pos)
    psi_pos = float(_sp.digamma(nu))
    psi_neg = float(_sp.digamma(-nu))
    two_log_x = 2.0 * np.log(x_arr)
    x_two_nu = x_arr ** (2.0 * nu)
    quarter_x2 = 0.25 * x_arr * x_arr

    prefactor = np.full_like(x_arr, 0.5)
    g_pos = g_neg = 1.0
    d_pos = d_neg = 0.0
    total = np.zeros_like(x_arr)
    for k in range(CASE2_TERMS + 1):
        if k > 0:
            prefactor = prefactor * quarter_x2 / k
            g_pos /= nu + k
            g_neg /= -nu + k
            d_pos -= 1.0 / (nu + k)
            d_neg -= 1.0 / (-nu + k)
        term_pos = 2.0**nu * (_LOG2 + psi_pos - d_neg) * gam_pos * g_neg
        term_neg = 2.0**-nu * x_two_nu * (-_LOG2 + two_log_x - psi_neg + d_pos) * gam_neg * g_pos
        total = total + prefactor * (term_pos + term_neg)
    return float(total) if scalar else total


def case3_series(nu: float, x):
    """Uniform-asymptotic value of d/dnu [x^nu K_nu(x)] for 8.5 <= x < 30.

    Built from eta(t) = sqrt(1+t^2) + log(t/(1+sqrt(1+t^2))),
    p(t) = (1+t^2)^{-1/2}, the prefactor
    g(x) = x^nu sqrt(pi/(2 nu)) exp(-nu eta(x/nu)) / (1+(x/nu)^2)^{1/4},
    and three alternating sums over U_k and U_k' at p(x/nu).  Truncated at
    k = 12 for x < 15 and k = 8 for x >= 15.
    """
    x_arr, scalar = _as_x_array(x)
    if np.any(x_arr < SMALL_MID_SPLIT) or np.any(x_arr >= MID_LARGE_SPLIT):
        raise ValueError("case3_series requires 8.5 <= x < 30")
    if nu <= 0.0:
        raise ValueError("case3_series requires nu > 0")
    if nu < 0.05:
        warnings.warn(
            f"mid-range order-derivative expansion used with nu={nu:g} < 0.05",
            MidRangeSmallOrderWarning,
            stacklevel=2,
        )

    out = np.empty_like(x_arr)
    flat_x = np.atleast_1d(x_arr)
    flat_out = np.atleast_1d(out)
    for mask, k_terms in (
        (flat_x < MID_TRUNCATION_SPLIT, CASE3_TERMS_NEAR),
        (flat_x >= MID_TRUNCATION_SPLIT, CASE3_TERMS_FAR),
    ):
        if not mask.any():
            continue
        xs = flat_x[mask]
        z = xs / nu
        root = np.sqrt(1.0 + z * z)
        p = 1.0 / root
        eta = root + np.log(z / (1.0 + root))
        prefactor = (
            xs**nu * math.sqrt(math.pi / (2.0 * nu)) * np.exp(-nu * eta) / np.sqrt(root)
        )
        sum_u = np.zeros_like(xs)
        sum_ku = np.zeros_like(xs)
        sum_du = np.zeros_like(xs)
        sign = 1.0
        nu_pow = 1.0  # nu^-k
        for k in range(k_terms + 1):
            u_val = np.polynomial.polynomial.polyval(p, _U_COEFFS[k])
            du_val = np.polynomial.polynomial.polyval(p, _U_DERIV_COEFFS[k])
            sum_u += sign * nu_pow * u_val
            sum_ku += sign * (k * nu_pow / nu) * u_val
            sum_du += sign * nu_pow * du_val
            sign = -sign
            nu_pow /= nu
        bracket = math.log(nu) + np.log(1.0 + root) - 1.0 / (2.0 * nu * (1.0 + z * z))
        flat_out[mask] = (
            bracket * prefactor * sum_u
            - prefactor * sum_ku
            + (xs * xs / nu**3) * (1.0 + z * z) ** -1.5 * prefactor * sum_du
        )
    return float(out) if scalar else out


def case4_series(nu: float, x):
    """Large-argument value of d/dnu [x^nu K_nu(x)] for x >= 30.

    sqrt(pi/2) x^{nu-1/2} e^{-x} sum_{k<=5} x^{-k} (log x + b_k) a_k with
    a_k = prod_{j<=k}(4nu^2-(2j-1)^2) / (8^k k!) and
    b_k = sum_{j<=k} 8nu/(4nu^2-(2j-1)^2).

    At half-integer nu a factor of a_k vanishes and kills every term from
    that k on; the zero product is honoured before b_k (which is singular
    there) is ever formed.
    """
    x_arr, scalar = _as_x_array(x)
    if np.any(x_arr < MID_LARGE_SPLIT):
        raise ValueError("case4_series requires x >= 30")
    if nu <= 0.0:
        raise ValueError("case4_series requires nu > 0")

    log_x = np.log(x_arr)
    total = log_x.copy()  # k = 0: a_0 = 1, b_0 = 0
    a_k = 1.0
    b_k = 0.0
    x_pow = np.ones_like(x_arr)
    four_nu2 = 4.0 * nu * nu
    for k in range(1, CASE4_TERMS + 1):
        factor = four_nu2 - (2 * k - 1) ** 2
        a_k *= factor / (8.0 * k)
        if a_k == 0.0:
            break
        b_k += 8.0 * nu / factor
        x_pow = x_pow / x_arr
        total = total + x_pow * (log_x + b_k) * a_k
    out = _SQRT_HALF_PI * x_arr ** (nu - 0.5) * np.exp(-x_arr) * total
    return float(out) if scalar else out


def _forward_difference(nu: float, x):
    f_hi = x ** (nu + FD_LAG) * _sp.kv(nu + FD_LAG, x)
    f_lo = x**nu * _sp.kv(nu, x)
    return (f_hi - f_lo) / FD_LAG


def dnu_xnu_knu(nu: float, x):
    """Order derivative d/dnu [x^nu K_nu(x)] via the regime dispatch.

    Accepts a scalar or array ``x`` (entries split across regimes as
    needed); ``nu`` must be a positive scalar.

    Raises
    ------
    ValueError
        If nu <= 0 or any x < 0.
    """
    if not np.isscalar(nu) and np.asarray(nu).ndim > 0:
        raise ValueError("dnu_xnu_knu expects a scalar order nu")
    nu = float(nu)
    if not math.isfinite(nu) or nu <= 0.0:
        raise ValueError("dnu_xnu_knu requires nu > 0")
    x_arr, scalar = _as_x_array(x)
    if np.any(x_arr < 0.0) or not np.all(np.isfinite(x_arr)):
        raise ValueError("dnu_xnu_knu requires finite x >= 0")

    out = np.zeros_like(x_arr)
    flat_x = np.atleast_1d(x_arr)
    flat_out = np.atleast_1d(out)

    mask_small = (flat_x > 0.0) & (flat_x < SMALL_MID_SPLIT)
    mask_mid = (flat_x >= SMALL_MID_SPLIT) & (flat_x < MID_LARGE_SPLIT)
    mask_large = flat_x >= MID_LARGE_SPLIT
    mask_fd = np.zeros_like(mask_small)
    if _near_integer(nu):
        mask_fd |= mask_small
        mask_small &= False
    if _near_half_integer(nu):
        mask_fd |= mask_large
        mask_large &= False

    if mask_small.any():
        flat_out[mask_small] = case2_series(nu, flat_x[mask_small])
    if mask_mid.any():
        flat_out[mask_mid] = case3_series(nu, flat_x[mask_mid])
    if mask_large.any():
        flat_out[mask_large] = case4_series(nu, flat_x[mask_large])
    if mask_fd.any():
        flat_out[mask_fd] = _forward_difference(nu, flat_x[mask_fd])
    return float(out) if scalar else out
