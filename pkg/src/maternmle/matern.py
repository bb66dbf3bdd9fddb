"""Matern covariance function, its parameter derivatives, and dense matrix
assembly over planar location sets.

The covariance of two points at distance h is

    C(h) = sigma2 / (2^{nu-1} Gamma(nu)) * (h/alpha)^nu * K_nu(h/alpha)

with variance sigma2, range alpha and smoothness nu.  Matrix assembly
evaluates each distinct pair distance once (lower triangle, mirrored), so
matrices are symmetric to the bit and diagonal entries are exactly sigma2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _sp
from scipy.spatial.distance import pdist, squareform

from .bessel import dnu_xnu_knu

__all__ = [
    "MaternParams",
    "SpatialDataset",
    "matern_cov",
    "dcov_dsigma2",
    "dcov_dalpha",
    "dcov_dnu",
    "build_cov_matrix",
    "build_dcov_matrix",
]


@dataclass(frozen=True)
class MaternParams:
    """Parameter triple (sigma2, alpha, nu); all components finite and > 0."""

    sigma2: float
    alpha: float
    nu: float

    def __post_init__(self):
        for name in ("sigma2", "alpha", "nu"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"MaternParams.{name} must be finite and > 0, got {value!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.sigma2, self.alpha, self.nu])

    @classmethod
    def from_array(cls, vec) -> "MaternParams":
        s2, al, nu = (float(v) for v in vec)
        return cls(s2, al, nu)


class SpatialDataset:
    """n planar observation locations plus the n observed values.

    Locations are assumed pairwise distinct; coincident locations are not
    rejected here but make the covariance matrix singular, which surfaces
    as a factorization failure downstream.
    """

    def __init__(self, locations, values):
        locations = np.asarray(locations, dtype=float)
        values = np.asarray(values, dtype=float)
        if locations.ndim != 2 or locations.shape[1] != 2:
            raise ValueError("locations must have shape (n, 2)")
        if locations.shape[0] < 1:
            raise ValueError("at least one location is required")
        if values.shape != (locations.shape[0],):
            raise ValueError("values length must equal the number of locations")
        if not (np.all(np.isfinite(locations)) and np.all(np.isfinite(values))):
            raise ValueError("locations and values must be finite")
        self.locations = locations
        self.values = values
        self._distance_table = None

    @property
    def n(self) -> int:
        return self.locations.shape[0]

    def pair_distances(self):
        """Distinct pair distances and the condensed-index mapping onto them.

        Grid layouts repeat distances heavily; covariance assembly evaluates
        the Bessel function once per distinct distance.  Computed lazily and
        cached (read-only afterwards).
        """
        if self._distance_table is None:
            condensed = pdist(self.locations)
            unique, inverse = np.unique(condensed, return_inverse=True)
            self._distance_table = (unique, inverse)
        return self._distance_table


def _cov_positive(h: np.ndarray, theta: MaternParams) -> np.ndarray:
    """C(h) for strictly positive distances."""
    u = h / theta.alpha
    scale = theta.sigma2 * 2.0 ** (1.0 - theta.nu) / _sp.gamma(theta.nu)
    return scale * u**theta.nu * _sp.kv(theta.nu, u)


def _dalpha_positive(h: np.ndarray, theta: MaternParams) -> np.ndarray:
    """dC/dalpha for strictly positive distances."""
    u = h / theta.alpha
    scale = 2.0 ** (1.0 - theta.nu) / _sp.gamma(theta.nu) * theta.sigma2 / theta.alpha
    return scale * u ** (theta.nu + 1.0) * _sp.kv(theta.nu - 1.0, u)


def _dnu_positive(h: np.ndarray, theta: MaternParams) -> np.ndarray:
    """dC/dnu for strictly positive distances.

    With q(nu) = 2^{1-nu}/Gamma(nu) and f(nu, u) = u^nu K_nu(u), u = h/alpha:
    dC/dnu = sigma2 * q(nu) * [(-log 2 - psi(nu)) f + df/dnu].
    """
    u = h / theta.alpha
    nu = theta.nu
    q = 2.0 ** (1.0 - nu) / _sp.gamma(nu)
    f = u**nu * _sp.kv(nu, u)
    dlog_q = -math.log(2.0) - float(_sp.digamma(nu))
    return theta.sigma2 * q * (dlog_q * f + dnu_xnu_knu(nu, u))


def _eval_with_zero_limit(h, theta: MaternParams, positive_fn, zero_value: float):
    h_arr = np.asarray(h, dtype=float)
    scalar = h_arr.ndim == 0
    if np.any(h_arr < 0.0):
        raise ValueError("distances must be non-negative")
    out = np.full(h_arr.shape, zero_value)
    flat_h = np.atleast_1d(h_arr)
    flat_out = np.atleast_1d(out)
    positive = flat_h > 0.0
    if positive.any():
        flat_out[positive] = positive_fn(flat_h[positive], theta)
    return float(out) if scalar else out


def matern_cov(h, theta: MaternParams):
    """Matern covariance C(h; theta); equals sigma2 exactly at h = 0."""
    return _eval_with_zero_limit(h, theta, _cov_positive, theta.sigma2)


def dcov_dsigma2(h, theta: MaternParams):
    """dC/dsigma2 = C(h; theta) / sigma2; equals 1 at h = 0."""
    return _eval_with_zero_limit(
        h, theta, lambda hh, th: _cov_positive(hh, th) / th.sigma2, 1.0
    )


def dcov_dalpha(h, theta: MaternParams):
    """dC/dalpha; zero at h = 0 (the zero-lag value sigma2 is alpha-free)."""
    return _eval_with_zero_limit(h, theta, _dalpha_positive, 0.0)


def dcov_dnu(h, theta: MaternParams):
    """dC/dnu; zero at h = 0 (the zero-lag value sigma2 is nu-free)."""
    return _eval_with_zero_limit(h, theta, _dnu_positive, 0.0)


_DERIVATIVE_KERNELS = {
    "sigma2": lambda h, th: _cov_positive(h, th) / th.sigma2,
    "alpha": _dalpha_positive,
    "nu": _dnu_positive,
}


def _assemble(data: SpatialDataset, theta: MaternParams, positive_fn, diag_value: float):
    unique, inverse = data.pair_distances()
    if unique.size and unique[0] == 0.0:
        # Coincident locations: fill with the zero-lag limit and let the
        # factorization report the resulting singularity.
        table = np.empty_like(unique)
        table[0] = diag_value
        table[1:] = positive_fn(unique[1:], theta)
    else:
        table = positive_fn(unique, theta) if unique.size else unique
    matrix = squareform(table[inverse], checks=False)
    np.fill_diagonal(matrix, diag_value)
    return matrix


def build_cov_matrix(data: SpatialDataset, theta: MaternParams) -> np.ndarray:
    """Covariance matrix Sigma(theta) over the dataset locations."""
    return _assemble(data, theta, _cov_positive, theta.sigma2)


def build_dcov_matrix(data: SpatialDataset, theta: MaternParams, which: str) -> np.ndarray:
    """Entrywise derivative of Sigma(theta) with respect to one parameter.

    ``which`` is one of ``"sigma2"``, ``"alpha"``, ``"nu"``.  The sigma2
    variant equals Sigma/sigma2 exactly; the alpha and nu variants have a
    zero diagonal.
    """
    try:
        kernel = _DERIVATIVE_KERNELS[which]
    except KeyError:
        raise ValueError(f"which must be one of {sorted(_DERIVATIVE_KERNELS)}, got {which!r}")
    diag = 1.0 if which == "sigma2" else 0.0
    return _assemble(data, theta, kernel, diag)
