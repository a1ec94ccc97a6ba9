"""Densities, moments and samplers for the inverse gamma family and friends.

Parametrisation follows the "inverse gamma 2" convention used throughout the
package: ``x ~ IG2(a, b)`` when ``b / x`` is chi-square with ``a`` degrees of
freedom.  ``IG1`` is the distribution of the square root of an ``IG2``
variable.  The ratio of two independent ``IG2`` (``IG1``) variables follows the
``IG2R`` (``IG1R``) distribution.

All densities are evaluated in log space through ``gammaln``/``betaln``; the
public functions broadcast over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, gammaln

from .errors import DomainError, MomentExistenceError, NotPositiveDefiniteError

LOG2 = np.log(2.0)


def _positive(name: str, value) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if not np.all(arr > 0):
        raise DomainError(f"{name} must be strictly positive")
    return arr


def _scalar_or_array(x):
    return x.item() if isinstance(x, np.ndarray) and x.ndim == 0 else x


# --------------------------------------------------------------------------
# IG2 / IG1


def ig2_log_pdf(x, a, b):
    """Log density of ``IG2(a, b)``.

    ``f(x) = Gamma(a/2)^-1 (b/2)^(a/2) x^(-(a+2)/2) exp(-b / (2x))``
    """
    x = _positive("x", x)
    a = _positive("a", a)
    b = _positive("b", b)
    out = -gammaln(a / 2) + (a / 2) * np.log(b / 2) - ((a + 2) / 2) * np.log(x) - b / (2 * x)
    return _scalar_or_array(out)


def ig2_pdf(x, a, b):
    return _scalar_or_array(np.exp(ig2_log_pdf(x, a, b)))


def ig2_sample(a, b, rng: np.random.Generator, size=None):
    """Draw from ``IG2(a, b)`` as ``b / c`` with ``c ~ chi2(a)``."""
    _positive("a", a)
    _positive("b", b)
    return b / rng.chisquare(a, size=size)


def ig1_log_pdf(x, a, b):
    """Log density of ``IG1(a, b)``: ``2 Gamma(a/2)^-1 (b/2)^(a/2) x^-(a+1) exp(-b / (2x^2))``."""
    x = _positive("x", x)
    a = _positive("a", a)
    b = _positive("b", b)
    out = LOG2 - gammaln(a / 2) + (a / 2) * np.log(b / 2) - (a + 1) * np.log(x) - b / (2 * x * x)
    return _scalar_or_array(out)


def ig1_pdf(x, a, b):
    return _scalar_or_array(np.exp(ig1_log_pdf(x, a, b)))


def ig1_sample(a, b, rng: np.random.Generator, size=None):
    return np.sqrt(ig2_sample(a, b, rng, size=size))


# --------------------------------------------------------------------------
# Ratio distributions


def ig2r_log_pdf(z, a1, a2, b1, b2):
    """Log density of the ratio ``x / y`` with ``x ~ IG2(a1, b1)``, ``y ~ IG2(a2, b2)``."""
    z = _positive("z", z)
    a1 = _positive("a1", a1)
    a2 = _positive("a2", a2)
    b1 = _positive("b1", b1)
    b2 = _positive("b2", b2)
    log_z = np.log(z)
    log_b1 = np.log(b1)
    log_b2 = np.log(b2)
    out = (
        -betaln(a1 / 2, a2 / 2)
        + (a1 / 2) * log_b1
        + (a2 / 2) * log_b2
        + ((a2 - 2) / 2) * log_z
        - ((a1 + a2) / 2) * np.logaddexp(log_b1, log_b2 + log_z)
    )
    return _scalar_or_array(out)


def ig2r_pdf(z, a1, a2, b1, b2):
    return _scalar_or_array(np.exp(ig2r_log_pdf(z, a1, a2, b1, b2)))


def ig2r_moment(k: int, a1, a2, b1, b2) -> float:
    """Non-central moment ``E[z^k]`` of the IG2R distribution; exists for ``a1 > 2k``."""
    if k < 1 or int(k) != k:
        raise DomainError("moment order must be a positive integer")
    _positive("a2", a2)
    _positive("b1", b1)
    _positive("b2", b2)
    if not a1 > 2 * k:
        raise MomentExistenceError(k, "a1", float(a1), 2.0 * k)
    log_m = k * (np.log(b1) - np.log(b2)) + betaln((a1 - 2 * k) / 2, (a2 + 2 * k) / 2) - betaln(a1 / 2, a2 / 2)
    return float(np.exp(log_m))


def ig2r_mean(a1, a2, b1, b2) -> float:
    if not a1 > 2:
        raise MomentExistenceError(1, "a1", float(a1), 2.0)
    return float(b1 / b2 * a2 / (a1 - 2))


def ig2r_var(a1, a2, b1, b2) -> float:
    if not a1 > 4:
        raise MomentExistenceError(2, "a1", float(a1), 4.0)
    ratio = b1 / b2
    return float(2 * ratio**2 * a2 * (a1 + a2 - 2) / ((a1 - 2) ** 2 * (a1 - 4)))


def ig1r_log_pdf(z, a1, a2, b1, b2):
    """Log density of the ratio ``x / y`` with ``x ~ IG1(a1, b1)``, ``y ~ IG1(a2, b2)``."""
    z = _positive("z", z)
    a1 = _positive("a1", a1)
    a2 = _positive("a2", a2)
    b1 = _positive("b1", b1)
    b2 = _positive("b2", b2)
    log_z = np.log(z)
    log_b1 = np.log(b1)
    log_b2 = np.log(b2)
    out = (
        LOG2
        - betaln(a1 / 2, a2 / 2)
        + (a1 / 2) * log_b1
        + (a2 / 2) * log_b2
        + (a2 - 1) * log_z
        - ((a1 + a2) / 2) * np.logaddexp(log_b1, log_b2 + 2 * log_z)
    )
    return _scalar_or_array(out)


def ig1r_pdf(z, a1, a2, b1, b2):
    return _scalar_or_array(np.exp(ig1r_log_pdf(z, a1, a2, b1, b2)))


def ig1r_moment(k: int, a1, a2, b1, b2) -> float:
    """Non-central moment ``E[z^k]`` of the IG1R distribution.

    The existence condition enforced is ``a1 > 2k``.  This is stricter than
    necessary (``a1 > k`` suffices) but is the documented contract.
    """
    if k < 1 or int(k) != k:
        raise DomainError("moment order must be a positive integer")
    _positive("a2", a2)
    _positive("b1", b1)
    _positive("b2", b2)
    if not a1 > 2 * k:
        raise MomentExistenceError(k, "a1", float(a1), 2.0 * k)
    log_m = (k / 2) * (np.log(b1) - np.log(b2)) + betaln((a1 - k) / 2, (a2 + k) / 2) - betaln(a1 / 2, a2 / 2)
    return float(np.exp(log_m))


def ig1r_mean(a1, a2, b1, b2) -> float:
    return ig1r_moment(1, a1, a2, b1, b2)


def ig1r_var(a1, a2, b1, b2) -> float:
    if not a1 > 4:
        raise MomentExistenceError(2, "a1", float(a1), 4.0)
    ratio = b1 / b2
    beta_ratio = np.exp(betaln((a1 - 1) / 2, (a2 + 1) / 2) - betaln(a1 / 2, a2 / 2))
    return float(ratio * a2 / (a1 - 2) - ratio * beta_ratio**2)


# --------------------------------------------------------------------------
# Dirichlet, multivariate normal / t


def dirichlet_log_pdf(x, e):
    """Log Dirichlet density over the last axis of ``x``."""
    x = np.asarray(x, dtype=float)
    e = np.asarray(e, dtype=float)
    if np.any(e <= 0):
        raise DomainError("Dirichlet concentrations must be positive")
    if np.any(x < 0):
        return -np.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        out = gammaln(e.sum(-1)) - gammaln(e).sum(-1) + np.sum(np.where(e == 1.0, 0.0, (e - 1) * np.log(x)), axis=-1)
    return _scalar_or_array(out)


def dirichlet_sample(e, rng: np.random.Generator, size=None) -> np.ndarray:
    e = np.asarray(e, dtype=float)
    if e.ndim != 1 or e.size < 2:
        raise DomainError("Dirichlet needs a vector of at least two concentrations")
    _positive("e", e)
    return rng.dirichlet(e, size=size)


def normal_log_pdf_diag(x, mean, var):
    """Sum over the last axis of independent normal log densities."""
    x = np.asarray(x, dtype=float)
    d = x - mean
    return -0.5 * np.sum(np.log(2 * np.pi * var) + d * d / var, axis=-1)


def mvn_log_pdf(x, mean, cov_chol) -> np.ndarray:
    """Multivariate normal log density given the lower Cholesky factor of the covariance.

    ``x`` may carry leading batch dimensions.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = x.shape[-1]
    z = np.linalg.solve(cov_chol, (x - mean).T).T
    log_det = 2.0 * np.sum(np.log(np.diag(cov_chol)))
    return -0.5 * (d * np.log(2 * np.pi) + log_det + np.sum(z * z, axis=-1))


def cholesky(matrix: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError("matrix is not positive definite") from exc


def mvt_sample(center, scale, dof: float, rng: np.random.Generator) -> np.ndarray:
    """Multivariate t draw ``center + L z / sqrt(w / dof)`` with ``w ~ chi2(dof)``.

    ``dof=np.inf`` gives the multivariate normal.
    """
    center = np.asarray(center, dtype=float)
    chol = cholesky(np.asarray(scale, dtype=float))
    z = chol @ rng.standard_normal(center.shape[0])
    if np.isinf(dof):
        return center + z
    if dof <= 0:
        raise DomainError("degrees of freedom must be positive")
    w = rng.chisquare(dof)
    return center + z * np.sqrt(dof / w)


# --------------------------------------------------------------------------
# Parameter containers


@dataclass(frozen=True)
class IG2Params:
    a: float
    b: float

    def __post_init__(self):
        _positive("a", self.a)
        _positive("b", self.b)

    def log_pdf(self, x):
        return ig2_log_pdf(x, self.a, self.b)

    def pdf(self, x):
        return ig2_pdf(x, self.a, self.b)

    def sample(self, rng, size=None):
        return ig2_sample(self.a, self.b, rng, size)

    @property
    def mode(self) -> float:
        return self.b / (self.a + 2)

    @property
    def mean(self) -> float:
        if not self.a > 2:
            raise MomentExistenceError(1, "a", self.a, 2.0)
        return self.b / (self.a - 2)


@dataclass(frozen=True)
class IG1Params:
    a: float
    b: float

    def __post_init__(self):
        _positive("a", self.a)
        _positive("b", self.b)

    def log_pdf(self, x):
        return ig1_log_pdf(x, self.a, self.b)

    def pdf(self, x):
        return ig1_pdf(x, self.a, self.b)

    def sample(self, rng, size=None):
        return ig1_sample(self.a, self.b, rng, size)


@dataclass(frozen=True)
class IG2RParams:
    a1: float
    a2: float
    b1: float
    b2: float

    def __post_init__(self):
        for name in ("a1", "a2", "b1", "b2"):
            _positive(name, getattr(self, name))

    def log_pdf(self, z):
        return ig2r_log_pdf(z, self.a1, self.a2, self.b1, self.b2)

    def pdf(self, z):
        return ig2r_pdf(z, self.a1, self.a2, self.b1, self.b2)

    def moment(self, k: int) -> float:
        return ig2r_moment(k, self.a1, self.a2, self.b1, self.b2)

    def mean(self) -> float:
        return ig2r_mean(self.a1, self.a2, self.b1, self.b2)

    def var(self) -> float:
        return ig2r_var(self.a1, self.a2, self.b1, self.b2)

    def sample(self, rng, size=None):
        return ig2_sample(self.a1, self.b1, rng, size) / ig2_sample(self.a2, self.b2, rng, size)


@dataclass(frozen=True)
class IG1RParams:
    a1: float
    a2: float
    b1: float
    b2: float

    def __post_init__(self):
        for name in ("a1", "a2", "b1", "b2"):
            _positive(name, getattr(self, name))

    def log_pdf(self, z):
        return ig1r_log_pdf(z, self.a1, self.a2, self.b1, self.b2)

    def pdf(self, z):
        return ig1r_pdf(z, self.a1, self.a2, self.b1, self.b2)

    def moment(self, k: int) -> float:
        return ig1r_moment(k, self.a1, self.a2, self.b1, self.b2)

    def sample(self, rng, size=None):
        return ig1_sample(self.a1, self.b1, rng, size) / ig1_sample(self.a2, self.b2, rng, size)


@dataclass(frozen=True)
class DirichletParams:
    e: tuple

    def __post_init__(self):
        e = np.asarray(self.e, dtype=float)
        if e.ndim != 1 or e.size < 2:
            raise DomainError("Dirichlet needs at least two concentrations")
        _positive("e", e)
        object.__setattr__(self, "e", tuple(float(v) for v in e))

    def log_pdf(self, x):
        return dirichlet_log_pdf(x, np.array(self.e))

    def sample(self, rng, size=None):
        return dirichlet_sample(np.array(self.e), rng, size)

    @property
    def mean(self) -> np.ndarray:
        e = np.array(self.e)
        return e / e.sum()
