"""Data containers, likelihood, prior and simulation for the SVAR-MSH model.

The structural form is ``A0 y_t = mu + A1 y_{t-1} + ... + Ap y_{t-p} + u_t``
with ``u_t | s_t ~ N(0, diag(lambda_{s_t}))``.  State variances are stored as
the state-1 variances ``lambda1`` and relative variances
``omega[m-2, n] = lambda_{m,n} / lambda_{1,n}`` for ``m >= 2``.

States are 0-based internally (state ``0`` is the reference state).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from . import _kernels
from .distributions import normal_log_pdf_diag
from .errors import (
    InsufficientDataError,
    ReducibleChainError,
    SingularMatrixError,
    UnstableSystemError,
)
from .restrictions import RestrictionScheme

LOG_2PI = np.log(2.0 * np.pi)


# --------------------------------------------------------------------------
# Data


@dataclass(frozen=True)
class TimeSeriesData:
    """Observed series, variables in rows and chronological observations in columns.

    The first ``p`` columns serve as initial conditions once a lag order is
    chosen (see :func:`build_design`).
    """

    values: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("values must be an N x T matrix")
        if v.shape[0] < 1:
            raise ValueError("need at least one variable")
        if not np.all(np.isfinite(v)):
            raise ValueError("series contain missing or non-finite values")
        names = tuple(self.names) if self.names else tuple(f"y{i + 1}" for i in range(v.shape[0]))
        if len(names) != v.shape[0]:
            raise ValueError("one name per variable")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "names", names)

    @classmethod
    def from_parts(cls, initial_conditions, Y, names: Sequence[str] = ()) -> "TimeSeriesData":
        return cls(np.hstack([np.atleast_2d(initial_conditions), np.atleast_2d(Y)]), tuple(names))

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def n_obs(self) -> int:
        return self.values.shape[1]

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        h.update("\x1f".join(self.names).encode())
        return h.hexdigest()


@dataclass(frozen=True)
class DesignMatrices:
    Y: np.ndarray  # N x T
    X: np.ndarray  # K x T, first row ones
    p: int

    @property
    def N(self) -> int:
        return self.Y.shape[0]

    @property
    def T(self) -> int:
        return self.Y.shape[1]

    @property
    def K(self) -> int:
        return self.X.shape[0]


def build_design(data: TimeSeriesData, p: int) -> DesignMatrices:
    """Stack ``x_t = (1, y_{t-1}', ..., y_{t-p}')'``; the first ``p`` observations are presample."""
    if p < 1:
        raise ValueError("lag order p must be at least 1")
    N, n = data.values.shape
    T = n - p
    if T <= N * (p + 1):
        raise InsufficientDataError(
            f"{n} observations leave T={T} after {p} presample values; need T > N(p+1) = {N * (p + 1)}"
        )
    v = data.values
    X = np.empty((1 + p * N, T))
    X[0] = 1.0
    for lag in range(1, p + 1):
        X[1 + (lag - 1) * N : 1 + lag * N] = v[:, p - lag : n - lag]
    return DesignMatrices(np.ascontiguousarray(v[:, p:]), X, p)


# --------------------------------------------------------------------------
# Parameters


@dataclass
class ModelParameters:
    """Full parameter vector.

    ``A`` is ``N x K`` = ``[mu, A1, ..., Ap]``; ``omega`` is ``(M-1) x N``;
    ``P[i, j] = Pr(s_t = j | s_{t-1} = i)``.
    """

    A0: np.ndarray
    A: np.ndarray
    lambda1: np.ndarray
    omega: np.ndarray
    P: np.ndarray
    gamma_alpha: float = 1.0
    gamma_mu: float = 1.0
    gamma_beta: float = 1.0
    alpha: np.ndarray | None = None

    def __post_init__(self):
        self.A0 = np.asarray(self.A0, dtype=float)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.lambda1 = np.asarray(self.lambda1, dtype=float).ravel()
        self.P = np.atleast_2d(np.asarray(self.P, dtype=float))
        self.omega = np.asarray(self.omega, dtype=float).reshape(self.P.shape[0] - 1, self.lambda1.size)
        if self.alpha is not None:
            self.alpha = np.asarray(self.alpha, dtype=float).ravel()

    @classmethod
    def from_alpha(cls, alpha, scheme: RestrictionScheme, A, lambda1, omega, P, **gammas) -> "ModelParameters":
        alpha = np.asarray(alpha, dtype=float)
        return cls(scheme.reconstruct_A0(alpha), A, lambda1, omega, P, alpha=alpha, **gammas)

    @property
    def N(self) -> int:
        return self.A0.shape[0]

    @property
    def K(self) -> int:
        return self.A.shape[1]

    @property
    def p(self) -> int:
        return (self.K - 1) // self.N

    @property
    def M(self) -> int:
        return self.P.shape[0]

    @property
    def mu(self) -> np.ndarray:
        return self.A[:, 0]

    @property
    def beta(self) -> np.ndarray:
        return self.A[:, 1:]

    @property
    def lambdas(self) -> np.ndarray:
        """State variances, ``M x N``; row 0 is ``lambda1``."""
        return np.vstack([self.lambda1, self.lambda1 * self.omega])

    @property
    def gammas(self) -> np.ndarray:
        return np.array([self.gamma_alpha, self.gamma_mu, self.gamma_beta])

    def lag_matrices(self) -> list[np.ndarray]:
        N = self.N
        return [self.A[:, 1 + i * N : 1 + (i + 1) * N] for i in range(self.p)]

    def copy(self) -> "ModelParameters":
        return replace(
            self,
            A0=self.A0.copy(),
            A=self.A.copy(),
            lambda1=self.lambda1.copy(),
            omega=self.omega.copy(),
            P=self.P.copy(),
            alpha=None if self.alpha is None else self.alpha.copy(),
        )

    def to_dict(self) -> dict:
        d = {
            "A0": self.A0.tolist(),
            "A": self.A.tolist(),
            "lambda1": self.lambda1.tolist(),
            "omega": self.omega.tolist(),
            "P": self.P.tolist(),
            "gamma_alpha": self.gamma_alpha,
            "gamma_mu": self.gamma_mu,
            "gamma_beta": self.gamma_beta,
        }
        if self.alpha is not None:
            d["alpha"] = self.alpha.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParameters":
        return cls(
            A0=np.array(d["A0"], dtype=float),
            A=np.array(d["A"], dtype=float),
            lambda1=np.array(d["lambda1"], dtype=float),
            omega=np.array(d.get("omega", []), dtype=float),
            P=np.array(d["P"], dtype=float),
            gamma_alpha=float(d.get("gamma_alpha", 1.0)),
            gamma_mu=float(d.get("gamma_mu", 1.0)),
            gamma_beta=float(d.get("gamma_beta", 1.0)),
            alpha=None if d.get("alpha") is None else np.array(d["alpha"], dtype=float),
        )


@dataclass(frozen=True)
class StateSequence:
    """Realised hidden states, 0-based labels in ``0..M-1``."""

    s: np.ndarray
    M: int

    def __post_init__(self):
        s = np.asarray(self.s, dtype=np.int64).ravel()
        if s.size and (s.min() < 0 or s.max() >= self.M):
            raise ValueError("state labels out of range")
        s.setflags(write=False)
        object.__setattr__(self, "s", s)

    @property
    def T(self) -> int:
        return self.s.size

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.s, minlength=self.M)

    @property
    def transition_counts(self) -> np.ndarray:
        out = np.zeros((self.M, self.M), dtype=np.int64)
        if self.s.size > 1:
            np.add.at(out, (self.s[:-1], self.s[1:]), 1)
        return out

    def one_hot(self) -> np.ndarray:
        return np.eye(self.M)[self.s]


@dataclass(frozen=True)
class PriorHyperparameters:
    """Prior constants.

    ``persistence`` holds the diagonal of ``D`` (prior mean of the first own lag);
    ``None`` means zeros.  The lag-``l`` prior variance scale is ``l**-2``.
    """

    a_lambda: float = 1.0
    b_lambda: float = 1.0
    a_omega: float = 1.0
    b_omega: float = 3.0
    a: float = 1.0
    b: float = 1.0
    e_diag: float = 10.0
    e_offdiag: float = 1.0
    persistence: tuple[float, ...] | None = None

    def __post_init__(self):
        for name in ("a_lambda", "b_lambda", "a_omega", "b_omega", "a", "b", "e_diag", "e_offdiag"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.persistence is not None:
            object.__setattr__(self, "persistence", tuple(float(v) for v in self.persistence))

    def dirichlet_matrix(self, M: int) -> np.ndarray:
        e = np.full((M, M), self.e_offdiag)
        np.fill_diagonal(e, self.e_diag)
        return e

    def D(self, N: int) -> np.ndarray:
        if self.persistence is None:
            return np.zeros(N)
        d = np.asarray(self.persistence, dtype=float)
        if d.size != N:
            raise ValueError(f"persistence has {d.size} entries for {N} variables")
        return d

    def slope_prior_mean(self, N: int, p: int) -> np.ndarray:
        """``[D 0]``, shape ``N x pN``."""
        out = np.zeros((N, p * N))
        out[:, :N] = np.diag(self.D(N))
        return out

    @staticmethod
    def lag_variances(N: int, p: int) -> np.ndarray:
        """Diagonal of the slope prior covariance scale: ``l**-2`` repeated ``N`` times per lag."""
        return np.repeat(1.0 / np.arange(1, p + 1) ** 2, N)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["persistence"] = None if self.persistence is None else list(self.persistence)
        return d


# --------------------------------------------------------------------------
# Likelihood


def log_abs_det(A0: np.ndarray) -> float:
    sign, logdet = np.linalg.slogdet(A0)
    return -np.inf if sign == 0 else float(logdet)


def structural_residuals(params: ModelParameters, design: DesignMatrices) -> np.ndarray:
    """``U = A0 Y - A X``."""
    return params.A0 @ design.Y - params.A @ design.X


def state_sums_of_squares(U: np.ndarray, states: StateSequence) -> np.ndarray:
    """``SS[m, n] = sum over t with s_t = m of U[n, t]^2``."""
    return ((U * U) @ states.one_hot()).T


def log_likelihood(params: ModelParameters, states: StateSequence, design: DesignMatrices) -> float:
    """Log of the state-conditional likelihood ``p(Y | S, theta)``, equation by equation.

    Returns ``-inf`` for a singular ``A0``.
    """
    ld = log_abs_det(params.A0)
    if not np.isfinite(ld):
        return -np.inf
    T, N = design.T, design.N
    U = structural_residuals(params, design)
    ss = state_sums_of_squares(U, states)
    counts = states.counts
    omega_full = np.vstack([np.ones(N), params.omega])
    out = -0.5 * T * N * LOG_2PI + T * ld - 0.5 * T * np.sum(np.log(params.lambda1))
    out -= 0.5 * np.sum(counts[1:, None] * np.log(params.omega))
    out -= 0.5 * np.sum(ss / (params.lambda1[None, :] * omega_full))
    return float(out)


def alpha_form_terms(design: DesignMatrices, scheme: RestrictionScheme) -> tuple[np.ndarray, np.ndarray]:
    """Terms of the regression of the structural equations on ``alpha``.

    Returns ``Z`` with ``Z[t] = (y_t' kron I_N) Q`` (shape ``T x N x r``) and
    ``qY`` with column ``t`` equal to ``(y_t' kron I_N) q``.  Then
    ``y~_t = qY[:, t] - A x_t``, ``x~_t = -Z[t]`` and ``u_t = y~_t - x~_t alpha``.
    """
    N = design.N
    Z = np.einsum("jt,jnk->tnk", design.Y, scheme.column_blocks())
    qY = scheme.q.reshape(N, N, order="F") @ design.Y
    return Z, qY


def log_likelihood_alpha_form(
    alpha,
    params: ModelParameters,
    states: StateSequence,
    design: DesignMatrices,
    scheme: RestrictionScheme,
    terms: tuple[np.ndarray, np.ndarray] | None = None,
) -> float:
    """Likelihood written as a normal regression in ``alpha`` times ``|det A0|^T``.

    Uses ``A``, ``lambda1``, ``omega`` from ``params``; ``A0`` is rebuilt from ``alpha``.
    """
    alpha = np.asarray(alpha, dtype=float)
    Z, qY = terms if terms is not None else alpha_form_terms(design, scheme)
    ld = log_abs_det(scheme.reconstruct_A0(alpha))
    if not np.isfinite(ld):
        return -np.inf
    y_tilde = (qY - params.A @ design.X).T  # T x N
    x_tilde = -Z
    resid = y_tilde - x_tilde @ alpha
    lam_t = params.lambdas[states.s]  # T x N
    T, N = design.T, design.N
    return float(
        -0.5 * T * N * LOG_2PI
        - 0.5 * np.sum(np.log(lam_t))
        + T * ld
        - 0.5 * np.sum(resid * resid / lam_t)
    )


def log_likelihood_alpha_grad(alpha, params, states, design, scheme, terms=None) -> np.ndarray:
    """Gradient of :func:`log_likelihood_alpha_form` with respect to ``alpha``."""
    alpha = np.asarray(alpha, dtype=float)
    Z, qY = terms if terms is not None else alpha_form_terms(design, scheme)
    A0 = scheme.reconstruct_A0(alpha)
    x_tilde = -Z
    resid = (qY - params.A @ design.X).T - x_tilde @ alpha
    w = resid / params.lambdas[states.s]
    det_term = design.T * (np.linalg.inv(A0).T.reshape(-1, order="F") @ scheme.Q)
    return det_term + np.einsum("tnk,tn->k", x_tilde, w)


def ergodic_distribution(P: np.ndarray) -> np.ndarray:
    """Stationary distribution of a transition matrix; raises for reducible chains."""
    P = np.asarray(P, dtype=float)
    M = P.shape[0]
    if M == 1:
        return np.ones(1)
    if M == 2:
        p12, p21 = P[0, 1], P[1, 0]
        tot = p12 + p21
        if not tot > 1e-300:
            raise ReducibleChainError("transition matrix has no unique ergodic distribution")
        return np.array([p21 / tot, p12 / tot])
    A = np.eye(M) - P.T
    A[-1] = 1.0
    rhs = np.zeros(M)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise ReducibleChainError("transition matrix has no unique ergodic distribution") from exc
    if np.any(pi < -1e-10) or not np.all(np.isfinite(pi)):
        raise ReducibleChainError("transition matrix has no proper ergodic distribution")
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def state_log_emissions(params: ModelParameters, design: DesignMatrices) -> np.ndarray:
    """``log p(y_t | s_t = m, theta)``, shape ``T x M``."""
    U = structural_residuals(params, design)
    return _kernels.log_emission(U, params.lambdas, log_abs_det(params.A0))


def marginal_log_likelihood(params: ModelParameters, design: DesignMatrices) -> float:
    """``log p(Y | theta)`` with the states summed out by the forward filter."""
    ld = log_abs_det(params.A0)
    if not np.isfinite(ld):
        return -np.inf
    U = structural_residuals(params, design)
    le = _kernels.log_emission(U, params.lambdas, ld)
    _, ll = _kernels.forward_filter(le, params.P, ergodic_distribution(params.P))
    return float(ll)


# --------------------------------------------------------------------------
# Prior


def _ig2_log_kernel(x, a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -gammaln(a / 2) + (a / 2) * np.log(b / 2) - ((a + 2) / 2) * np.log(x) - b / (2 * x)
    return np.where(x > 0, out, -np.inf)


def _dirichlet_rows(P, e):
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(e == 1.0, 0.0, (e - 1) * np.log(P))
        out = gammaln(e.sum(-1)) - gammaln(e).sum(-1) + terms.sum(-1)
    valid = np.all(P >= 0, axis=-1) & (np.abs(P.sum(-1) - 1.0) < 1e-8)
    return np.where(valid, out, -np.inf).sum(-1)


def prior_terms(
    alpha, A, A0, lambda1, omega, P, gammas, hyper: PriorHyperparameters
) -> dict[str, np.ndarray]:
    """Log prior density split by factor.  All arguments may carry leading batch axes.

    Shapes (without batch axes): ``alpha (r,)``, ``A (N, K)``, ``A0 (N, N)``,
    ``lambda1 (N,)``, ``omega (M-1, N)``, ``P (M, M)``, ``gammas (3,)`` ordered
    ``(gamma_alpha, gamma_mu, gamma_beta)``.
    """
    A = np.asarray(A, dtype=float)
    N, K = A.shape[-2:]
    p = (K - 1) // N
    M = np.shape(P)[-1]
    g_alpha, g_mu, g_beta = (np.asarray(gammas)[..., k] for k in range(3))
    safe = lambda g: np.where(g > 0, g, np.nan)  # noqa: E731
    out = {}
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape[-1]:
        out["alpha"] = np.nan_to_num(normal_log_pdf_diag(alpha, 0.0, safe(g_alpha)[..., None]), nan=-np.inf)
    else:
        out["alpha"] = np.zeros(np.shape(g_alpha))
    out["mu"] = np.nan_to_num(normal_log_pdf_diag(A[..., 0], 0.0, safe(g_mu)[..., None]), nan=-np.inf)
    beta_mean = np.asarray(A0) @ hyper.slope_prior_mean(N, p)
    var = safe(g_beta)[..., None, None] * hyper.lag_variances(N, p)
    beta_terms = normal_log_pdf_diag(A[..., 1:], beta_mean, var)
    out["beta"] = np.nan_to_num(beta_terms.sum(-1), nan=-np.inf)
    out["lambda1"] = _ig2_log_kernel(np.asarray(lambda1), hyper.a_lambda, hyper.b_lambda).sum(-1)
    omega = np.asarray(omega, dtype=float)
    out["omega"] = _ig2_log_kernel(omega, hyper.a_omega, hyper.b_omega).sum((-1, -2)) if M > 1 else np.zeros(np.shape(g_alpha))
    out["gamma_alpha"] = _ig2_log_kernel(g_alpha, hyper.a, hyper.b)
    out["gamma_mu"] = _ig2_log_kernel(g_mu, hyper.a, hyper.b)
    out["gamma_beta"] = _ig2_log_kernel(g_beta, hyper.a, hyper.b)
    out["P"] = _dirichlet_rows(np.asarray(P, dtype=float), hyper.dirichlet_matrix(M)) if M > 1 else np.zeros(np.shape(g_alpha))
    return out


def log_prior_components(params: ModelParameters, hyper: PriorHyperparameters, scheme: RestrictionScheme) -> dict[str, float]:
    alpha = params.alpha if params.alpha is not None else scheme.extract_alpha(params.A0)
    terms = prior_terms(alpha, params.A, params.A0, params.lambda1, params.omega, params.P, params.gammas, hyper)
    return {k: float(v) for k, v in terms.items()}


def log_prior(params: ModelParameters, hyper: PriorHyperparameters, scheme: RestrictionScheme) -> float:
    """Sum of all prior factors; ``-inf`` outside the support."""
    total = sum(log_prior_components(params, hyper, scheme).values())
    return float(total) if np.isfinite(total) else -np.inf


# --------------------------------------------------------------------------
# Covariances, stability, simulation


def implied_covariances(params: ModelParameters) -> list[np.ndarray]:
    """Reduced-form covariances ``A0^-1 diag(lambda_m) A0^-T`` for each state."""
    if not np.isfinite(log_abs_det(params.A0)):
        raise SingularMatrixError("A0 is singular")
    inv = np.linalg.inv(params.A0)
    out = []
    for lam in params.lambdas:
        s = (inv * lam) @ inv.T
        out.append(0.5 * (s + s.T))
    return out


def companion_matrix(params: ModelParameters) -> np.ndarray:
    N, p = params.N, params.p
    inv = np.linalg.inv(params.A0)
    top = np.hstack([inv @ Ai for Ai in params.lag_matrices()])
    if p == 1:
        return top
    bottom = np.hstack([np.eye(N * (p - 1)), np.zeros((N * (p - 1), N))])
    return np.vstack([top, bottom])


def spectral_radius(params: ModelParameters) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(params)))))


def min_simulation_length(N: int, p: int) -> int:
    """Shortest simulated sample accepted: one observation per reduced-form coefficient."""
    return N * (1 + p * N)


def simulate_data(
    params: ModelParameters,
    T: int,
    seed: int | np.random.SeedSequence | None = None,
    burn: int = 200,
    initial_state: int | None = None,
    names: Sequence[str] = (),
) -> tuple[TimeSeriesData, StateSequence]:
    """Simulate ``p`` presample values plus ``T`` observations and their states.

    The chain starts from its ergodic distribution unless ``initial_state``
    (0-based) is given; ``burn`` leading observations are discarded.
    """
    N, p, M = params.N, params.p, params.M
    if T < min_simulation_length(N, p):
        raise InsufficientDataError(
            f"T={T} is too short for N={N}, p={p}; need at least {min_simulation_length(N, p)}"
        )
    if not np.isfinite(log_abs_det(params.A0)):
        raise SingularMatrixError("A0 is singular")
    rho = spectral_radius(params)
    if rho >= 1.0:
        raise UnstableSystemError(f"companion spectral radius {rho:.4f} >= 1")
    P = params.P
    if np.any(P < 0) or not np.allclose(P.sum(1), 1.0):
        raise ValueError("P must be a row-stochastic matrix")
    rng = np.random.default_rng(seed)
    n = burn + p + T
    if initial_state is None:
        first = rng.choice(M, p=ergodic_distribution(P))
    else:
        first = int(initial_state)
    s = np.empty(n, dtype=np.int64)
    s[0] = first
    cum = np.cumsum(P, axis=1)
    u = rng.random(n)
    for t in range(1, n):
        s[t] = min(int(np.searchsorted(cum[s[t - 1]], u[t], side="right")), M - 1)
    sd = np.sqrt(params.lambdas)
    shocks = rng.standard_normal((n, N)) * sd[s]
    inv = np.linalg.inv(params.A0)
    lags = params.lag_matrices()
    y = np.zeros((n + p, N))
    for t in range(n):
        rhs = params.mu + shocks[t]
        for i, Ai in enumerate(lags, start=1):
            rhs = rhs + Ai @ y[p + t - i]
        y[p + t] = inv @ rhs
    y = y[p + burn :]  # p presample + T observations
    data = TimeSeriesData(y.T.copy(), tuple(names))
    return data, StateSequence(s[burn + p :], M)
