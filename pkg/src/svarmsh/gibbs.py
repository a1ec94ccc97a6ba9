"""Metropolis-within-Gibbs posterior sampler.

One sweep updates, in order: hidden states (forward filtering, backward
sampling), transition matrix (Dirichlet proposal with an ergodic-probability
correction), state-1 variances, relative variances, rows of ``A``, the free
elements ``alpha`` of ``A0`` (random-walk t proposal) and the three shrinkage
parameters.

The block functions below take sufficient statistics rather than raw data so
that :func:`run_chain` computes residuals once per sweep.  ``ss[m, n]`` always
denotes the sum of squared structural residuals of equation ``n`` over the
periods in state ``m``.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import _kernels
from .distributions import cholesky, ig2_sample
from .errors import ChainFailure, NotPositiveDefiniteError, ReducibleChainError
from .model import (
    DesignMatrices,
    ModelParameters,
    PriorHyperparameters,
    StateSequence,
    alpha_form_terms,
    ergodic_distribution,
    log_abs_det,
)
from .restrictions import RestrictionScheme

BLOCKS = ("states", "transition", "lambda1", "omega", "A", "alpha", "shrinkage")
LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class SamplerConfig:
    n_burn: int = 5000
    n_draws: int = 20000
    thin: int = 1
    mh_dof: float = 5.0
    mh_scale_mult: float = 1.0
    seed: int = 0
    n_chains: int = 2
    state_relabeling: bool = True
    fixed_blocks: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n_draws < 1:
            raise ValueError("n_draws must be positive")
        if self.n_burn < 0 or self.thin < 1 or self.n_chains < 1:
            raise ValueError("n_burn >= 0, thin >= 1 and n_chains >= 1 required")
        if not self.mh_dof > 2:
            raise ValueError("t-proposal degrees of freedom must exceed 2")
        if not self.mh_scale_mult > 0:
            raise ValueError("mh_scale_mult must be positive")
        fixed = frozenset(self.fixed_blocks)
        unknown = fixed - set(BLOCKS)
        if unknown:
            raise ValueError(f"unknown blocks {sorted(unknown)}; valid: {BLOCKS}")
        object.__setattr__(self, "fixed_blocks", fixed)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fixed_blocks"] = sorted(self.fixed_blocks)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerConfig":
        d = dict(d)
        d["fixed_blocks"] = frozenset(d.get("fixed_blocks", ()))
        return cls(**d)


# --------------------------------------------------------------------------
# Variance blocks


def lambda1_posterior(ss, counts, omega, hyper: PriorHyperparameters):
    """Shape and scale of the IG2 full conditional of each ``lambda_{1,n}``.

    Shape ``a_lambda + T``; scale ``b_lambda + sum_m ss[m, n] / omega[m, n]``
    (``omega`` of the first state is one).
    """
    ss = np.asarray(ss, dtype=float)
    omega_full = np.vstack([np.ones(ss.shape[1]), np.asarray(omega, dtype=float).reshape(-1, ss.shape[1])])
    a = hyper.a_lambda + float(np.sum(counts))
    b = hyper.b_lambda + np.sum(ss / omega_full, axis=0)
    return np.full(ss.shape[1], a), b


def sample_lambda1(ss, counts, omega, hyper: PriorHyperparameters, rng) -> np.ndarray:
    a, b = lambda1_posterior(ss, counts, omega, hyper)
    return ig2_sample(a, b, rng)


def omega_posterior(ss, counts, lambda1, hyper: PriorHyperparameters):
    """IG2 shape/scale of every ``omega_{m,n}``, ``m >= 2``; arrays of shape ``(M-1, N)``.

    These are also the Rao-Blackwell records used for the density-ratio tests.
    """
    ss = np.asarray(ss, dtype=float)
    counts = np.asarray(counts, dtype=float)
    a = hyper.a_omega + np.broadcast_to(counts[1:, None], ss[1:].shape)
    b = hyper.b_omega + ss[1:] / np.asarray(lambda1, dtype=float)
    return np.array(a), b


def sample_omega(ss, counts, lambda1, hyper: PriorHyperparameters, rng):
    """Draw all relative variances; returns ``(omega, a, b)``."""
    a, b = omega_posterior(ss, counts, lambda1, hyper)
    if a.size == 0:
        return np.zeros_like(b), a, b
    return ig2_sample(a, b, rng), a, b


# --------------------------------------------------------------------------
# Autoregressive rows


def _prior_slope_terms(A0, gammas, hyper: PriorHyperparameters, N: int, p: int):
    """Prior mean ``A0 [0 P_bar]`` (N x K) and prior variances (K) of the rows of ``A``."""
    h = np.concatenate([[gammas[1]], gammas[2] * hyper.lag_variances(N, p)])
    mean = np.zeros((N, 1 + N * p))
    mean[:, 1 : N + 1] = A0 * hyper.D(N)[None, :]
    return mean, h


def sample_A_rows(
    A0,
    inv_lam_t,
    design: DesignMatrices,
    gammas,
    hyper: PriorHyperparameters,
    rng,
    rows=None,
    A0Y=None,
) -> np.ndarray:
    """Draw rows of ``A`` from their normal full conditionals.

    ``inv_lam_t[t, n]`` is ``1 / lambda_{s_t, n}``.  The row-``n`` precision is
    ``sum_t x_t x_t' / lambda_{s_t,n} + H~^-1`` and the mean regresses
    ``A0_n y_t`` on ``x_t`` shrinking towards ``A0_n [0 P_bar]``.
    """
    N, K, p = design.N, design.K, design.p
    X = design.X
    A0Y = A0 @ design.Y if A0Y is None else A0Y
    prior_mean, h = _prior_slope_terms(A0, gammas, hyper, N, p)
    rows = range(N) if rows is None else rows
    out = np.empty((len(rows), K))
    for k, n in enumerate(rows):
        Xw = X * inv_lam_t[:, n]
        prec = Xw @ X.T
        prec[np.diag_indices(K)] += 1.0 / h
        rhs = Xw @ A0Y[n] + prior_mean[n] / h
        try:
            L = np.linalg.cholesky(prec)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(
                f"row {n} precision not positive definite (condition number {np.linalg.cond(prec):.3g})"
            ) from exc
        mean = solve_triangular(L.T, solve_triangular(L, rhs, lower=True), lower=False)
        out[k] = mean + solve_triangular(L.T, rng.standard_normal(K), lower=False)
    return out


def sample_A_row(n: int, A0, inv_lam_t, design, gammas, hyper, rng) -> np.ndarray:
    return sample_A_rows(A0, inv_lam_t, design, gammas, hyper, rng, rows=[n])[0]


# --------------------------------------------------------------------------
# Structural matrix


class AlphaTarget:
    """Log full conditional of ``alpha`` (up to a constant) for fixed ``A``, variances and states.

    The structural residual is ``u_t = b_t + Z_t alpha`` with
    ``b_t = (y_t' kron I) q - A x_t`` and ``Z_t = (y_t' kron I) Q``, so the
    Gaussian part is the quadratic ``c + 2 g' alpha + alpha' H alpha``; ``H^-1``
    is the scale of the t proposal.  The slope prior depends on ``A0`` through
    its mean ``A0_n P_bar`` and is included.
    """

    def __init__(self, Zflat, qY, A, X, inv_lam_t, scheme: RestrictionScheme, gammas, hyper, p: int):
        T, N = inv_lam_t.shape
        B = (qY - A @ X).T  # T x N
        w = inv_lam_t.ravel()
        Bw = (B.ravel() * w)
        self.H = (Zflat * w[:, None]).T @ Zflat
        self.g = Zflat.T @ Bw
        self.c = float(B.ravel() @ Bw)
        self.T = T
        self.scheme = scheme
        self.gamma_alpha = gammas[0]
        self.D = hyper.D(N)
        self.with_slope_prior = bool(np.any(self.D != 0))
        if self.with_slope_prior:
            lag1 = A[:, 1 : N + 1]
            self.lag1 = lag1
            self.slope_var = gammas[2]  # first-lag variance scale is 1

    def log_density(self, alpha) -> float:
        A0 = self.scheme.reconstruct_A0(alpha)
        ld = log_abs_det(A0)
        if not np.isfinite(ld):
            return -np.inf
        quad = self.c + 2.0 * self.g @ alpha + alpha @ self.H @ alpha
        out = self.T * ld - 0.5 * quad - 0.5 * (alpha @ alpha) / self.gamma_alpha
        if self.with_slope_prior:
            d = self.lag1 - A0 * self.D[None, :]
            out -= 0.5 * np.sum(d * d) / self.slope_var
        return float(out)


def sample_alpha_mh(alpha, target: AlphaTarget, config: SamplerConfig, rng, proposal=None):
    """One random-walk Metropolis step; returns ``(alpha, accepted)``.

    Proposal: multivariate t centred at the current value with scale
    ``mh_scale_mult * H^-1`` and ``mh_dof`` degrees of freedom.  The proposal is
    symmetric so the acceptance ratio is the ratio of target densities.
    ``proposal`` overrides the drawn candidate.
    """
    alpha = np.asarray(alpha, dtype=float)
    r = alpha.size
    if r == 0:
        return alpha, True
    if proposal is None:
        try:
            Pstar = np.linalg.inv(target.H)
            L = cholesky(config.mh_scale_mult * 0.5 * (Pstar + Pstar.T))
        except (np.linalg.LinAlgError, NotPositiveDefiniteError):
            L = np.eye(r) * np.sqrt(config.mh_scale_mult * target.gamma_alpha)
        z = L @ rng.standard_normal(r)
        w = rng.chisquare(config.mh_dof)
        proposal = alpha + z * np.sqrt(config.mh_dof / w)
    proposal = np.asarray(proposal, dtype=float)
    log_u = np.log(rng.random())
    new = target.log_density(proposal)
    if not np.isfinite(new):
        return alpha, False
    if log_u < new - target.log_density(alpha):
        return proposal, True
    return alpha, False


# --------------------------------------------------------------------------
# Shrinkage


def shrinkage_posterior(alpha, A, A0, hyper: PriorHyperparameters):
    """IG2 ``(shape, scale)`` for ``gamma_alpha``, ``gamma_mu`` and ``gamma_beta``."""
    A = np.asarray(A, dtype=float)
    N, K = A.shape
    p = (K - 1) // N
    alpha = np.asarray(alpha, dtype=float)
    mu = A[:, 0]
    dev = A[:, 1:] - np.asarray(A0) @ hyper.slope_prior_mean(N, p)
    quad_beta = float(np.sum(dev * dev / hyper.lag_variances(N, p)))
    a = np.array([hyper.a + alpha.size, hyper.a + N, hyper.a + p * N * N])
    b = np.array([hyper.b + alpha @ alpha, hyper.b + mu @ mu, hyper.b + quad_beta])
    return a, b


def sample_shrinkage(alpha, A, A0, hyper: PriorHyperparameters, rng) -> np.ndarray:
    a, b = shrinkage_posterior(alpha, A, A0, hyper)
    return ig2_sample(a, b, rng)


# --------------------------------------------------------------------------
# Hidden states and transition matrix


def ffbs(log_emission, P, rng):
    """Forward filtering, backward sampling given per-state log densities (T x M).

    Returns ``(states, filtered_probabilities, log_likelihood)``.
    """
    init = ergodic_distribution(P)
    filt, ll = _kernels.forward_filter(np.ascontiguousarray(log_emission), np.ascontiguousarray(P), init)
    if not np.isfinite(ll):
        raise FloatingPointError("forward filter underflow: all states have zero density")
    s = _kernels.backward_sample(filt, np.ascontiguousarray(P), rng.random(log_emission.shape[0]))
    return s, filt, ll


def sample_states_ffbs(params: ModelParameters, design: DesignMatrices, rng) -> StateSequence:
    U = params.A0 @ design.Y - params.A @ design.X
    le = _kernels.log_emission(U, params.lambdas, log_abs_det(params.A0))
    s, _, _ = ffbs(le, params.P, rng)
    return StateSequence(s, params.M)


def transition_proposal_parameters(transition_counts, hyper: PriorHyperparameters) -> np.ndarray:
    M = transition_counts.shape[0]
    return hyper.dirichlet_matrix(M) + transition_counts


def sample_transition_matrix(states: StateSequence, P, hyper: PriorHyperparameters, rng, proposal=None):
    """Dirichlet proposal for every row, accepted with ``pi_{s_1}(P_new) / pi_{s_1}(P_old)``.

    ``proposal`` overrides the drawn candidate (used to test the acceptance rule).
    Returns ``(P, accepted)``.
    """
    M = states.M
    P = np.asarray(P, dtype=float)
    if M == 1:
        return np.ones((1, 1)), True
    if proposal is None:
        e = transition_proposal_parameters(states.transition_counts, hyper)
        proposal = np.vstack([rng.dirichlet(row) for row in e])
    log_u = np.log(rng.random())
    first = states.s[0]
    try:
        pi_new = ergodic_distribution(proposal)
    except ReducibleChainError:
        return P, False
    pi_old = ergodic_distribution(P)
    with np.errstate(divide="ignore"):
        log_ratio = np.log(pi_new[first]) - np.log(pi_old[first])
    if log_u < log_ratio:
        return proposal, True
    return P, False


def volatility_order(lambda1, omega) -> np.ndarray:
    """State permutation sorting states by the geometric mean of their variances."""
    log_lam = np.log(np.vstack([lambda1, np.asarray(lambda1) * omega]))
    return np.argsort(log_lam.mean(axis=1), kind="stable")


# --------------------------------------------------------------------------
# Draw storage


FIELDS = ("alpha", "A", "lambda1", "omega", "P", "gammas", "state_counts", "ssr", "rb_a", "rb_b",
          "loglik", "loglik_marginal", "accept_alpha", "accept_P", "sweep")


@dataclass
class ChainDraws:
    """Retained draws of one chain, one leading axis entry per draw."""

    alpha: np.ndarray  # S x r
    A: np.ndarray  # S x N x K
    lambda1: np.ndarray  # S x N
    omega: np.ndarray  # S x (M-1) x N
    P: np.ndarray  # S x M x M
    gammas: np.ndarray  # S x 3
    state_counts: np.ndarray  # S x M
    ssr: np.ndarray  # S x M x N, per-state residual sums of squares
    rb_a: np.ndarray  # S x (M-1) x N
    rb_b: np.ndarray  # S x (M-1) x N
    loglik: np.ndarray  # S, conditional on states
    loglik_marginal: np.ndarray  # S, states summed out
    accept_alpha: np.ndarray  # S
    accept_P: np.ndarray  # S
    sweep: np.ndarray  # S
    state_probs: np.ndarray  # T x M, share of draws in each state

    @classmethod
    def empty(cls, S, N, K, M, r, T) -> "ChainDraws":
        return cls(
            alpha=np.empty((S, r)),
            A=np.empty((S, N, K)),
            lambda1=np.empty((S, N)),
            omega=np.empty((S, M - 1, N)),
            P=np.empty((S, M, M)),
            gammas=np.empty((S, 3)),
            state_counts=np.empty((S, M)),
            ssr=np.empty((S, M, N)),
            rb_a=np.empty((S, M - 1, N)),
            rb_b=np.empty((S, M - 1, N)),
            loglik=np.empty(S),
            loglik_marginal=np.empty(S),
            accept_alpha=np.empty(S),
            accept_P=np.empty(S),
            sweep=np.empty(S),
            state_probs=np.zeros((T, M)),
        )

    @property
    def n_draws(self) -> int:
        return self.lambda1.shape[0]


@dataclass
class PosteriorDraw:
    params: ModelParameters
    state_counts: np.ndarray
    rb_a: np.ndarray
    rb_b: np.ndarray
    loglik: float
    loglik_marginal: float
    accepted: bool


@dataclass
class DrawStore:
    chains: list[ChainDraws]
    metadata: dict

    @property
    def scheme(self) -> RestrictionScheme:
        return RestrictionScheme.from_dict(self.metadata["scheme"])

    @property
    def hyper(self) -> PriorHyperparameters:
        return PriorHyperparameters(**self.metadata["hyper"])

    @property
    def config(self) -> SamplerConfig:
        return SamplerConfig.from_dict(self.metadata["config"])

    @property
    def M(self) -> int:
        return int(self.metadata["M"])

    @property
    def N(self) -> int:
        return int(self.metadata["N"])

    @property
    def n_draws(self) -> int:
        return sum(c.n_draws for c in self.chains)

    def pooled(self, name: str) -> np.ndarray:
        return np.concatenate([getattr(c, name) for c in self.chains], axis=0)

    def state_probs(self) -> np.ndarray:
        w = np.array([c.n_draws for c in self.chains], dtype=float)
        return np.tensordot(w / w.sum(), np.stack([c.state_probs for c in self.chains]), axes=1)

    def draw(self, chain: int, i: int) -> PosteriorDraw:
        c = self.chains[chain]
        scheme = self.scheme
        g = c.gammas[i]
        params = ModelParameters.from_alpha(
            c.alpha[i], scheme, c.A[i], c.lambda1[i], c.omega[i], c.P[i],
            gamma_alpha=g[0], gamma_mu=g[1], gamma_beta=g[2],
        )
        return PosteriorDraw(params, c.state_counts[i], c.rb_a[i], c.rb_b[i],
                             float(c.loglik[i]), float(c.loglik_marginal[i]), bool(c.accept_alpha[i]))

    def lambdas(self) -> np.ndarray:
        """Pooled state variances, ``S x M x N``."""
        lam1 = self.pooled("lambda1")
        return np.concatenate([lam1[:, None, :], lam1[:, None, :] * self.pooled("omega")], axis=1)


# --------------------------------------------------------------------------
# Chains


def initial_parameters(design: DesignMatrices, M: int, scheme: RestrictionScheme, rng) -> ModelParameters:
    """Starting point: ``alpha = 0``, least-squares ``A``, residual variances, spread relative variances."""
    N, K = design.N, design.K
    alpha = np.zeros(scheme.r)
    A0 = scheme.reconstruct_A0(alpha)
    A0Y = A0 @ design.Y
    XX = design.X @ design.X.T + 1e-8 * np.eye(K)
    A = np.linalg.solve(XX, design.X @ A0Y.T).T
    U = A0Y - A @ design.X
    lam1 = np.maximum(np.mean(U * U, axis=1), 1e-8) * 0.5
    omega = np.array([[3.0**m] * N for m in range(1, M)]).reshape(M - 1, N)
    omega = omega * np.exp(0.1 * rng.standard_normal(omega.shape))
    if M > 1:
        P = np.full((M, M), 0.1 / (M - 1))
        np.fill_diagonal(P, 0.9)
    else:
        P = np.ones((1, 1))
    return ModelParameters(A0, A, lam1, omega, P, 1.0, 1.0, 1.0, alpha=alpha)


def run_chain(
    design: DesignMatrices,
    M: int,
    scheme: RestrictionScheme,
    hyper: PriorHyperparameters,
    config: SamplerConfig,
    rng: np.random.Generator | None = None,
    init: ModelParameters | None = None,
    init_states=None,
) -> ChainDraws:
    """Run one chain and return its retained draws."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    N, K, T, p = design.N, design.K, design.T, design.p
    if scheme.N != N:
        raise ValueError(f"scheme is for N={scheme.N}, data has N={N}")
    fixed = config.fixed_blocks
    start = initial_parameters(design, M, scheme, rng) if init is None else init.copy()
    alpha = start.alpha if start.alpha is not None else scheme.extract_alpha(start.A0)
    alpha = np.array(alpha, dtype=float)
    A0 = scheme.reconstruct_A0(alpha)
    A = start.A.copy()
    lam1 = start.lambda1.copy()
    omega = start.omega.reshape(M - 1, N).copy()
    P = start.P.copy()
    gammas = start.gammas.astype(float)
    if init_states is not None:
        s = np.asarray(init_states, dtype=np.int64).copy()
    else:
        s = np.zeros(T, dtype=np.int64)
    Y, X = design.Y, design.X
    Z, qY = alpha_form_terms(design, scheme)
    Zflat = np.ascontiguousarray(Z.reshape(T * N, scheme.r))
    eyeM = np.eye(M)
    ones_row = np.ones((1, N))

    n_sweeps = config.n_burn + config.n_draws * config.thin
    out = ChainDraws.empty(config.n_draws, N, K, M, scheme.r, T)
    accepted_alpha = accepted_P = True
    k = 0
    block = "init"
    sweep = 0
    try:
        for sweep in range(n_sweeps):
            A0Y = A0 @ Y
            U = A0Y - A @ X
            lambdas = np.concatenate([lam1[None, :], lam1[None, :] * omega], axis=0)
            if M > 1 and "states" not in fixed:
                block = "states"
                le = _kernels.log_emission(U, lambdas, log_abs_det(A0))
                s, _, _ = ffbs(le, P, rng)
            onehot = eyeM[s]
            counts = onehot.sum(axis=0)
            if M > 1 and "transition" not in fixed:
                block = "transition"
                P, accepted_P = sample_transition_matrix(StateSequence(s, M), P, hyper, rng)
            ss = (U * U) @ onehot
            ss = ss.T  # M x N
            if "lambda1" not in fixed:
                block = "lambda1"
                lam1 = sample_lambda1(ss, counts, omega, hyper, rng)
            if M > 1 and "omega" not in fixed:
                block = "omega"
                omega, _, _ = sample_omega(ss, counts, lam1, hyper, rng)
            lambdas = np.concatenate([lam1[None, :], lam1[None, :] * omega], axis=0)
            inv_lam_t = (1.0 / lambdas)[s]
            if "A" not in fixed:
                block = "A"
                A = sample_A_rows(A0, inv_lam_t, design, gammas, hyper, rng, A0Y=A0Y)
            if scheme.r and "alpha" not in fixed:
                block = "alpha"
                target = AlphaTarget(Zflat, qY, A, X, inv_lam_t, scheme, gammas, hyper, p)
                alpha, accepted_alpha = sample_alpha_mh(alpha, target, config, rng)
                A0 = scheme.reconstruct_A0(alpha)
            if "shrinkage" not in fixed:
                block = "shrinkage"
                new_g = sample_shrinkage(alpha, A, A0, hyper, rng)
                if scheme.r == 0:
                    new_g[0] = gammas[0] if "alpha" in fixed else new_g[0]
                gammas = new_g

            if sweep < config.n_burn or (sweep - config.n_burn) % config.thin:
                continue
            block = "record"
            ld = log_abs_det(A0)
            U = A0 @ Y - A @ X
            r_lam1, r_omega, r_P, r_s = lam1, omega, P, s
            r_counts, r_onehot = counts, onehot
            if config.state_relabeling and M > 1:
                order = volatility_order(lam1, omega)
                if np.any(order != np.arange(M)):
                    lam_all = np.concatenate([lam1[None, :], lam1[None, :] * omega], axis=0)[order]
                    r_lam1 = lam_all[0]
                    r_omega = lam_all[1:] / r_lam1
                    r_P = P[np.ix_(order, order)]
                    inverse = np.argsort(order)
                    r_s = inverse[s]
                    r_onehot = eyeM[r_s]
                    r_counts = counts[order]
            ss = ((U * U) @ r_onehot).T
            a_rb, b_rb = omega_posterior(ss, r_counts, r_lam1, hyper)
            omega_full = np.concatenate([ones_row, r_omega], axis=0)
            ll = (
                -0.5 * T * N * LOG_2PI + T * ld - 0.5 * T * np.sum(np.log(r_lam1))
                - 0.5 * np.sum(r_counts[1:, None] * np.log(r_omega))
                - 0.5 * np.sum(ss / (r_lam1[None, :] * omega_full))
            )
            lambdas = np.concatenate([r_lam1[None, :], r_lam1[None, :] * r_omega], axis=0)
            le = _kernels.log_emission(U, lambdas, ld)
            _, llm = _kernels.forward_filter(le, r_P, ergodic_distribution(r_P))

            out.alpha[k] = alpha
            out.A[k] = A
            out.lambda1[k] = r_lam1
            out.omega[k] = r_omega
            out.P[k] = r_P
            out.gammas[k] = gammas
            out.state_counts[k] = r_counts
            out.ssr[k] = ss
            out.rb_a[k] = a_rb
            out.rb_b[k] = b_rb
            out.loglik[k] = ll
            out.loglik_marginal[k] = llm
            out.accept_alpha[k] = accepted_alpha
            out.accept_P[k] = accepted_P
            out.sweep[k] = sweep
            out.state_probs += r_onehot
            k += 1
    except ChainFailure:
        raise
    except Exception as exc:  # noqa: BLE001 - rewrapped with location
        raise ChainFailure(sweep, block, exc) from exc
    out.state_probs /= config.n_draws
    return out


def _run_chain_seeded(args):
    design, M, scheme, hyper, config, seed_seq, init, init_states = args
    return run_chain(design, M, scheme, hyper, config, np.random.default_rng(seed_seq), init, init_states)


def chain_threads() -> int:
    try:
        return max(1, int(os.environ.get("SVARMSH_THREADS", "1")))
    except ValueError:
        return 1


def run_sampler(
    design: DesignMatrices,
    M: int,
    scheme: RestrictionScheme,
    hyper: PriorHyperparameters,
    config: SamplerConfig,
    init: ModelParameters | None = None,
    init_states=None,
    metadata: dict | None = None,
) -> DrawStore:
    """Run ``config.n_chains`` independent chains seeded from ``config.seed``.

    Chains run in parallel processes when ``SVARMSH_THREADS`` exceeds one; the
    result does not depend on the degree of parallelism.
    """
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_chains)
    jobs = [(design, M, scheme, hyper, config, sq, init, init_states) for sq in seeds]
    workers = min(chain_threads(), config.n_chains)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chains = list(pool.map(_run_chain_seeded, jobs))
    else:
        chains = [_run_chain_seeded(job) for job in jobs]
    meta = {
        "N": design.N,
        "M": M,
        "p": design.p,
        "T": design.T,
        "config": config.to_dict(),
        "scheme": scheme.to_dict(),
        "hyper": hyper.to_dict(),
    }
    if metadata:
        meta.update(metadata)
    return DrawStore(chains, meta)
