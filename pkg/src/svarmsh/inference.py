"""Post-sampling statistics: density-ratio Bayes factors, marginal likelihood, Monte Carlo errors.

Savage-Dickey ratios compare the posterior ordinate of a restriction on the
relative variances with its prior ordinate.  Posterior ordinates are
Rao-Blackwellised: each draw stores the IG2 shape/scale of every relative
variance's full conditional, so the posterior ordinate is the average of
closed-form densities.  Equation and state indices in this module are
1-based to match hypothesis labels (state ``1`` is the reference state).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from .distributions import ig2_log_pdf, ig2r_log_pdf
from .errors import NoDrawsInRegionError
from .gibbs import DrawStore
from .model import PriorHyperparameters, TimeSeriesData, build_design, ergodic_distribution, prior_terms
from .restrictions import RestrictionScheme

SDDR_BATCHES = 2000
MDD_BATCHES = 1000
MDD_DRAWS = 20000


# --------------------------------------------------------------------------
# Numerical standard errors


def nse_batch_means(series, n_batches: int) -> float:
    """Batch-means standard error of the mean of ``series``.

    The series is cut into ``n_batches`` contiguous batches of equal length
    (a remainder at the start is dropped); the NSE is the standard deviation
    of the batch means divided by ``sqrt(n_batches)``.
    """
    x = np.asarray(series, dtype=float).ravel()
    if n_batches < 2 or x.size < 2 * n_batches:
        raise ValueError(f"series of length {x.size} is too short for {n_batches} batches")
    size = x.size // n_batches
    means = x[x.size - size * n_batches :].reshape(n_batches, size).mean(axis=1)
    return float(np.std(means, ddof=1) / np.sqrt(n_batches))


def nse_log_batch_means(log_terms, n_batches: int) -> float:
    """Batch-means NSE of ``log(mean(exp(log_terms)))``.

    Batch statistics are the log of each batch's average, so the error refers
    to the reported log quantity.  Batches whose terms are all ``-inf`` make the
    batch log undefined; a delta-method standard error is returned instead.
    """
    x = np.asarray(log_terms, dtype=float).ravel()
    if n_batches < 2 or x.size < 2 * n_batches:
        raise ValueError(f"series of length {x.size} is too short for {n_batches} batches")
    size = x.size // n_batches
    blocks = x[x.size - size * n_batches :].reshape(n_batches, size)
    logs = logsumexp(blocks, axis=1) - np.log(size)
    if np.all(np.isfinite(logs)):
        return float(np.std(logs, ddof=1) / np.sqrt(n_batches))
    return nse_log_delta(x)


def nse_log_delta(log_terms) -> float:
    """Delta-method standard error of ``log(mean(exp(log_terms)))`` for independent terms."""
    x = np.asarray(log_terms, dtype=float).ravel()
    w = np.exp(x - np.max(x))
    mean = w.mean()
    return float(np.std(w, ddof=1) / (np.sqrt(x.size) * mean))


def default_batches(n: int, preferred: int) -> int:
    """``preferred`` batches when the series allows at least 10 draws per batch, fewer otherwise."""
    return int(max(2, min(preferred, n // 10)))


def psrf(chains) -> float:
    """Potential scale reduction factor of a scalar across chains (rows = chains)."""
    x = np.asarray(chains, dtype=float)
    m, n = x.shape
    if m < 2 or n < 2:
        raise ValueError("need at least two chains of length two")
    means = x.mean(axis=1)
    W = x.var(axis=1, ddof=1).mean()
    B = n * means.var(ddof=1)
    if W == 0:
        return 1.0 if B == 0 else np.inf
    var_plus = (n - 1) / n * W + B / n
    return float(np.sqrt(var_plus / W))


# --------------------------------------------------------------------------
# Savage-Dickey density ratios


@dataclass(frozen=True)
class Hypothesis:
    """Restriction on relative variances.

    ``kind`` is one of ``"pair"`` (``omega_{m,i} = omega_{m,j}`` for a single
    state ``m``), ``"identification"`` (``omega_{m,i} = omega_{m,j}`` for all
    ``m >= 2``), ``"homoskedasticity"`` (``omega_{m,i} = 1`` for all ``m``) and
    ``"joint_homoskedasticity"`` (``omega_{m,i} = 1`` for all ``m`` and all
    ``i`` in ``equations``).
    """

    kind: str
    equations: tuple[int, ...]
    state: int | None = None

    def label(self) -> str:
        eq = ",".join(map(str, self.equations))
        if self.kind == "pair":
            return f"omega[{self.state},{self.equations[0]}]=omega[{self.state},{self.equations[1]}]"
        if self.kind == "identification":
            return f"U[{eq}]"
        if self.kind == "homoskedasticity":
            return f"H[{eq}]"
        return f"H[{{{eq}}}]"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "equations": list(self.equations), "state": self.state, "label": self.label()}


@dataclass(frozen=True)
class SddrResult:
    log_numerator: float
    log_denominator: float
    nse: float
    hypothesis: Hypothesis
    n_draws: int = 0

    @property
    def log_sddr(self) -> float:
        return self.log_numerator - self.log_denominator

    def to_dict(self) -> dict:
        return {
            "hypothesis": self.hypothesis.to_dict(),
            "log_numerator": self.log_numerator,
            "log_denominator": self.log_denominator,
            "log_sddr": self.log_sddr,
            "nse": self.nse,
            "n_draws": self.n_draws,
        }


def _records(store: DrawStore):
    try:
        a = store.pooled("rb_a")
        b = store.pooled("rb_b")
    except (AttributeError, ValueError) as exc:
        raise ValueError("draw store lacks Rao-Blackwell records") from exc
    if a.ndim != 3 or a.shape[1] == 0:
        raise ValueError("Rao-Blackwell records need at least two volatility states")
    return a, b


def _check_eq(i: int, N: int) -> int:
    if not 1 <= int(i) <= N:
        raise ValueError(f"equation index {i} outside 1..{N}")
    return int(i) - 1


def _sddr(log_terms, log_denominator, hypothesis, n_batches) -> SddrResult:
    S = log_terms.size
    log_num = float(logsumexp(log_terms) - np.log(S))
    nb = default_batches(S, SDDR_BATCHES) if n_batches is None else n_batches
    return SddrResult(log_num, float(log_denominator), nse_log_batch_means(log_terms, nb), hypothesis, S)


def _pair_log_terms(a, b, m_idx, i, j):
    return ig2r_log_pdf(1.0, a[:, m_idx, i], a[:, m_idx, j], b[:, m_idx, i], b[:, m_idx, j])


def sddr_pair_identification(store: DrawStore, m: int, i: int, j: int, hyper: PriorHyperparameters | None = None,
                             n_batches: int | None = None) -> SddrResult:
    """Log Bayes factor for ``omega_{m,i} = omega_{m,j}`` in one state ``m >= 2``."""
    hyper = store.hyper if hyper is None else hyper
    a, b = _records(store)
    N = a.shape[2]
    i0, j0 = _check_eq(i, N), _check_eq(j, N)
    if i0 == j0:
        raise ValueError("a pair needs two different equations")
    if not 2 <= m <= a.shape[1] + 1:
        raise ValueError(f"state {m} outside 2..{a.shape[1] + 1}")
    terms = _pair_log_terms(a, b, m - 2, i0, j0)
    den = ig2r_log_pdf(1.0, hyper.a_omega, hyper.a_omega, hyper.b_omega, hyper.b_omega)
    return _sddr(np.asarray(terms), den, Hypothesis("pair", (int(i), int(j)), int(m)), n_batches)


def sddr_joint_identification(store: DrawStore, i: int, j: int, hyper: PriorHyperparameters | None = None,
                              n_batches: int | None = None) -> SddrResult:
    """Log Bayes factor for ``omega_{m,i} = omega_{m,j}`` in every state ``m >= 2``."""
    hyper = store.hyper if hyper is None else hyper
    a, b = _records(store)
    N = a.shape[2]
    i0, j0 = _check_eq(i, N), _check_eq(j, N)
    if i0 == j0:
        raise ValueError("a pair needs two different equations")
    terms = sum(_pair_log_terms(a, b, k, i0, j0) for k in range(a.shape[1]))
    den = a.shape[1] * ig2r_log_pdf(1.0, hyper.a_omega, hyper.a_omega, hyper.b_omega, hyper.b_omega)
    return _sddr(np.asarray(terms), den, Hypothesis("identification", (int(i), int(j))), n_batches)


def sddr_homoskedasticity(store: DrawStore, i: int, hyper: PriorHyperparameters | None = None,
                          n_batches: int | None = None) -> SddrResult:
    """Log Bayes factor for ``omega_{m,i} = 1`` in every state ``m >= 2``."""
    res = sddr_joint_homoskedasticity(store, [i], hyper, n_batches)
    return SddrResult(res.log_numerator, res.log_denominator, res.nse, Hypothesis("homoskedasticity", (int(i),)), res.n_draws)


def sddr_joint_homoskedasticity(store: DrawStore, equations, hyper: PriorHyperparameters | None = None,
                                n_batches: int | None = None) -> SddrResult:
    """Log Bayes factor for ``omega_{m,i} = 1`` for all ``m >= 2`` and all ``i`` in ``equations``."""
    hyper = store.hyper if hyper is None else hyper
    a, b = _records(store)
    N = a.shape[2]
    eqs = sorted({int(i) for i in equations})
    if not eqs:
        raise ValueError("equation set must be nonempty")
    idx = [_check_eq(i, N) for i in eqs]
    terms = ig2_log_pdf(1.0, a[:, :, idx], b[:, :, idx]).sum(axis=(1, 2))
    den = len(idx) * a.shape[1] * ig2_log_pdf(1.0, hyper.a_omega, hyper.b_omega)
    return _sddr(np.asarray(terms), den, Hypothesis("joint_homoskedasticity", tuple(eqs)), n_batches)


# --------------------------------------------------------------------------
# Marginal data density


@dataclass(frozen=True)
class MddResult:
    log_mdd: float
    nse: float
    c_O: float
    n_importance: int
    acceptance_fraction: float
    dimension: int = 0

    def to_dict(self) -> dict:
        return {
            "log_mdd": self.log_mdd,
            "nse": self.nse,
            "c_O": self.c_O,
            "n_importance": self.n_importance,
            "acceptance_fraction": self.acceptance_fraction,
            "dimension": self.dimension,
        }


@dataclass
class ParameterMap:
    """Transformation between model parameters and an unconstrained vector.

    Free blocks map as follows: ``alpha`` and ``A`` unchanged; ``lambda1``,
    ``omega`` and the shrinkage parameters through ``log``; each row of ``P``
    through additive log-ratios against its last entry.  Clamped blocks keep
    the value ``fixed``.
    """

    N: int
    K: int
    M: int
    r: int
    free: frozenset
    fixed: dict = field(default_factory=dict)

    def blocks(self) -> list[tuple[str, int]]:
        out = []
        if self.r and "alpha" in self.free:
            out.append(("alpha", self.r))
        if "A" in self.free:
            out.append(("A", self.N * self.K))
        if "lambda1" in self.free:
            out.append(("lambda1", self.N))
        if self.M > 1 and "omega" in self.free:
            out.append(("omega", (self.M - 1) * self.N))
        if self.M > 1 and "transition" in self.free:
            out.append(("P", self.M * (self.M - 1)))
        if "shrinkage" in self.free:
            out.append(("gammas", 3 if self.r else 2))
        return out

    @property
    def dim(self) -> int:
        return sum(n for _, n in self.blocks())

    def forward(self, draws: dict) -> np.ndarray:
        """Stack free blocks of batched natural parameters into ``J x dim``."""
        J = draws["lambda1"].shape[0]
        cols = []
        for name, n in self.blocks():
            x = draws[name]
            if name == "P":
                x = np.log(x[:, :, :-1]) - np.log(x[:, :, -1:])
            elif name == "gammas":
                x = np.log(x if self.r else x[:, 1:])
            elif name in ("lambda1", "omega"):
                x = np.log(x)
            cols.append(x.reshape(J, n))
        return np.concatenate(cols, axis=1) if cols else np.zeros((J, 0))

    def inverse(self, z: np.ndarray) -> tuple[dict, np.ndarray]:
        """Natural parameters from ``J x dim`` coordinates plus ``log |d theta / d z|``."""
        J = z.shape[0]
        out = {k: np.broadcast_to(v, (J, *np.shape(v))).copy() for k, v in self.fixed.items()}
        log_jac = np.zeros(J)
        pos = 0
        for name, n in self.blocks():
            x = z[:, pos : pos + n]
            pos += n
            if name == "alpha":
                out["alpha"] = x.copy()
            elif name == "A":
                out["A"] = x.reshape(J, self.N, self.K)
            elif name in ("lambda1", "omega"):
                out[name] = np.exp(x).reshape(J, -1, self.N) if name == "omega" else np.exp(x)
                log_jac += x.sum(axis=1)
            elif name == "P":
                logits = np.concatenate([x.reshape(J, self.M, self.M - 1), np.zeros((J, self.M, 1))], axis=2)
                logP = logits - logsumexp(logits, axis=2, keepdims=True)
                out["P"] = np.exp(logP)
                log_jac += logP.sum(axis=(1, 2))
            elif name == "gammas":
                g = np.exp(x)
                if not self.r:
                    g = np.concatenate([out["gammas"][:, :1], g], axis=1)
                out["gammas"] = g
                log_jac += x.sum(axis=1)
        return out, log_jac


def _natural_draws(store: DrawStore) -> dict:
    return {
        "alpha": store.pooled("alpha"),
        "A": store.pooled("A"),
        "lambda1": store.pooled("lambda1"),
        "omega": store.pooled("omega"),
        "P": store.pooled("P"),
        "gammas": store.pooled("gammas"),
    }


def parameter_map(store: DrawStore) -> ParameterMap:
    N, M = store.N, store.M
    scheme = store.scheme
    fixed_blocks = set(store.config.fixed_blocks)
    free = frozenset({"alpha", "A", "lambda1", "omega", "transition", "shrinkage"} - fixed_blocks)
    draws = _natural_draws(store)
    fixed = {k: v[0] for k, v in draws.items()}
    K = draws["A"].shape[2]
    return ParameterMap(N, K, M, scheme.r, free, fixed)


def _log_prior_free(nat: dict, pmap: ParameterMap, scheme: RestrictionScheme, hyper: PriorHyperparameters) -> np.ndarray:
    A0 = (nat["alpha"] @ scheme.Q.T + scheme.q).reshape(-1, pmap.N, pmap.N).transpose(0, 2, 1)
    terms = prior_terms(nat["alpha"], nat["A"], A0, nat["lambda1"], nat["omega"], nat["P"], nat["gammas"], hyper)
    keys = []
    for name, _ in pmap.blocks():
        keys += {
            "alpha": ["alpha"],
            "A": ["mu", "beta"],
            "lambda1": ["lambda1"],
            "omega": ["omega"],
            "P": ["P"],
            "gammas": ["gamma_alpha", "gamma_mu", "gamma_beta"] if pmap.r else ["gamma_mu", "gamma_beta"],
        }[name]
    total = np.zeros(A0.shape[0])
    for k in keys:
        total = total + terms[k]
    return total


def _marginal_loglik(nat: dict, pmap: ParameterMap, scheme: RestrictionScheme, design) -> np.ndarray:
    J = nat["A"].shape[0]
    N, M = pmap.N, pmap.M
    A0 = np.ascontiguousarray((nat["alpha"] @ scheme.Q.T + scheme.q).reshape(J, N, N).transpose(0, 2, 1))
    lam1 = nat["lambda1"]
    lambdas = np.concatenate([lam1[:, None, :], lam1[:, None, :] * nat["omega"].reshape(J, M - 1, N)], axis=1)
    P = np.ascontiguousarray(nat["P"])
    inits = np.empty((J, M))
    for j in range(J):
        try:
            inits[j] = ergodic_distribution(P[j])
        except Exception:  # noqa: BLE001 - reducible proposals get zero likelihood
            inits[j] = np.nan
    out = _kernels.marginal_loglik_batch(
        A0, np.ascontiguousarray(nat["A"]), np.ascontiguousarray(lambdas), P, inits,
        np.ascontiguousarray(design.Y), np.ascontiguousarray(design.X),
    )
    return np.where(np.isfinite(out), out, -np.inf)


def _regularised_cholesky(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        jitter = 1e-8 * np.trace(cov) / cov.shape[0]
        return np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))


def estimate_mdd(
    store: DrawStore,
    data: TimeSeriesData,
    scheme: RestrictionScheme | None = None,
    hyper: PriorHyperparameters | None = None,
    n_importance: int = MDD_DRAWS,
    rng: np.random.Generator | None = None,
    n_batches: int | None = None,
) -> MddResult:
    """Log marginal likelihood by the corrected arithmetic mean estimator.

    The likelihood sums the hidden states out with the forward filter.  The
    high-likelihood region is ``{theta : log p(Y | theta) >= c_O}`` with
    ``c_O`` the smallest log likelihood among the posterior draws; its posterior
    probability is taken as one.  Importance draws come from a normal fitted to
    the posterior draws in the coordinates of :class:`ParameterMap`.
    """
    scheme = store.scheme if scheme is None else scheme
    hyper = store.hyper if hyper is None else hyper
    rng = np.random.default_rng() if rng is None else rng
    design = build_design(data, int(store.metadata["p"]))
    pmap = parameter_map(store)
    post = _natural_draws(store)
    c_O = float(np.min(store.pooled("loglik_marginal")))
    if not np.isfinite(c_O):
        raise ValueError("posterior draws contain a non-finite log likelihood")
    d = pmap.dim
    if d == 0:
        nat, _ = pmap.inverse(np.zeros((1, 0)))
        ll = float(_marginal_loglik(nat, pmap, scheme, design)[0])
        return MddResult(ll, 0.0, c_O, n_importance, 1.0, 0)
    z_post = pmap.forward(post)
    mean = z_post.mean(axis=0)
    cov = np.atleast_2d(np.cov(z_post, rowvar=False))
    L = _regularised_cholesky(cov)
    eps = rng.standard_normal((n_importance, d))
    z = mean + eps @ L.T
    log_s = -0.5 * np.sum(eps * eps, axis=1) - 0.5 * d * np.log(2 * np.pi) - np.sum(np.log(np.diag(L)))
    nat, log_jac = pmap.inverse(z)
    ll = _marginal_loglik(nat, pmap, scheme, design)
    with np.errstate(invalid="ignore"):
        log_w = ll + _log_prior_free(nat, pmap, scheme, hyper) + log_jac - log_s
    inside = (ll >= c_O) & np.isfinite(log_w)
    if not np.any(inside):
        raise NoDrawsInRegionError(
            f"none of {n_importance} importance draws reached log likelihood {c_O:.3f}; increase the number of draws"
        )
    log_terms = np.where(inside, log_w, -np.inf)
    log_mdd = float(logsumexp(log_terms) - np.log(n_importance))
    nb = default_batches(n_importance, MDD_BATCHES) if n_batches is None else n_batches
    nse = nse_log_batch_means(log_terms, nb)
    return MddResult(log_mdd, nse, c_O, n_importance, float(inside.mean()), d)


# --------------------------------------------------------------------------
# Summaries


def structural_matrices(store: DrawStore) -> np.ndarray:
    """Pooled ``A0`` draws, ``S x N x N``."""
    scheme = store.scheme
    alpha = store.pooled("alpha")
    N = scheme.N
    return (alpha @ scheme.Q.T + scheme.q).reshape(-1, N, N).transpose(0, 2, 1)


def posterior_lambdas_mean(store: DrawStore) -> np.ndarray:
    return store.lambdas().mean(axis=0)


def equation_order(store: DrawStore, position: int, state: int = 2) -> np.ndarray:
    """Permutation moving the equation with the largest mean relative variance in ``state`` to ``position``.

    Both arguments are 1-based.  Returned indices are 0-based; use them to
    reorder variables before re-estimating an unrestricted model.
    """
    omega = store.pooled("omega")[:, state - 2, :].mean(axis=0)
    N = omega.size
    top = int(np.argmax(omega))
    rest = [k for k in range(N) if k != top]
    rest.insert(position - 1, top)
    return np.array(rest)


def reorder_equations(A0, A, lambdas, order):
    """Permute structural equations and restore the unit diagonal.

    Row ``k`` of the result is row ``order[k]`` of the input, divided by its new
    diagonal element; variances scale by the square of that factor.
    """
    order = np.asarray(order)
    A0p = np.asarray(A0)[..., order, :]
    Ap = np.asarray(A)[..., order, :]
    lamp = np.asarray(lambdas)[..., order]
    d = np.diagonal(A0p, axis1=-2, axis2=-1)
    if np.any(np.abs(d) < 1e-12):
        raise ValueError("reordering puts a zero on the diagonal of A0")
    return A0p / d[..., :, None], Ap / d[..., :, None], lamp / (d[..., None, :] ** 2)
