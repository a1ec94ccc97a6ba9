"""Uniqueness of the rows of ``A0`` from heteroskedasticity.

:func:`check_identification` applies the relative-variance condition: row
``k`` is unique when its vector of variances relative to state 1 differs from
that of every other row.  The condition is sufficient, so a row that fails it
is reported as "not established" rather than "not identified".

:func:`brute_force_alternatives` searches numerically for every unit-diagonal
``A0`` compatible with a set of reduced-form covariances.  Any two
decompositions differ by an orthogonal rotation of the Cholesky factor of the
first covariance, so minimising the off-diagonal mass of the rotated
covariances over rotations finds all of them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize

from .errors import SingularMatrixError

NO_HETEROSKEDASTICITY = "no heteroskedasticity: a single volatility state"


@dataclass(frozen=True)
class RelativeVarianceProfile:
    """``omega[i]`` holds ``(lambda_{2,i}/lambda_{1,i}, ..., lambda_{M,i}/lambda_{1,i})``."""

    omega: np.ndarray  # N x (M-1)
    tolerance: float = 1e-6

    @classmethod
    def from_lambdas(cls, lambda_matrix, tolerance: float = 1e-6) -> "RelativeVarianceProfile":
        lam = np.asarray(lambda_matrix, dtype=float)
        if lam.ndim != 2 or np.any(lam <= 0):
            raise ValueError("lambda matrix must be M x N with positive entries")
        return cls((lam[1:] / lam[0]).T, tolerance)

    def equal(self, i: int, j: int) -> bool:
        a, b = self.omega[i], self.omega[j]
        return bool(np.all(np.abs(a - b) <= self.tolerance * np.maximum(np.abs(a), np.abs(b))))


@dataclass(frozen=True)
class IdentificationReport:
    row_unique: tuple[bool, ...]
    globally_unique: bool
    colliding_pairs: tuple[tuple[int, int], ...]
    reason: str | None = None
    omega: np.ndarray | None = field(default=None, compare=False)

    def verdicts(self) -> list[str]:
        return ["unique" if u else "not established" for u in self.row_unique]

    def to_dict(self) -> dict:
        return {
            "row_unique": list(self.row_unique),
            "verdicts": self.verdicts(),
            "globally_unique": self.globally_unique,
            "colliding_pairs": [[i + 1, j + 1] for i, j in self.colliding_pairs],
            "reason": self.reason,
            "relative_variances": None if self.omega is None else self.omega.tolist(),
        }


def check_identification(lambda_matrix, tol: float = 1e-6) -> IdentificationReport:
    """Row-wise uniqueness verdicts from state variances (``M x N``).

    Pairs are 0-based ``(i, j)`` with ``i < j``.
    """
    lam = np.asarray(lambda_matrix, dtype=float)
    if lam.ndim != 2 or np.any(lam <= 0):
        raise ValueError("lambda matrix must be M x N with positive entries")
    M, N = lam.shape
    pairs_all = tuple(combinations(range(N), 2))
    if M < 2:
        return IdentificationReport((False,) * N, False, pairs_all, NO_HETEROSKEDASTICITY, np.zeros((N, 0)))
    prof = RelativeVarianceProfile.from_lambdas(lam, tol)
    colliding = tuple((i, j) for i, j in pairs_all if prof.equal(i, j))
    clash = set(k for pair in colliding for k in pair)
    row_unique = tuple(k not in clash for k in range(N))
    return IdentificationReport(row_unique, not colliding, colliding, None, prof.omega)


def _implied(A0, lambda_matrix):
    inv = np.linalg.inv(A0)
    return [(inv * lam) @ inv.T for lam in np.asarray(lambda_matrix, dtype=float)]


def verify_decomposition(A0, lambda_matrix, sigmas, tol: float = 1e-6) -> bool:
    """True when ``A0^-1 diag(lambda_m) A0^-T`` reproduces every ``sigma_m``.

    The error for state ``m`` is the largest absolute elementwise deviation
    divided by the largest absolute entry of ``sigma_m``.
    """
    A0 = np.asarray(A0, dtype=float)
    if not np.allclose(np.diag(A0), 1.0):
        raise ValueError("A0 must have a unit diagonal")
    sign, _ = np.linalg.slogdet(A0)
    if sign == 0:
        raise SingularMatrixError("A0 is singular")
    sigmas = [np.asarray(s, dtype=float) for s in sigmas]
    for s in sigmas:
        if not np.allclose(s, s.T, rtol=1e-12, atol=1e-12 * np.max(np.abs(s))):
            raise ValueError("covariance matrices must be symmetric")
    if len(sigmas) != np.shape(lambda_matrix)[0]:
        raise ValueError("one covariance per state required")
    for s, imp in zip(sigmas, _implied(A0, lambda_matrix)):
        if np.max(np.abs(imp - s)) / np.max(np.abs(s)) > tol:
            return False
    return True


def givens_rotation(angles: np.ndarray, n: int) -> np.ndarray:
    """Product of Givens rotations, one angle per pair ``i < j``; covers SO(n)."""
    Q = np.eye(n)
    for theta, (i, j) in zip(angles, combinations(range(n), 2)):
        c, s = np.cos(theta), np.sin(theta)
        G = np.eye(n)
        G[i, i] = G[j, j] = c
        G[i, j] = -s
        G[j, i] = s
        Q = Q @ G
    return Q


@dataclass
class SearchResult:
    """Solutions found by :func:`brute_force_alternatives` and per-start diagnostics."""

    solutions: list[np.ndarray]
    lambdas: list[np.ndarray]
    converged: list[bool]
    objective: list[float]

    def __len__(self):
        return len(self.solutions)

    def __iter__(self):
        return iter(self.solutions)

    def __getitem__(self, k):
        return self.solutions[k]


def brute_force_alternatives(
    sigmas,
    omega=None,
    n_starts: int = 64,
    tol: float = 1e-6,
    rng: np.random.Generator | None = None,
) -> SearchResult:
    """Multi-start search for unit-diagonal ``A0`` with ``sigma_m = A0^-1 Lambda_m A0^-T``.

    ``omega`` (``N x (M-1)``, optional) fixes which relative-variance profile
    belongs to which equation, as in the uniqueness statement; candidate rows
    are then ordered to match it and candidates that cannot be matched are
    dropped.  Without it rows are ordered by ascending profile.  Intended for
    small systems (``N <= 4``).
    """
    rng = np.random.default_rng() if rng is None else rng
    sigmas = [np.asarray(s, dtype=float) for s in sigmas]
    n = sigmas[0].shape[0]
    C = np.linalg.cholesky(sigmas[0])
    Cinv = np.linalg.inv(C)
    rotated = [Cinv @ s @ Cinv.T for s in sigmas[1:]]
    n_angles = n * (n - 1) // 2
    off = ~np.eye(n, dtype=bool)
    scale = sum(np.sum(w * w) for w in rotated) or 1.0

    def objective(angles):
        Q = givens_rotation(angles, n)
        return sum(np.sum((Q.T @ w @ Q)[off] ** 2) for w in rotated) / scale

    target = None if omega is None else np.asarray(omega, dtype=float).reshape(n, -1)
    solutions: list[np.ndarray] = []
    lambdas: list[np.ndarray] = []
    converged: list[bool] = []
    objectives: list[float] = []
    for _ in range(n_starts):
        x0 = rng.uniform(-np.pi, np.pi, size=n_angles)
        res = minimize(objective, x0, method="BFGS", options={"gtol": 1e-12})
        objectives.append(float(res.fun))
        ok = bool(res.fun < tol * tol)
        converged.append(ok)
        if not ok:
            continue
        Q = givens_rotation(res.x, n)
        delta = np.array([np.diag(Q.T @ w @ Q) for w in rotated]).T  # n x (M-1)
        if np.any(delta <= 0):
            continue
        if target is not None:
            cost = np.abs(np.log(delta)[:, None, :] - np.log(target)[None, :, :]).max(-1)
            cols, rows = linear_sum_assignment(cost)
            if cost[cols, rows].max() > max(1e3 * tol, 1e-4):
                continue
            order = np.empty(n, dtype=int)
            order[rows] = cols
        else:
            order = np.lexsort(delta.T[::-1])
        B = (Q.T @ Cinv)[order]  # rows are candidate structural equations (up to scale)
        d = np.diag(B)
        if np.any(np.abs(d) < 1e-8 * np.abs(B).max()):
            continue
        A0 = B / d[:, None]
        lam1 = 1.0 / d**2
        lam = np.vstack([lam1, lam1 * delta[order].T])
        if not verify_decomposition(A0, lam, sigmas, tol=max(100 * tol, 1e-8)):
            continue
        if any(np.linalg.norm(A0 - prev) < 100 * tol for prev in solutions):
            continue
        solutions.append(A0)
        lambdas.append(lam)
    return SearchResult(solutions, lambdas, converged, objectives)
