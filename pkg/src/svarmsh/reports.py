"""Report tables built from a draw store.

Each table is a ``(header, rows)`` pair.  :func:`svarmsh.config.csv_text`
renders it losslessly; :func:`render_text` gives a rounded human-readable view.
"""

from __future__ import annotations

import numpy as np

from .gibbs import DrawStore
from .identification import IdentificationReport
from .inference import (
    MddResult,
    SddrResult,
    default_batches,
    nse_batch_means,
    structural_matrices,
)

SUMMARY_HEADER = ["parameter", "mean", "sd", "nse", "q05", "q50", "q95"]

EVIDENCE_LEGEND = (
    "log Bayes factor in favour of the restriction: "
    "> 0 supports it; below -1 positive, below -3 strong, below -5 very strong evidence against"
)


def parameter_draws(store: DrawStore) -> list[tuple[str, np.ndarray]]:
    """Named scalar series for every model parameter (pooled over chains)."""
    scheme = store.scheme
    out = []
    alpha = store.pooled("alpha")
    for k, lab in enumerate(scheme.labels):
        out.append((f"A0:{lab}", alpha[:, k]))
    A = store.pooled("A")
    N, K = A.shape[1:]
    p = (K - 1) // N
    for n in range(N):
        out.append((f"mu[{n + 1}]", A[:, n, 0]))
    for lag in range(p):
        for n in range(N):
            for j in range(N):
                out.append((f"A{lag + 1}[{n + 1},{j + 1}]", A[:, n, 1 + lag * N + j]))
    lam1 = store.pooled("lambda1")
    for n in range(N):
        out.append((f"lambda1[{n + 1}]", lam1[:, n]))
    omega = store.pooled("omega")
    for m in range(omega.shape[1]):
        for n in range(N):
            out.append((f"omega[{m + 2},{n + 1}]", omega[:, m, n]))
    P = store.pooled("P")
    M = P.shape[1]
    if M > 1:
        for i in range(M):
            for j in range(M):
                out.append((f"P[{i + 1},{j + 1}]", P[:, i, j]))
    g = store.pooled("gammas")
    for k, name in enumerate(("gamma_alpha", "gamma_mu", "gamma_beta")):
        if name == "gamma_alpha" and scheme.r == 0:
            continue
        out.append((name, g[:, k]))
    return out


def posterior_summary(store: DrawStore) -> tuple[list[str], list[list]]:
    """Posterior mean, sd, NSE of the mean and 5/50/95% quantiles per parameter."""
    rows = []
    for name, x in parameter_draws(store):
        nb = default_batches(x.size, 2000)
        nse = nse_batch_means(x, nb) if x.size >= 20 else float("nan")
        q = np.quantile(x, [0.05, 0.5, 0.95])
        rows.append([name, float(x.mean()), float(x.std(ddof=1)) if x.size > 1 else 0.0, nse, *map(float, q)])
    return SUMMARY_HEADER, rows


def relative_variance_table(store: DrawStore) -> tuple[list[str], list[list]] | None:
    """Posterior mean and sd of every relative variance, one row per equation; ``None`` when ``M = 1``."""
    omega = store.pooled("omega")
    if omega.shape[1] == 0:
        return None
    header = ["equation"]
    for m in range(omega.shape[1]):
        header += [f"omega[{m + 2}]_mean", f"omega[{m + 2}]_sd"]
    names = store.metadata.get("variables") or [f"y{n + 1}" for n in range(omega.shape[2])]
    rows = []
    for n in range(omega.shape[2]):
        row = [names[n]]
        for m in range(omega.shape[1]):
            row += [float(omega[:, m, n].mean()), float(omega[:, m, n].std(ddof=1))]
        rows.append(row)
    return header, rows


def state_probability_table(store: DrawStore) -> tuple[list[str], list[list]]:
    """Smoothed ``P(s_t = m | Y)`` for every period, averaged over retained draws."""
    probs = store.state_probs()
    header = ["t"] + [f"state{m + 1}" for m in range(probs.shape[1])]
    return header, [[t + 1, *map(float, row)] for t, row in enumerate(probs)]


def a0_table(store: DrawStore) -> tuple[list[str], list[list]]:
    """Posterior mean of the structural matrix."""
    mean = structural_matrices(store).mean(axis=0)
    N = mean.shape[0]
    names = store.metadata.get("variables") or [f"y{n + 1}" for n in range(N)]
    return ["equation", *names], [[names[n], *map(float, mean[n])] for n in range(N)]


def sddr_table(results: list[SddrResult]) -> tuple[list[str], list[list]]:
    header = ["hypothesis", "log_sddr", "nse", "log_numerator", "log_denominator", "n_draws"]
    rows = [[r.hypothesis.label(), r.log_sddr, r.nse, r.log_numerator, r.log_denominator, r.n_draws] for r in results]
    return header, rows


def identification_matrix(results: list[SddrResult], N: int) -> tuple[list[str], list[list]]:
    """Upper-triangular grid of joint identification log SDDRs (row ``i``, column ``j > i``)."""
    grid = [["" for _ in range(N)] for _ in range(N)]
    for r in results:
        if r.hypothesis.kind == "identification":
            i, j = sorted(r.hypothesis.equations)
            grid[i - 1][j - 1] = r.log_sddr
    return ["equation", *[str(j + 1) for j in range(N)]], [[str(i + 1), *grid[i]] for i in range(N)]


def mdd_table(names: list[str], results: list[MddResult]) -> tuple[list[str], list[list]]:
    """One row per scheme; the largest log MDD is flagged."""
    best = int(np.argmax([r.log_mdd for r in results]))
    header = ["scheme", "log_mdd", "nse", "c_O", "acceptance_fraction", "n_importance", "max"]
    rows = [
        [n, r.log_mdd, r.nse, r.c_O, r.acceptance_fraction, r.n_importance, "*" if k == best else ""]
        for k, (n, r) in enumerate(zip(names, results))
    ]
    return header, rows


def identification_dict(report: IdentificationReport, names, sddr: list[SddrResult] | None = None) -> dict:
    d = report.to_dict()
    d["variables"] = list(names)
    if sddr is not None:
        d["sddr_cross_reference"] = [r.to_dict() for r in sddr]
    return d


def render_text(header, rows, digits: int = 4) -> str:
    """Fixed-width table with rounded numbers."""

    def fmt(v):
        if isinstance(v, (float, np.floating)):
            return f"{v:.{digits}f}" if np.isfinite(v) else str(v)
        return str(v)

    cells = [list(map(str, header))] + [[fmt(v) for v in row] for row in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
