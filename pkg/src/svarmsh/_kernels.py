"""Compiled inner loops for the hidden Markov chain.

Randomness never originates here: callers pass uniforms drawn from their
numpy ``Generator`` so sampling stays a deterministic function of the seed.
"""

from __future__ import annotations

import numpy as np
from numba import njit

LOG_2PI = np.log(2.0 * np.pi)


@njit(cache=True)
def forward_filter(log_emission, P, init):
    """Hamilton filter in log space with per-period normalisation.

    ``log_emission[t, m]`` is ``log p(y_t | s_t = m)``; ``init`` is the
    distribution of the first state.  Returns filtered probabilities
    ``p(s_t | y_1..y_t)`` and ``log p(y_1..y_T)``.
    """
    T, M = log_emission.shape
    filt = np.empty((T, M))
    pred = init.copy()
    loglik = 0.0
    for t in range(T):
        mx = log_emission[t, 0]
        for m in range(1, M):
            if log_emission[t, m] > mx:
                mx = log_emission[t, m]
        tot = 0.0
        for m in range(M):
            v = pred[m] * np.exp(log_emission[t, m] - mx)
            filt[t, m] = v
            tot += v
        if tot <= 0.0 or not np.isfinite(tot):
            return filt, -np.inf
        loglik += mx + np.log(tot)
        for m in range(M):
            filt[t, m] /= tot
        for j in range(M):
            acc = 0.0
            for i in range(M):
                acc += filt[t, i] * P[i, j]
            pred[j] = acc
    return filt, loglik


@njit(cache=True)
def backward_sample(filt, P, uniforms):
    """Draw ``s_T`` from the last filtered distribution, then ``s_t | s_{t+1}`` backwards."""
    T, M = filt.shape
    s = np.empty(T, dtype=np.int64)
    w = np.empty(M)
    for t in range(T - 1, -1, -1):
        tot = 0.0
        for m in range(M):
            if t == T - 1:
                w[m] = filt[t, m]
            else:
                w[m] = filt[t, m] * P[m, s[t + 1]]
            tot += w[m]
        u = uniforms[t] * tot
        cum = 0.0
        k = M - 1
        for m in range(M):
            cum += w[m]
            if u < cum:
                k = m
                break
        s[t] = k
    return s


@njit(cache=True)
def log_emission(U, lambdas, log_abs_det):
    """``log p(y_t | s_t = m)`` from structural residuals ``U`` (N x T) and state variances (M x N)."""
    N, T = U.shape
    M = lambdas.shape[0]
    out = np.empty((T, M))
    const = np.empty(M)
    for m in range(M):
        c = log_abs_det - 0.5 * N * LOG_2PI
        for n in range(N):
            c -= 0.5 * np.log(lambdas[m, n])
        const[m] = c
    for t in range(T):
        for m in range(M):
            acc = const[m]
            for n in range(N):
                acc -= 0.5 * U[n, t] * U[n, t] / lambdas[m, n]
            out[t, m] = acc
    return out


@njit(cache=True)
def marginal_loglik_batch(A0s, As, lambdas, Ps, inits, Y, X):
    """Forward-filter log likelihood for a batch of parameter draws."""
    J = A0s.shape[0]
    out = np.empty(J)
    for j in range(J):
        sign, logdet = np.linalg.slogdet(A0s[j])
        if sign == 0.0 or not np.isfinite(logdet):
            out[j] = -np.inf
            continue
        U = A0s[j] @ Y - As[j] @ X
        le = log_emission(U, lambdas[j], logdet)
        _, ll = forward_filter(le, Ps[j], inits[j])
        out[j] = ll
    return out
