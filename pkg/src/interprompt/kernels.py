"""Numeric hot loops: token-sequence LCS and the toy model's loss/gradient.

Each kernel has a numba implementation (``*_jit``) and a numpy implementation
(``*_np``). The public names bind to one of them at import time according to
:data:`interprompt._accel.USE_NUMBA`.
"""

from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# Longest common subsequence length
# ---------------------------------------------------------------------------


@njit(cache=True)
def lcs_length_jit(a, b):
    n = a.shape[0]
    m = b.shape[0]
    if n == 0 or m == 0:
        return 0
    prev = np.zeros(m + 1, dtype=np.int64)
    cur = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        ai = a[i - 1]
        for j in range(1, m + 1):
            if ai == b[j - 1]:
                cur[j] = prev[j - 1] + 1
            elif prev[j] >= cur[j - 1]:
                cur[j] = prev[j]
            else:
                cur[j] = cur[j - 1]
        prev, cur = cur, prev
    return prev[m]


def lcs_length_np(a, b):
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.size == 0 or b.size == 0:
        return 0
    prev = np.zeros(b.size + 1, dtype=np.int64)
    for ai in a:
        # L[i][j] = max_{k<=j} max(L[i-1][k], L[i-1][k-1] + [a_i == b_k])
        step = np.maximum(prev[1:], prev[:-1] + (b == ai))
        prev = np.concatenate(([0], np.maximum.accumulate(step)))
    return int(prev[-1])


# ---------------------------------------------------------------------------
# Toy model: span-conditioned bigram logits plus a bag-of-prompt term
#
#   logits_t = W[span_t, prev_t] + bags[rec_t] @ U[span_t]
#
# W, U: (n_spans, V, V); bags: (R, V); per-token index arrays of length N.
# ---------------------------------------------------------------------------


def _bag_logits_np(U, bags):
    # (R, S, V): contribution of each record's prompt to each span's logits
    return np.einsum("ru,suv->rsv", bags, U)


def toy_log_probs_np(W, U, bags, rec, span, prev):
    logits = W[span, prev] + _bag_logits_np(U, bags)[rec, span]
    logits -= logits.max(axis=1, keepdims=True)
    return logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))


def toy_loss_grad_np(W, U, bags, rec, span, prev, nxt, weights):
    """Weighted NLL ``-sum_t w_t log p_t[nxt_t]`` and its gradient wrt W and U."""
    logp = toy_log_probs_np(W, U, bags, rec, span, prev)
    n = nxt.shape[0]
    picked = logp[np.arange(n), nxt]
    loss = float(-(weights * picked).sum())

    g = np.exp(logp)
    g[np.arange(n), nxt] -= 1.0
    g *= weights[:, None]

    dW = np.zeros_like(W)
    np.add.at(dW, (span, prev), g)
    per_rs = np.zeros((bags.shape[0], W.shape[0], W.shape[2]))
    np.add.at(per_rs, (rec, span), g)
    dU = np.einsum("ru,rsv->suv", bags, per_rs)
    return loss, dW, dU


@njit(cache=True)
def _bag_logits_jit(U, bags):
    S, V, _ = U.shape
    R = bags.shape[0]
    out = np.zeros((R, S, V))
    for r in range(R):
        for u in range(V):
            x = bags[r, u]
            if x == 0.0:
                continue
            for s in range(S):
                for v in range(V):
                    out[r, s, v] += x * U[s, u, v]
    return out


@njit(cache=True)
def toy_log_probs_jit(W, U, bags, rec, span, prev):
    V = W.shape[2]
    n = rec.shape[0]
    bl = _bag_logits_jit(U, bags)
    out = np.empty((n, V))
    for t in range(n):
        s = span[t]
        mx = -np.inf
        for v in range(V):
            z = W[s, prev[t], v] + bl[rec[t], s, v]
            out[t, v] = z
            if z > mx:
                mx = z
        tot = 0.0
        for v in range(V):
            tot += np.exp(out[t, v] - mx)
        lse = mx + np.log(tot)
        for v in range(V):
            out[t, v] -= lse
    return out


@njit(cache=True)
def toy_loss_grad_jit(W, U, bags, rec, span, prev, nxt, weights):
    S, V, _ = W.shape
    R = bags.shape[0]
    n = rec.shape[0]
    logp = toy_log_probs_jit(W, U, bags, rec, span, prev)
    dW = np.zeros_like(W)
    per_rs = np.zeros((R, S, V))
    loss = 0.0
    for t in range(n):
        w = weights[t]
        s = span[t]
        loss -= w * logp[t, nxt[t]]
        for v in range(V):
            g = np.exp(logp[t, v])
            if v == nxt[t]:
                g -= 1.0
            g *= w
            dW[s, prev[t], v] += g
            per_rs[rec[t], s, v] += g
    dU = np.zeros_like(U)
    for r in range(R):
        for u in range(V):
            x = bags[r, u]
            if x == 0.0:
                continue
            for s in range(S):
                for v in range(V):
                    dU[s, u, v] += x * per_rs[r, s, v]
    return loss, dW, dU


if USE_NUMBA:
    _lcs_impl = lcs_length_jit
    toy_log_probs = toy_log_probs_jit
    toy_loss_grad = toy_loss_grad_jit
else:
    _lcs_impl = lcs_length_np
    toy_log_probs = toy_log_probs_np
    toy_loss_grad = toy_loss_grad_np


def lcs_length(a, b) -> int:
    """Length of the longest common subsequence of two integer id sequences."""
    return int(_lcs_impl(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)))


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
