"""Pure-numpy lattice kernels.

Same signatures as the compiled ``_kernels`` module; used when the
extension is not built.  Everything is in log space and ``-inf`` encodes
probability zero.
"""

import numpy as np

NEG_INF = -np.inf


def _lse(a, b):
    # elementwise log(exp(a) + exp(b)) that maps (-inf, -inf) to -inf
    m = np.maximum(a, b)
    finite = np.isfinite(m)
    out = np.full(np.broadcast(a, b).shape, NEG_INF)
    out[finite] = m[finite] + np.log(
        np.exp(np.broadcast_to(a, out.shape)[finite] - m[finite])
        + np.exp(np.broadcast_to(b, out.shape)[finite] - m[finite])
    )
    return out


def ctl_lattice(log_eps, log_delta, max_block, want_grad=True):
    """Forward-backward over the CTL label lattice.

    ``log_eps``: (F,) log probability of no boundary per frame.
    ``log_delta``: (F, K) log odds of the k-th target label at each frame.
    ``max_block``: (K + 1,) int, longest block of labels that may end at
    state i (zero for i = 0).

    Returns ``(log_p, occ)`` where ``occ[t, k]`` is d log P / d delta_t(l_k)
    summed over every block containing position k.  ``occ`` is None when
    ``want_grad`` is false or P = 0.
    """
    log_eps = np.asarray(log_eps, dtype=np.float64)
    log_delta = np.asarray(log_delta, dtype=np.float64)
    F, K = log_delta.shape
    max_block = np.asarray(max_block, dtype=np.int64)
    jmax = int(max_block.max()) if K else 0

    la = np.full((F + 1, K + 1), NEG_INF)
    la[0, 0] = 0.0
    for t in range(1, F + 1):
        ld = log_delta[t - 1]
        acc = la[t - 1].copy()
        w = np.zeros(K + 1)
        for j in range(1, jmax + 1):
            # w[i] = sum of log delta over positions i-j .. i-1
            w[j:] += ld[: K + 1 - j]
            cand = np.full(K + 1, NEG_INF)
            cand[j:] = la[t - 1, : K + 1 - j] + w[j:]
            cand[max_block < j] = NEG_INF
            acc = _lse(acc, cand)
        la[t] = acc + log_eps[t - 1]
    log_p = float(la[F, K])
    if not want_grad or log_p == NEG_INF:
        return log_p, None

    lb = np.full((F + 1, K + 1), NEG_INF)
    lb[F, K] = 0.0
    for t in range(F, 0, -1):
        ld = log_delta[t - 1]
        acc = lb[t].copy()
        w = np.zeros(K + 1)
        for j in range(1, jmax + 1):
            # w[i'] = sum of log delta over positions i' .. i'+j-1
            w[: K + 1 - j] += ld[j - 1 :]
            cand = np.full(K + 1, NEG_INF)
            cand[: K + 1 - j] = lb[t, j:] + w[: K + 1 - j]
            cand[: K + 1 - j][max_block[j:] < j] = NEG_INF
            acc = _lse(acc, cand)
        lb[t - 1] = acc + log_eps[t - 1]

    occ = np.zeros((F, K))
    for t in range(1, F + 1):
        ld = log_delta[t - 1]
        for j in range(1, jmax + 1):
            n_start = K + 1 - j
            if n_start <= 0:
                break
            starts = np.arange(n_start)
            ok = max_block[starts + j] >= j
            base = la[t - 1, :n_start] + lb[t, j:] + log_eps[t - 1] - log_p
            base = np.where(ok, base, NEG_INF)
            for r in range(j):
                ex = base.copy()
                for m in range(j):
                    if m != r:
                        ex = ex + ld[starts + m]
                np.add.at(occ[t - 1], starts + r, np.exp(ex))
    return log_p, occ


def ctc_lattice(log_q, labels, want_grad=True):
    """Blank-augmented CTC forward-backward; blank is symbol 0.

    ``log_q``: (T, S) log symbol probabilities.  ``labels``: (K,) symbol
    indices in 1..S-1.  Returns ``(log_p, grad)`` with ``grad[t, s]`` equal
    to d log P / d q_t(s).
    """
    log_q = np.asarray(log_q, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    T, S = log_q.shape
    K = labels.shape[0]
    U = 2 * K + 1
    ext = np.zeros(U, dtype=np.int64)
    ext[1::2] = labels
    skip = np.zeros(U, dtype=bool)
    if K > 1:
        skip[3::2] = labels[1:] != labels[:-1]

    # pre[t, u]: log prob of reaching state u at frame t before emitting at t
    pre = np.full((T, U), NEG_INF)
    la = np.full((T, U), NEG_INF)
    pre[0, 0] = 0.0
    if U > 1:
        pre[0, 1] = 0.0
    la[0] = pre[0] + log_q[0, ext]
    for t in range(1, T):
        prev = la[t - 1]
        acc = prev.copy()
        acc[1:] = _lse(acc[1:], prev[:-1])
        two = np.full(U, NEG_INF)
        two[2:] = prev[:-2]
        two[~skip] = NEG_INF
        acc = _lse(acc, two)
        pre[t] = acc
        la[t] = acc + log_q[t, ext]
    finals = la[T - 1, U - 1] if K == 0 else _lse(la[T - 1, U - 1], la[T - 1, U - 2])
    log_p = float(finals)
    if not want_grad or log_p == NEG_INF:
        return log_p, None

    # post[t, u]: log prob of finishing from state u at frame t, after emitting at t
    post = np.full((T, U), NEG_INF)
    post[T - 1, U - 1] = 0.0
    if K > 0:
        post[T - 1, U - 2] = 0.0
    for t in range(T - 2, -1, -1):
        nxt = post[t + 1] + log_q[t + 1, ext]
        acc = nxt.copy()
        acc[:-1] = _lse(acc[:-1], nxt[1:])
        two = np.full(U, NEG_INF)
        two[:-2] = np.where(skip[2:], nxt[2:], NEG_INF)
        acc = _lse(acc, two)
        post[t] = acc

    grad = np.zeros((T, S))
    occ = np.exp(pre + post - log_p)
    for u in range(U):
        grad[:, ext[u]] += occ[:, u]
    return log_p, grad
