"""Compiled event loop for one replication.

Everything here works on plain arrays so numba can compile it; the typed
front end lives in :mod:`twinsync.sim`.

Trace rows are ``[time, kind, a, b, c, snapshot_0 .. snapshot_{K-1}]``:

* kind 0 (transition): a = system, b = from, c = to
* kind 1 (query issued): snapshot = sampled joint state
* kind 2 (sync completed): c = query time, snapshot = installed joint state
"""

import numba as nb
import numpy as np

EV_JUMP = 0
EV_QUERY = 1
EV_SYNC = 2

POL_NEVER = 0
POL_PRTP = 1
POL_PPTP = 2
POL_PERIODIC = 3
POL_LOOKUP = 4

LATCH_NONE = 0
LATCH_ANY = 1
LATCH_PER_PS = 2

DIST_CODES = {"hamming": 0, "euclidean_paper": 1, "manhattan": 2, "chebyshev": 3,
              "cosine": 4, "euclidean_true": 5}
KIND_CODES = {"c1": 1, "c2": 2, "c3": 3}


@nb.njit(cache=True, nogil=True, inline='always')
def _distance(code, w, labels, S, Shat):
    K = S.shape[0]
    if code == 4:
        dot = 0.0
        nx = 0.0
        ny = 0.0
        for i in range(K):
            x = labels[i, S[i]]
            y = labels[i, Shat[i]]
            dot += w[i] * x * y
            nx += w[i] * x * x
            ny += w[i] * y * y
        if nx == 0.0 or ny == 0.0:
            if nx == ny:
                return 0.0
            return 1.0
        v = 1.0 - dot / np.sqrt(nx * ny)
        if v < 0.0:
            v = 0.0
        return v
    acc = 0.0
    for i in range(K):
        d = labels[i, S[i]] - labels[i, Shat[i]]
        if code == 0:
            if d != 0.0:
                acc += w[i]
        elif code == 1:
            acc += w[i] * np.sqrt(d * d)
        elif code == 2:
            acc += w[i] * abs(d)
        elif code == 3:
            v = w[i] * abs(d)
            if v > acc:
                acc = v
        else:
            acc += w[i] * d * d
    if code == 5:
        return np.sqrt(acc)
    return acc


@nb.njit(cache=True, nogil=True, inline='always')
def _eval_costs(out, kinds, weights, dists, labels, S, Shat, latch):
    K = S.shape[0]
    for c in range(kinds.shape[0]):
        kind = kinds[c]
        if kind == 1:
            v = 0.0
            for i in range(K):
                if latch[i]:
                    v = 1.0
                    break
            out[c] = v
        elif kind == 2:
            v = 0.0
            for i in range(K):
                if latch[i]:
                    v += weights[c, i]
            out[c] = v
        else:
            out[c] = _distance(dists[c], weights[c], labels, S, Shat)


@nb.njit(cache=True, nogil=True, inline='always')
def lookup_code(S, Shat, latch, sizes, mode):
    K = S.shape[0]
    code = 0
    for i in range(K):
        code = code * sizes[i] + S[i]
    for i in range(K):
        code = code * sizes[i] + Shat[i]
    if mode == LATCH_ANY:
        b = 0
        for i in range(K):
            if latch[i]:
                b = 1
        code = code * 2 + b
    elif mode == LATCH_PER_PS:
        for i in range(K):
            code = code * 2 + (1 if latch[i] else 0)
    return code


@nb.njit(cache=True, nogil=True, inline='always')
def _twin_prob(table, S, Shat, latch, sizes, mode):
    p = table[lookup_code(S, Shat, latch, sizes, mode)]
    if p < 0.0:
        raise ValueError("lookup policy has no action for the current state")
    return p


@nb.njit(cache=True, nogil=True, inline='always')
def _tick_time(rng, t, S, exit_rate, uniform_rate, table, Shat, latch, sizes, mode):
    # Uniformization ticks that do not move any system still trigger a
    # decision; they only matter where the twin probability is positive.
    p = _twin_prob(table, S, Shat, latch, sizes, mode)
    if p <= 0.0:
        return np.inf
    spare = uniform_rate
    for i in range(S.shape[0]):
        spare -= exit_rate[i, S[i]]
    spare *= p
    if spare <= 1e-12 * uniform_rate:
        return np.inf
    return t + rng.exponential(1.0 / spare)


@nb.njit(cache=True, nogil=True, inline='always')
def _push(rec, nrec, t, kind, a, b, c, snap):
    if nrec < rec.shape[0]:
        rec[nrec, 0] = t
        rec[nrec, 1] = kind
        rec[nrec, 2] = a
        rec[nrec, 3] = b
        rec[nrec, 4] = c
        for i in range(snap.shape[0]):
            rec[nrec, 5 + i] = snap[i]
    return nrec + 1


@nb.njit(cache=True, nogil=True)
def run_kernel(rng, init, exit_rate, jump_cdf, sizes, delta, parallel,
               policy, rate, p_twin, table, mode, uniform_rate,
               kinds, weights, dists, labels, horizon, record, rec, pend_cap):
    """Simulate one replication.

    ``rec`` receives trace rows when ``record`` is set and ``pend_cap``
    bounds the number of syncs in flight. Status 1 means ``rec`` was too
    small (``nrec`` rows were needed), status 2 means ``pend_cap`` was
    exceeded; the caller reruns from the same generator state with larger
    buffers.
    """
    K = init.shape[0]
    S = init.copy()
    Shat = init.copy()
    latch = np.zeros(K, dtype=np.bool_)
    last_jump = np.full(K, -np.inf)
    sample_time = 0.0

    next_jump = np.empty(K)
    for i in range(K):
        next_jump[i] = rng.exponential(1.0 / exit_rate[i, S[i]])

    next_q = np.inf
    k_periodic = 1
    if policy == POL_PRTP:
        next_q = rng.exponential(1.0 / rate)
    elif policy == POL_PERIODIC:
        next_q = k_periodic / rate
    elif policy == POL_LOOKUP:
        next_q = _tick_time(rng, 0.0, S, exit_rate, uniform_rate, table, Shat, latch, sizes, mode)

    # FIFO of in-flight syncs
    cap = pend_cap
    pend_t = np.empty(cap)
    pend_q = np.empty(cap)
    pend_s = np.empty((cap, K), dtype=np.int64)
    head = 0
    count = 0

    nc = kinds.shape[0]
    cur = np.zeros(nc)
    integ = np.zeros(nc)
    _eval_costs(cur, kinds, weights, dists, labels, S, Shat, latch)

    nrec = 0
    status = 0
    nq = 0
    ncomp = 0
    t = 0.0

    while True:
        tn = np.inf
        ev = -1
        which = -1
        if count > 0:
            tn = pend_t[head]
            ev = EV_SYNC
        for i in range(K):
            if next_jump[i] < tn:
                tn = next_jump[i]
                ev = EV_JUMP
                which = i
        if next_q < tn:
            tn = next_q
            ev = EV_QUERY
        if tn > horizon:
            break

        dt = tn - t
        for c in range(nc):
            integ[c] += cur[c] * dt
        t = tn
        do_query = False

        if ev == EV_SYNC:
            qt = pend_q[head]
            for i in range(K):
                Shat[i] = pend_s[head, i]
            head = (head + 1) % cap
            count -= 1
            sample_time = qt
            for i in range(K):
                latch[i] = last_jump[i] > sample_time
            ncomp += 1
            if record:
                nrec = _push(rec, nrec, t, EV_SYNC, -1.0, -1.0, qt, Shat)
        elif ev == EV_JUMP:
            i = which
            frm = S[i]
            u = rng.random()
            to = 0
            while to < sizes[i] - 1 and jump_cdf[i, frm, to] <= u:
                to += 1
            S[i] = to
            last_jump[i] = t
            latch[i] = True
            next_jump[i] = t + rng.exponential(1.0 / exit_rate[i, to])
            if record:
                nrec = _push(rec, nrec, t, EV_JUMP, i, frm, to, S)
            if policy == POL_PPTP:
                if rng.random() < p_twin:
                    do_query = True
            elif policy == POL_LOOKUP:
                p = _twin_prob(table, S, Shat, latch, sizes, mode)
                if p >= 1.0:
                    do_query = True
                elif p > 0.0:
                    do_query = rng.random() < p
        else:
            do_query = True
            if policy == POL_PRTP:
                next_q = t + rng.exponential(1.0 / rate)
            elif policy == POL_PERIODIC:
                k_periodic += 1
                next_q = k_periodic / rate

        if do_query:
            nq += 1
            if record:
                nrec = _push(rec, nrec, t, EV_QUERY, -1.0, -1.0, -1.0, S)
            if delta == 0.0:
                for i in range(K):
                    Shat[i] = S[i]
                    latch[i] = False
                sample_time = t
                ncomp += 1
                if record:
                    nrec = _push(rec, nrec, t, EV_SYNC, -1.0, -1.0, t, Shat)
            else:
                if not parallel:
                    head = 0
                    count = 0
                if count == cap:
                    status = 2
                    break
                slot = (head + count) % cap
                pend_t[slot] = t + delta
                pend_q[slot] = t
                for i in range(K):
                    pend_s[slot, i] = S[i]
                count += 1

        if policy == POL_LOOKUP:
            next_q = _tick_time(rng, t, S, exit_rate, uniform_rate, table, Shat, latch, sizes, mode)
        _eval_costs(cur, kinds, weights, dists, labels, S, Shat, latch)

    if status == 0:
        dt = horizon - t
        for c in range(nc):
            integ[c] += cur[c] * dt
        if record and nrec > rec.shape[0]:
            status = 1
    return status, integ, nq, ncomp, nrec
