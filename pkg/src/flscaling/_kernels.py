"""Compiled Monte Carlo kernels: counter-based RNG, graph sampling, peeling.

Every trial derives an independent RNG stream from (seed, trial index), so
results are bit-identical no matter how trials are scheduled.  Trials are
processed in fixed chunks; callers sum per-chunk integer accumulators in a
fixed order.
"""

import numpy as np
from numba import njit, prange

U64 = np.uint64
_GAMMA = U64(0x9E3779B97F4A7C15)
_M1 = U64(0xBF58476D1CE4E5B9)
_M2 = U64(0x94D049BB133111EB)


@njit(cache=True, inline="always")
def _mix(state):
    # splitmix64 step; returns (new_state, output)
    state = state + _GAMMA
    z = state
    z = (z ^ (z >> U64(30))) * _M1
    z = (z ^ (z >> U64(27))) * _M2
    return state, z ^ (z >> U64(31))


@njit(cache=True, inline="always")
def stream_state(seed, trial):
    # decorrelate (seed, trial) into an initial splitmix state
    s = U64(seed) ^ (U64(trial) * U64(0xA3EC647659359ACD))
    s, z = _mix(s)
    s, z2 = _mix(s)
    return s ^ z2


@njit(cache=True, inline="always")
def rand_below(state, bound):
    # unbiased uniform integer in [0, bound) by masked rejection
    b = U64(bound)
    mask = b - U64(1)
    mask |= mask >> U64(1)
    mask |= mask >> U64(2)
    mask |= mask >> U64(4)
    mask |= mask >> U64(8)
    mask |= mask >> U64(16)
    mask |= mask >> U64(32)
    while True:
        state, z = _mix(state)
        r = z & mask
        if r < b:
            return state, int(r)


@njit(cache=True, inline="always")
def rand_unit(state):
    state, z = _mix(state)
    return state, (z >> U64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def _sample_erasures(state, n, channel_rand, eps, e_exact, buf):
    """Fill buf with erased variable ids; returns (state, count)."""
    if channel_rand:
        cnt = 0
        for v in range(n):
            state, u = rand_unit(state)
            if u < eps:
                buf[cnt] = v
                cnt += 1
        return state, cnt
    # exact channel: partial Fisher-Yates over variable ids
    for v in range(n):
        buf[v] = v
    for i in range(e_exact):
        state, j = rand_below(state, n - i)
        tmp = buf[i]
        buf[i] = buf[i + j]
        buf[i + j] = tmp
    return state, e_exact


@njit(cache=True)
def _peel_residual(E, l, m, con, cdeg, coff, cadj, fill, alive, pool, pos, state,
                   checkpoints, out_s, out_t):
    """Peel the residual graph described by con/cdeg down to a stopping set.

    con[k*l + j] is the j-th check of erased variable k; cdeg holds current
    residual check degrees.  Records (s, t) at each requested residual size
    in checkpoints (descending).  Returns (state, v_stop).
    """
    # check -> variable CSR
    for c in range(m + 1):
        coff[c] = 0
    for k in range(E * l):
        coff[con[k] + 1] += 1
    for c in range(m):
        coff[c + 1] += coff[c]
    for c in range(m):
        fill[c] = coff[c]
    for k in range(E):
        for j in range(l):
            c = con[k * l + j]
            cadj[fill[c]] = k
            fill[c] += 1
    # degree-one pool and counters
    npool = 0
    s = 0
    t = 0
    for c in range(m):
        d = cdeg[c]
        if d == 1:
            pool[npool] = c
            pos[c] = npool
            npool += 1
            s += 1
        elif d >= 2:
            t += 1
    for k in range(E):
        alive[k] = 1

    ncp = len(checkpoints)
    icp = 0
    v = E
    while icp < ncp and checkpoints[icp] >= v:
        if checkpoints[icp] == v:
            out_s[icp] = s
            out_t[icp] = t
            icp += 1
        else:
            out_s[icp] = -1
            out_t[icp] = -1
            icp += 1
    while v > 0 and npool > 0:
        state, ip = rand_below(state, npool)
        c0 = pool[ip]
        var = -1
        for q in range(coff[c0], coff[c0 + 1]):
            k = cadj[q]
            if alive[k] == 1:
                var = k
                break
        alive[var] = 0
        for j in range(l):
            c = con[var * l + j]
            d = cdeg[c]
            cdeg[c] = d - 1
            if d == 1:
                pdx = pos[c]
                last = pool[npool - 1]
                pool[pdx] = last
                pos[last] = pdx
                npool -= 1
                pos[c] = -1
                s -= 1
            elif d == 2:
                pool[npool] = c
                pos[c] = npool
                npool += 1
                s += 1
                t -= 1
        v -= 1
        if icp < ncp and checkpoints[icp] == v:
            out_s[icp] = s
            out_t[icp] = t
            icp += 1
    # checkpoints below the stopping size stay at -1
    while icp < ncp:
        out_s[icp] = -1
        out_t[icp] = -1
        icp += 1
    return state, v


@njit(cache=True)
def _build_residual_standard(state, n, l, socket_owner, erased, E, con, cdeg, m, scratch):
    """Configuration-model residual: permute check sockets, keep erased edges."""
    ne = n * l
    for i in range(ne):
        scratch[i] = socket_owner[i]
    # Fisher-Yates on the check socket array
    for i in range(ne - 1, 0, -1):
        state, j = rand_below(state, i + 1)
        tmp = scratch[i]
        scratch[i] = scratch[j]
        scratch[j] = tmp
    for c in range(m):
        cdeg[c] = 0
    for k in range(E):
        v = erased[k]
        for j in range(l):
            c = scratch[v * l + j]
            con[k * l + j] = c
            cdeg[c] += 1
    return state


@njit(cache=True)
def _build_residual_poisson(state, l, erased, E, con, cdeg, m, expurg):
    """Poisson residual: each erased socket picks a uniform check.

    expurg 1 forbids a variable placing both sockets on one check (only
    meaningful for l = 2); expurg 2 additionally redraws parallel pairs of
    degree-2 variables, using an insertion check against previous pairs.
    """
    for c in range(m):
        cdeg[c] = 0
    for k in range(E):
        while True:
            ok = True
            for j in range(l):
                state, c = rand_below(state, m)
                con[k * l + j] = c
            if expurg >= 1 and l == 2 and con[k * l] == con[k * l + 1]:
                ok = False
            if ok and expurg >= 2 and l == 2:
                a = con[k * l]
                b = con[k * l + 1]
                if a > b:
                    a, b = b, a
                for kk in range(k):
                    a2 = con[kk * l]
                    b2 = con[kk * l + 1]
                    if a2 > b2:
                        a2, b2 = b2, a2
                    if a2 == a and b2 == b:
                        ok = False
                        break
            if ok:
                break
        for j in range(l):
            cdeg[con[k * l + j]] += 1
    return state


@njit(cache=True, parallel=True)
def mc_block_kernel(n, l, m, standard, socket_owner, expurg,
                    channel_rand, eps, e_exact, vthresh,
                    trials, seed, nchunks):
    """Block/bit error counting; returns per-chunk integer accumulators.

    Output rows: [trials, block failures, failures with v_stop >= vthresh,
    summed residual bits, summed squared residual bits].
    """
    acc = np.zeros((nchunks, 5), dtype=np.int64)
    ne = n * l
    cps = np.empty(0, dtype=np.int64)
    for ch in prange(nchunks):
        lo = trials * ch // nchunks
        hi = trials * (ch + 1) // nchunks
        ebuf = np.empty(n, dtype=np.int64)
        con = np.empty(ne, dtype=np.int64)
        cdeg = np.zeros(m, dtype=np.int64)
        coff = np.zeros(m + 1, dtype=np.int64)
        cadj = np.empty(ne, dtype=np.int64)
        fill = np.empty(m, dtype=np.int64)
        alive = np.empty(n, dtype=np.uint8)
        pool = np.empty(m, dtype=np.int64)
        pos = np.empty(m, dtype=np.int64)
        scratch = np.empty(ne, dtype=np.int64)
        out_s = np.empty(0, dtype=np.int64)
        out_t = np.empty(0, dtype=np.int64)
        for tr in range(lo, hi):
            state = stream_state(seed, tr)
            state, E = _sample_erasures(state, n, channel_rand, eps, e_exact, ebuf)
            if standard:
                state = _build_residual_standard(state, n, l, socket_owner, ebuf, E,
                                                 con, cdeg, m, scratch)
            else:
                state = _build_residual_poisson(state, l, ebuf, E, con, cdeg, m, expurg)
            state, v_stop = _peel_residual(E, l, m, con, cdeg, coff, cadj, fill,
                                           alive, pool, pos, state, cps, out_s, out_t)
            acc[ch, 0] += 1
            if v_stop > 0:
                acc[ch, 1] += 1
                if v_stop >= vthresh:
                    acc[ch, 2] += 1
                acc[ch, 3] += v_stop
                acc[ch, 4] += v_stop * v_stop
    return acc


@njit(cache=True, parallel=True)
def mc_trajectory_kernel(n, l, m, standard, socket_owner, expurg,
                         channel_rand, eps, e_exact, checkpoints,
                         trials, seed, nchunks):
    """(s, t) moment accumulation at residual-size checkpoints.

    Per chunk and checkpoint: [count, sum s, sum t, sum s^2, sum s t,
    sum t^2] over trials that reached the checkpoint.
    """
    ncp = len(checkpoints)
    acc = np.zeros((nchunks, ncp, 6), dtype=np.int64)
    ne = n * l
    for ch in prange(nchunks):
        lo = trials * ch // nchunks
        hi = trials * (ch + 1) // nchunks
        ebuf = np.empty(n, dtype=np.int64)
        con = np.empty(ne, dtype=np.int64)
        cdeg = np.zeros(m, dtype=np.int64)
        coff = np.zeros(m + 1, dtype=np.int64)
        cadj = np.empty(ne, dtype=np.int64)
        fill = np.empty(m, dtype=np.int64)
        alive = np.empty(n, dtype=np.uint8)
        pool = np.empty(m, dtype=np.int64)
        pos = np.empty(m, dtype=np.int64)
        scratch = np.empty(ne, dtype=np.int64)
        out_s = np.empty(ncp, dtype=np.int64)
        out_t = np.empty(ncp, dtype=np.int64)
        for tr in range(lo, hi):
            state = stream_state(seed, tr)
            state, E = _sample_erasures(state, n, channel_rand, eps, e_exact, ebuf)
            if standard:
                state = _build_residual_standard(state, n, l, socket_owner, ebuf, E,
                                                 con, cdeg, m, scratch)
            else:
                state = _build_residual_poisson(state, l, ebuf, E, con, cdeg, m, expurg)
            state, v_stop = _peel_residual(E, l, m, con, cdeg, coff, cadj, fill,
                                           alive, pool, pos, state, checkpoints, out_s, out_t)
            for i in range(ncp):
                s = out_s[i]
                if s >= 0:
                    t = out_t[i]
                    acc[ch, i, 0] += 1
                    acc[ch, i, 1] += s
                    acc[ch, i, 2] += t
                    acc[ch, i, 3] += s * s
                    acc[ch, i, 4] += s * t
                    acc[ch, i, 5] += t * t
    return acc


@njit(cache=True)
def peel_graph_once(n, var_ptr, var_adj, m, erased_mask, seed):
    """Single peeling pass over an explicit graph (general degrees).

    Returns v_stop (0 on success).  Uses the same degree-one pool policy as
    the ensemble-average kernels.
    """
    cdeg = np.zeros(m, dtype=np.int64)
    E = 0
    for v in range(n):
        if erased_mask[v] == 1:
            E += 1
            for q in range(var_ptr[v], var_ptr[v + 1]):
                cdeg[var_adj[q]] += 1
    # check -> variable adjacency over erased variables only
    ne = var_ptr[n]
    coff = np.zeros(m + 1, dtype=np.int64)
    for v in range(n):
        if erased_mask[v] == 1:
            for q in range(var_ptr[v], var_ptr[v + 1]):
                coff[var_adj[q] + 1] += 1
    for c in range(m):
        coff[c + 1] += coff[c]
    cadj = np.empty(ne, dtype=np.int64)
    fill = coff[:m].copy()
    for v in range(n):
        if erased_mask[v] == 1:
            for q in range(var_ptr[v], var_ptr[v + 1]):
                c = var_adj[q]
                cadj[fill[c]] = v
                fill[c] += 1
    alive = erased_mask.copy()
    pool = np.empty(m, dtype=np.int64)
    pos = np.full(m, -1, dtype=np.int64)
    npool = 0
    for c in range(m):
        if cdeg[c] == 1:
            pool[npool] = c
            pos[c] = npool
            npool += 1
    state = stream_state(seed, 0)
    v_left = E
    while v_left > 0 and npool > 0:
        state, ip = rand_below(state, npool)
        c0 = pool[ip]
        var = -1
        for q in range(coff[c0], coff[c0 + 1]):
            k = cadj[q]
            if alive[k] == 1:
                var = k
                break
        alive[var] = 0
        for q in range(var_ptr[var], var_ptr[var + 1]):
            c = var_adj[q]
            d = cdeg[c]
            cdeg[c] = d - 1
            if d == 1:
                pdx = pos[c]
                last = pool[npool - 1]
                pool[pdx] = last
                pos[last] = pdx
                npool -= 1
                pos[c] = -1
            elif d == 2:
                pool[npool] = c
                pos[c] = npool
                npool += 1
        v_left -= 1
    return v_left
