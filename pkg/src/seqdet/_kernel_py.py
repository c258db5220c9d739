"""Pure-Python slot loop; mirrors ``_kernel.pyx`` operation for operation.

Both implementations only add and compare precomputed doubles, in the same
order, so their outputs are bit-identical.

Array layout: ``obs``, ``upd_pos``, ``upd_neg`` and ``upd_idle`` are
``(K, n)`` float64; column ``i`` is slot ``t0 + i + 1``.
"""


def run_chunk(obs, upd_pos, upd_neg, upd_idle, acc, counts, fc, thr_up, thr_down,
              fc_up, fc_down, per_slot):
    """Advance samplers and the fusion SPRT through one chunk.

    ``acc`` (per-sensor accumulators), ``counts`` (messages consumed) and
    ``fc[0]`` (global LLR) are updated in place.  In ``per_slot`` mode the
    fusion center adds ``upd_idle`` in slots without an emission.

    Returns ``(status, i, k)``: status +1/-1 when H1/H0 is decided at column
    ``i`` by sensor ``k``; ``(0, n, -1)`` if still pending.
    """
    K = obs.shape[0]
    n = obs.shape[1]
    L = fc[0]
    for i in range(n):
        for k in range(K):
            a = acc[k] + obs[k, i]
            if a >= thr_up[k]:
                acc[k] = 0.0
                counts[k] += 1
                L = L + upd_pos[k, i]
            elif a <= -thr_down[k]:
                acc[k] = 0.0
                counts[k] += 1
                L = L + upd_neg[k, i]
            else:
                acc[k] = a
                if not per_slot:
                    continue
                L = L + upd_idle[k, i]
            if L >= fc_up:
                fc[0] = L
                return 1, i, k
            if L <= -fc_down:
                fc[0] = L
                return -1, i, k
    fc[0] = L
    return 0, n, -1


def run_tail(obs, upd_pos, upd_neg, acc, thr_up, thr_down, start, wait, lam_next, stop_col):
    """Run each sensor forward to its next emission after the stop.

    ``start[k]`` is the first column to process for sensor ``k`` (negative once
    finished); it is advanced in place so the tail can span several chunks.
    ``wait[k]`` receives the column offset from ``stop_col`` (chunk-relative,
    may be negative for later chunks' bookkeeping done by the caller) and
    ``lam_next[k]`` the received LLR of that emission.

    Returns the number of sensors that have not emitted yet.
    """
    K = obs.shape[0]
    n = obs.shape[1]
    pending = 0
    for k in range(K):
        i = start[k]
        if i < 0:
            continue
        a = acc[k]
        found = False
        while i < n:
            a = a + obs[k, i]
            if a >= thr_up[k]:
                lam_next[k] = upd_pos[k, i]
                found = True
                break
            if a <= -thr_down[k]:
                lam_next[k] = upd_neg[k, i]
                found = True
                break
            i += 1
        if found:
            acc[k] = 0.0
            wait[k] = i - stop_col
            start[k] = -1
        else:
            acc[k] = a
            start[k] = 0
            pending += 1
    return pending
