# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled slot loop; see ``_kernel_py`` for the reference semantics."""


def run_chunk(const double[:, ::1] obs, const double[:, ::1] upd_pos, const double[:, ::1] upd_neg,
              const double[:, ::1] upd_idle, double[::1] acc, long long[::1] counts, double[::1] fc,
              const double[::1] thr_up, const double[::1] thr_down, double fc_up, double fc_down,
              bint per_slot):
    cdef Py_ssize_t K = obs.shape[0]
    cdef Py_ssize_t n = obs.shape[1]
    cdef Py_ssize_t i, k
    cdef double a
    cdef double L = fc[0]
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


def run_tail(const double[:, ::1] obs, const double[:, ::1] upd_pos, const double[:, ::1] upd_neg,
             double[::1] acc, const double[::1] thr_up, const double[::1] thr_down,
             long long[::1] start, long long[::1] wait, double[::1] lam_next, long long stop_col):
    cdef Py_ssize_t K = obs.shape[0]
    cdef Py_ssize_t n = obs.shape[1]
    cdef Py_ssize_t k
    cdef long long i
    cdef int pending = 0
    cdef bint found
    cdef double a
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
