# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled walk-sampling and training kernels.

Mirrors ``_sgns_py`` exactly (same splitmix64 streams, same draw and update
order); see that module for the reference semantics. The training loop
releases the GIL so callers can run one slice per thread, hogwild style.
"""

from libc.math cimport exp, isfinite
from libc.stdlib cimport free, malloc

ctypedef unsigned long long u64


cdef inline u64 _next(u64* state) nogil:
    cdef u64 z
    state[0] = state[0] + <u64>0x9E3779B97F4A7C15u
    z = state[0]
    z = (z ^ (z >> 30)) * <u64>0xBF58476D1CE4E5B9u
    z = (z ^ (z >> 27)) * <u64>0x94D049BB133111EBu
    return z ^ (z >> 31)


cdef inline double _u01(u64* state) nogil:
    return <double>(_next(state) >> 11) * (1.0 / 9007199254740992.0)


cdef inline double _sigmoid(double x) nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def sample_walk_groups(long long[::1] indptr, int[::1] neighbors,
                       double[::1] cumw, int[::1] nodes,
                       long long[::1] counts, unsigned long long[::1] seeds,
                       int[:, ::1] out):
    cdef Py_ssize_t g, k, step
    cdef Py_ssize_t row = 0
    cdef Py_ssize_t length = out.shape[1]
    cdef long long lo, hi, mid, last
    cdef int u
    cdef u64 state
    cdef double r
    with nogil:
        for g in range(nodes.shape[0]):
            state = seeds[g]
            for k in range(counts[g]):
                u = nodes[g]
                out[row, 0] = u
                for step in range(1, length):
                    lo = indptr[u]
                    hi = indptr[u + 1]
                    last = hi - 1
                    r = _u01(&state) * cumw[last]
                    # upper bound: first index with cumw > r
                    while lo < hi:
                        mid = (lo + hi) >> 1
                        if cumw[mid] > r:
                            hi = mid
                        else:
                            lo = mid + 1
                    if lo > last:
                        lo = last
                    u = neighbors[lo]
                    out[row, step] = u
                row += 1
    return row


cdef inline int _draw_negative(u64* state, double[::1] prob,
                               long long[::1] alias, int[::1] node,
                               long long off, long long size,
                               int positive) nogil:
    cdef int attempt
    cdef int cand = positive
    cdef long long k, slot
    cdef double u1, u2
    for attempt in range(64):
        u1 = _u01(state)
        u2 = _u01(state)
        k = <long long>(u1 * size)
        if k >= size:
            k = size - 1
        if u2 < prob[off + k]:
            slot = k
        else:
            slot = alias[off + k]
        cand = node[off + slot]
        if cand != positive:
            break
    return cand


def train_slice(double[:, :, ::1] centers, double[:, :, ::1] contexts,
                int[::1] pair_centers, int[::1] pair_contexts,
                int[::1] pair_views,
                long long begin, long long end, long long global_offset,
                long long total_pairs, int[::1] view_mat,
                double[::1] noise_prob, long long[::1] noise_alias,
                int[::1] noise_node, long long[::1] noise_off,
                long long[::1] nv_indptr, int[::1] nv_views,
                int variant, double theta, double gamma, int appendix,
                int negatives, double alpha0, double alpha_min,
                unsigned long long seed):
    cdef Py_ssize_t dim = centers.shape[2]
    cdef double* acc = <double*>malloc(dim * sizeof(double))
    cdef double* phi = <double*>malloc(dim * sizeof(double))
    cdef double* umean = <double*>malloc(dim * sizeof(double))
    cdef double* tmean = <double*>malloc(dim * sizeof(double))
    if acc == NULL or phi == NULL or umean == NULL or tmean == NULL:
        free(acc); free(phi); free(umean); free(tmean)
        raise MemoryError()

    cdef u64 state = seed
    cdef long long i, t, off, size, a0, a1, b0, b1, a, bad = -1
    cdef Py_ssize_t j
    cdef int s, u, n, v, mat, tgt, vv, m_t, m_u
    cdef double alpha, label, dot, ga, own, oth, coef, rc_u, rc_t, old

    with nogil:
        for i in range(begin, end):
            t = global_offset + i
            alpha = alpha0 * (1.0 - <double>t / <double>total_pairs)
            if alpha < alpha_min:
                alpha = alpha_min
            u = pair_centers[i]
            n = pair_contexts[i]
            v = pair_views[i]
            mat = view_mat[v]
            off = noise_off[v]
            size = noise_off[v + 1] - off
            for j in range(dim):
                acc[j] = 0.0

            rc_u = 0.0
            if variant == 2:
                b0 = nv_indptr[u]
                b1 = nv_indptr[u + 1]
                m_u = <int>(b1 - b0)
                for j in range(dim):
                    umean[j] = 0.0
                for a in range(b0, b1):
                    vv = nv_views[a]
                    for j in range(dim):
                        umean[j] += centers[vv, u, j]
                for j in range(dim):
                    umean[j] /= m_u
                rc_u = 2.0 * gamma * (negatives + 1) * (1.0 - 1.0 / m_u)

            for s in range(negatives + 1):
                if s == 0:
                    tgt = n
                    label = 1.0
                else:
                    tgt = _draw_negative(&state, noise_prob, noise_alias,
                                         noise_node, off, size, n)
                    label = 0.0

                if variant == 1:
                    a0 = nv_indptr[tgt]
                    a1 = nv_indptr[tgt + 1]
                    m_t = <int>(a1 - a0)
                    if appendix:
                        own = theta + (1.0 - theta) / m_t
                        oth = theta
                    else:
                        own = (1.0 - theta) + theta / m_t
                        oth = theta / m_t
                    for j in range(dim):
                        phi[j] = 0.0
                    for a in range(a0, a1):
                        vv = nv_views[a]
                        coef = own if vv == v else oth
                        for j in range(dim):
                            phi[j] += coef * contexts[vv, tgt, j]
                    dot = 0.0
                    for j in range(dim):
                        dot += centers[mat, u, j] * phi[j]
                    if not isfinite(dot):
                        bad = i
                        break
                    ga = alpha * (label - _sigmoid(dot))
                    for j in range(dim):
                        acc[j] += ga * phi[j]
                    for a in range(a0, a1):
                        vv = nv_views[a]
                        coef = ga * (own if vv == v else oth)
                        for j in range(dim):
                            contexts[vv, tgt, j] += coef * centers[mat, u, j]
                elif variant == 2:
                    dot = 0.0
                    for j in range(dim):
                        dot += centers[mat, u, j] * contexts[v, tgt, j]
                    if not isfinite(dot):
                        bad = i
                        break
                    ga = alpha * (label - _sigmoid(dot))
                    a0 = nv_indptr[tgt]
                    a1 = nv_indptr[tgt + 1]
                    m_t = <int>(a1 - a0)
                    for j in range(dim):
                        tmean[j] = 0.0
                    for a in range(a0, a1):
                        vv = nv_views[a]
                        for j in range(dim):
                            tmean[j] += contexts[vv, tgt, j]
                    for j in range(dim):
                        tmean[j] /= m_t
                    rc_t = alpha * 2.0 * gamma * (1.0 - 1.0 / m_t)
                    for j in range(dim):
                        old = contexts[v, tgt, j]
                        acc[j] += ga * old
                        contexts[v, tgt, j] = old + ga * centers[mat, u, j] \
                            - rc_t * (old - tmean[j])
                else:
                    dot = 0.0
                    for j in range(dim):
                        dot += centers[mat, u, j] * contexts[mat, tgt, j]
                    if not isfinite(dot):
                        bad = i
                        break
                    ga = alpha * (label - _sigmoid(dot))
                    for j in range(dim):
                        old = contexts[mat, tgt, j]
                        acc[j] += ga * old
                        contexts[mat, tgt, j] = old + ga * centers[mat, u, j]

            if bad >= 0:
                break
            if variant == 2:
                for j in range(dim):
                    centers[mat, u, j] += acc[j] \
                        - (alpha * rc_u) * (centers[mat, u, j] - umean[j])
            else:
                for j in range(dim):
                    centers[mat, u, j] += acc[j]

    free(acc); free(phi); free(umean); free(tmean)
    return bad
