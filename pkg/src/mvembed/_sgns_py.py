"""Pure-Python training/walk kernels; fallback when the compiled extension
is unavailable.

Semantics match ``_sgns.pyx`` exactly: same splitmix64 streams, same draw
procedure, same update order. Only floating-point summation order inside
dot products differs (numpy vs a C loop), so cross-backend results agree to
rounding, not bitwise. Single-threaded regardless of the requested thread
count; the GIL would serialize the work anyway.
"""

from __future__ import annotations

import math

import numpy as np

from ._rng import MASK64, splitmix64

_INV_2_53 = 1.0 / 9007199254740992.0


def _sigmoid(x: float) -> float:
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def sample_walk_groups(indptr, neighbors, cumw, nodes, counts, seeds, out):
    """Fill ``out`` with weight-proportional walks, grouped by start node."""
    row = 0
    length = out.shape[1]
    for g in range(len(nodes)):
        state = int(seeds[g])
        start = int(nodes[g])
        for _ in range(int(counts[g])):
            u = start
            out[row, 0] = u
            for step in range(1, length):
                lo, hi = int(indptr[u]), int(indptr[u + 1])
                total = cumw[hi - 1]
                state, z = splitmix64(state)
                r = (z >> 11) * _INV_2_53 * total
                k = lo + int(np.searchsorted(cumw[lo:hi], r, side="right"))
                if k >= hi:
                    k = hi - 1
                u = int(neighbors[k])
                out[row, step] = u
            row += 1
    return row


def _draw_negative(state, noise_prob, noise_alias, noise_node, off, size,
                   positive):
    cand = positive
    for _ in range(64):
        state, z1 = splitmix64(state)
        state, z2 = splitmix64(state)
        u1 = (z1 >> 11) * _INV_2_53
        u2 = (z2 >> 11) * _INV_2_53
        k = int(u1 * size)
        if k >= size:
            k = size - 1
        slot = k if u2 < noise_prob[off + k] else int(noise_alias[off + k])
        cand = int(noise_node[off + slot])
        if cand != positive:
            break
    return state, cand


def train_slice(centers, contexts, pair_centers, pair_contexts, pair_views,
                begin, end, global_offset, total_pairs, view_mat,
                noise_prob, noise_alias, noise_node, noise_off,
                nv_indptr, nv_views,
                variant, theta, gamma, appendix,
                negatives, alpha0, alpha_min, seed):
    """One pass over pairs [begin, end); returns -1 or the index of the
    first pair whose dot product went non-finite."""
    dim = centers.shape[2]
    acc = np.zeros(dim, dtype=np.float64)
    state = int(seed) & MASK64

    for i in range(int(begin), int(end)):
        t = global_offset + i
        alpha = alpha0 * (1.0 - t / total_pairs)
        if alpha < alpha_min:
            alpha = alpha_min
        u = int(pair_centers[i])
        n = int(pair_contexts[i])
        v = int(pair_views[i])
        mat = int(view_mat[v])
        off = int(noise_off[v])
        size = int(noise_off[v + 1]) - off
        f = centers[mat, u]
        acc[:] = 0.0

        if variant == 2:
            b0, b1 = int(nv_indptr[u]), int(nv_indptr[u + 1])
            m_u = b1 - b0
            umean = centers[nv_views[b0:b1], u, :].mean(axis=0)
            rc_u = 2.0 * gamma * (negatives + 1) * (1.0 - 1.0 / m_u)

        for s in range(negatives + 1):
            if s == 0:
                tgt, label = n, 1.0
            else:
                state, tgt = _draw_negative(state, noise_prob, noise_alias,
                                            noise_node, off, size, n)
                label = 0.0

            if variant == 1:
                a0, a1 = int(nv_indptr[tgt]), int(nv_indptr[tgt + 1])
                m_t = a1 - a0
                if appendix:
                    own, oth = theta + (1.0 - theta) / m_t, theta
                else:
                    own, oth = (1.0 - theta) + theta / m_t, theta / m_t
                tviews = nv_views[a0:a1]
                coefs = np.where(tviews == v, own, oth)
                phi = (coefs[:, None] * contexts[tviews, tgt, :]).sum(axis=0)
                dot = float(np.dot(f, phi))
                if not math.isfinite(dot):
                    return i
                ga = alpha * (label - _sigmoid(dot))
                acc += ga * phi
                for a in range(a0, a1):
                    vv = int(nv_views[a])
                    contexts[vv, tgt] += (ga * (own if vv == v else oth)) * f
            elif variant == 2:
                fx = contexts[v, tgt]
                dot = float(np.dot(f, fx))
                if not math.isfinite(dot):
                    return i
                ga = alpha * (label - _sigmoid(dot))
                acc += ga * fx
                c0, c1 = int(nv_indptr[tgt]), int(nv_indptr[tgt + 1])
                m_t = c1 - c0
                tmean = contexts[nv_views[c0:c1], tgt, :].mean(axis=0)
                rc_t = 2.0 * gamma * (1.0 - 1.0 / m_t)
                contexts[v, tgt] += ga * f - (alpha * rc_t) * (fx - tmean)
            else:
                fx = contexts[mat, tgt]
                dot = float(np.dot(f, fx))
                if not math.isfinite(dot):
                    return i
                ga = alpha * (label - _sigmoid(dot))
                acc += ga * fx
                contexts[mat, tgt] += ga * f

        if variant == 2:
            centers[mat, u] += acc - (alpha * rc_u) * (f - umean)
        else:
            centers[mat, u] += acc
    return -1
