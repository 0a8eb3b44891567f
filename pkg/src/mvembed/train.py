"""Asynchronous SGD over the merged pair list with negative sampling.

One ascent step per (center, context, view) pair on the per-pair objective:

* plain skip-gram (independent / one-space / view-merging / single-view):
  log sigmoid(f . x_n) + sum_i log sigmoid(-f . x_n'_i)
* constrained: the context vector is the blend of the context rows over the
  node's non-isolated views (own view gets 1 - theta + theta/m, every other
  view theta/m); gradients flow into every blended row.
* regularized: plain skip-gram plus a penalty, descended alongside the
  likelihood ascent, that pulls each view's rows toward the node's
  cross-view mean. The center penalty is weighted by (negatives + 1)
  because it appears once per positive and once per negative term.

The per-node view count replaces the global view count wherever the blend
or the mean is formed, so nodes isolated in some views only mix the views
they actually touch.

Step size decays linearly from alpha0 to alpha_min over epochs * |pairs|.
Worker threads consume disjoint contiguous slices of the pair list and
update shared matrices without locks; single-threaded runs are exactly
reproducible.
"""

from __future__ import annotations

import logging
import sys
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernel
from ._rng import Stream, mix64
from ._sgns_py import _sigmoid as sigmoid
from .graph import MultiViewNetwork, ValidationError, merge_views, single_view
from .store import (EmbeddingStore, PER_VIEW_VARIANTS, UsageError, VARIANTS,
                    blend_coefficients, final_embedding, init_store)
from .walks import (NoiseTable, PairList, WalkConfig, build_noise_table,
                    build_pairs, flatten_noise_tables, merge_and_shuffle)

logger = logging.getLogger("mvembed.train")

_TAG_TRAIN = 0x54524E00


class TrainingDivergedError(RuntimeError):
    """A non-finite value appeared during training."""

    def __init__(self, pair_index: int):
        super().__init__(f"non-finite update at pair index {pair_index}")
        self.pair_index = pair_index


@dataclass
class TrainConfig:
    variant: str
    dim: int = 128
    theta: float = 0.0
    gamma: float = 0.0
    negatives: int = 5
    epochs: int = 1
    alpha0: float = 0.025
    alpha_min: float | None = None
    seed: int = 1
    threads: int = 1
    appendix_gradients: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown variant {self.variant!r}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValidationError("theta must lie in [0, 1]")
        if self.gamma < 0.0:
            raise ValidationError("gamma must be non-negative")
        if self.theta != 0.0 and self.variant != "con":
            raise UsageError("theta applies only to the con variant")
        if self.gamma != 0.0 and self.variant != "reg":
            raise UsageError("gamma applies only to the reg variant")
        if self.negatives < 0 or self.epochs < 1 or self.threads < 1:
            raise ValidationError("negatives >= 0, epochs >= 1, threads >= 1 required")
        if self.alpha0 <= 0.0:
            raise ValidationError("alpha0 must be positive")
        if self.alpha_min is None:
            self.alpha_min = 1e-4 * self.alpha0
        if self.alpha_min <= 0.0:
            raise ValidationError("alpha_min must be positive")

    def variant_code(self) -> int:
        """Kernel dispatch; con at theta=0 and reg at gamma=0 run the plain
        path so they match the independent model bit for bit."""
        if self.variant == "con" and self.theta > 0.0:
            return 1
        if self.variant == "reg" and self.gamma > 0.0:
            return 2
        return 0


def step_size(cfg: TrainConfig, t: int, total: int) -> float:
    return max(cfg.alpha_min, cfg.alpha0 * (1.0 - t / total))


def train(store: EmbeddingStore, pairs: PairList,
          noise_tables: list[NoiseTable | None],
          cfg: TrainConfig) -> EmbeddingStore:
    """Train the store in place over the merged pair list."""
    if len(pairs) == 0:
        raise ValidationError("empty pair list")
    if cfg.variant != store.variant:
        raise UsageError(f"config variant {cfg.variant!r} does not match "
                         f"store variant {store.variant!r}")
    noise_prob, noise_alias, noise_node, noise_off = \
        flatten_noise_tables(noise_tables)
    n_pairs = len(pairs)
    total = n_pairs * cfg.epochs
    code = cfg.variant_code()

    bounds = [round(w * n_pairs / cfg.threads) for w in range(cfg.threads + 1)]
    started = time.perf_counter()
    for epoch in range(cfg.epochs):
        results = [-1] * cfg.threads

        def run(w: int) -> None:
            results[w] = kernel.train_slice(
                store.centers, store.contexts,
                pairs.centers, pairs.contexts, pairs.views,
                bounds[w], bounds[w + 1], epoch * n_pairs, total,
                store.view_mat, noise_prob, noise_alias, noise_node,
                noise_off, store.node_views_indptr, store.node_views,
                code, cfg.theta, cfg.gamma, int(cfg.appendix_gradients),
                cfg.negatives, cfg.alpha0, cfg.alpha_min,
                mix64(cfg.seed, _TAG_TRAIN, epoch, w))

        if cfg.threads == 1:
            run(0)
        else:
            workers = [threading.Thread(target=run, args=(w,))
                       for w in range(cfg.threads)]
            for th in workers:
                th.start()
            for th in workers:
                th.join()
        bad = [r for r in results if r >= 0]
        if bad:
            raise TrainingDivergedError(min(bad))
        if logger.isEnabledFor(logging.INFO):
            done = (epoch + 1) * n_pairs
            rate = done / max(time.perf_counter() - started, 1e-9)
            logger.info(
                "epoch %d/%d: %.0f pairs/s, alpha=%.6f, objective~%.4f",
                epoch + 1, cfg.epochs, rate,
                step_size(cfg, done - 1, total),
                estimate_objective(store, pairs, noise_tables, cfg))
    store.check_finite()
    return store


def run_embedding(net: MultiViewNetwork, cfg: TrainConfig,
                  walk_cfg: WalkConfig, view: str | None = None,
                  dump_walks: str | None = None,
                  ) -> tuple[EmbeddingStore, np.ndarray]:
    """Full pipeline: walks, pairs, noise tables, training, final table."""
    if cfg.variant == "view-merging":
        work_net = merge_views(net)
    elif cfg.variant == "single-view":
        if view is None:
            raise UsageError("single-view requires a view name")
        if view not in net.view_index:
            raise UsageError(f"unknown view {view!r}; available: "
                             f"{', '.join(net.view_names)}")
        work_net = single_view(net, net.view_index[view])
    else:
        work_net = net
    per_view = build_pairs(work_net, walk_cfg, dump_path=dump_walks)
    pairs = merge_and_shuffle(per_view, walk_cfg.seed)
    tables = [build_noise_table(c, x, work_net.num_nodes) if len(c) else None
              for c, x in per_view]
    store = init_store(work_net, cfg.variant, cfg.dim, cfg.seed)
    train(store, pairs, tables, cfg)
    return store, final_embedding(store)


# ---------------------------------------------------------------------------
# Reference per-pair objective and gradients (the slow, obviously-correct
# form used by finite-difference checks and small-scale tests).
# ---------------------------------------------------------------------------

def _log_sigmoid(x: float) -> float:
    # log(sigmoid(x)) without overflow
    if x >= 0.0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


def _phi(store: EmbeddingStore, tgt: int, v: int, theta: float,
         appendix: bool) -> np.ndarray:
    views = store.views_of_node(tgt)
    own, oth = blend_coefficients(theta, len(views), appendix)
    out = np.zeros(store.view_dim)
    for vv in views:
        out += (own if vv == v else oth) * store.contexts[vv, tgt]
    return out


def _residual(mats: np.ndarray, store: EmbeddingStore, node: int,
              v: int) -> np.ndarray:
    views = store.views_of_node(node)
    return mats[v, node] - mats[views, node, :].mean(axis=0)


def objective_plain(store, u: int, n: int, v: int, negatives) -> float:
    mat = int(store.view_mat[v])
    f = store.centers[mat, u]
    val = _log_sigmoid(float(np.dot(f, store.contexts[mat, n])))
    for nn in negatives:
        val += _log_sigmoid(-float(np.dot(f, store.contexts[mat, nn])))
    return val


def grad_plain(store, u: int, n: int, v: int, negatives) -> dict:
    mat = int(store.view_mat[v])
    f = store.centers[mat, u]
    grads: dict = {}
    acc = np.zeros(store.view_dim)
    for tgt, label in [(n, 1.0)] + [(nn, 0.0) for nn in negatives]:
        x = store.contexts[mat, tgt]
        g = label - sigmoid(float(np.dot(f, x)))
        acc += g * x
        key = ("context", mat, tgt)
        grads[key] = grads.get(key, 0.0) + g * f
    grads[("center", mat, u)] = acc
    return grads


def objective_con(store, u: int, n: int, v: int, negatives, theta: float,
                  appendix: bool = False) -> float:
    f = store.centers[v, u]
    val = _log_sigmoid(float(np.dot(f, _phi(store, n, v, theta, appendix))))
    for nn in negatives:
        val += _log_sigmoid(-float(np.dot(f, _phi(store, nn, v, theta, appendix))))
    return val


def grad_con(store, u: int, n: int, v: int, negatives, theta: float,
             appendix: bool = False) -> dict:
    f = store.centers[v, u]
    grads: dict = {}
    acc = np.zeros(store.view_dim)
    for tgt, label in [(n, 1.0)] + [(nn, 0.0) for nn in negatives]:
        phi = _phi(store, tgt, v, theta, appendix)
        g = label - sigmoid(float(np.dot(f, phi)))
        acc += g * phi
        views = store.views_of_node(tgt)
        own, oth = blend_coefficients(theta, len(views), appendix)
        for vv in views:
            key = ("context", int(vv), tgt)
            grads[key] = grads.get(key, 0.0) + g * (own if vv == v else oth) * f
    grads[("center", v, u)] = acc
    return grads


def objective_reg(store, u: int, n: int, v: int, negatives,
                  gamma: float) -> float:
    f = store.centers[v, u]
    k = len(negatives)
    res_u = _residual(store.centers, store, u, v)
    val = _log_sigmoid(float(np.dot(f, store.contexts[v, n])))
    val -= gamma * (k + 1) * float(np.dot(res_u, res_u))
    res_n = _residual(store.contexts, store, n, v)
    val -= gamma * float(np.dot(res_n, res_n))
    for nn in negatives:
        val += _log_sigmoid(-float(np.dot(f, store.contexts[v, nn])))
        res = _residual(store.contexts, store, nn, v)
        val -= gamma * float(np.dot(res, res))
    return val


def grad_reg(store, u: int, n: int, v: int, negatives, gamma: float) -> dict:
    f = store.centers[v, u]
    k = len(negatives)
    grads: dict = {}
    acc = np.zeros(store.view_dim)
    for tgt, label in [(n, 1.0)] + [(nn, 0.0) for nn in negatives]:
        x = store.contexts[v, tgt]
        g = label - sigmoid(float(np.dot(f, x)))
        acc += g * x
        m_t = len(store.views_of_node(tgt))
        res = _residual(store.contexts, store, tgt, v)
        key = ("context", v, tgt)
        grads[key] = grads.get(key, 0.0) + g * f \
            - 2.0 * gamma * (1.0 - 1.0 / m_t) * res
    m_u = len(store.views_of_node(u))
    res_u = _residual(store.centers, store, u, v)
    grads[("center", v, u)] = acc \
        - 2.0 * gamma * (k + 1) * (1.0 - 1.0 / m_u) * res_u
    return grads


def pair_objective(store, u, n, v, negatives, cfg: TrainConfig) -> float:
    code = cfg.variant_code()
    if code == 1:
        return objective_con(store, u, n, v, negatives, cfg.theta,
                             cfg.appendix_gradients)
    if code == 2:
        return objective_reg(store, u, n, v, negatives, cfg.gamma)
    return objective_plain(store, u, n, v, negatives)


def pair_gradients(store, u, n, v, negatives, cfg: TrainConfig) -> dict:
    code = cfg.variant_code()
    if code == 1:
        return grad_con(store, u, n, v, negatives, cfg.theta,
                        cfg.appendix_gradients)
    if code == 2:
        return grad_reg(store, u, n, v, negatives, cfg.gamma)
    return grad_plain(store, u, n, v, negatives)


def estimate_objective(store, pairs: PairList,
                       noise_tables: list[NoiseTable | None],
                       cfg: TrainConfig, sample: int = 1000) -> float:
    """Mean per-pair objective over a prefix sample; diagnostics only."""
    m = min(sample, len(pairs))
    stream = Stream(mix64(cfg.seed, 0x4553544D))
    total = 0.0
    for i in range(m):
        v = int(pairs.views[i])
        n = int(pairs.contexts[i])
        negs = [noise_tables[v].sample(stream) for _ in range(cfg.negatives)]
        total += pair_objective(store, int(pairs.centers[i]), n, v, negs, cfg)
    return total / max(m, 1)


# ---------------------------------------------------------------------------
# Exact softmax oracle (small graphs only): the loss the negative-sampling
# trainer approximates, with the partition function computed over all nodes.
# ---------------------------------------------------------------------------

def _log_partition(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(logits - m).sum(axis=1, keepdims=True))).ravel()


def softmax_row(store: EmbeddingStore, v: int, u: int) -> np.ndarray:
    """p(. | u) over all nodes in view v; rows sum to one."""
    mat = int(store.view_mat[v])
    logits = store.contexts[mat] @ store.centers[mat, u]
    logits -= logits.max()
    e = np.exp(logits)
    return e / e.sum()


def full_softmax_loss(store: EmbeddingStore, v: int, pair_centers,
                      pair_contexts) -> float:
    """Negative log-likelihood of the pairs under the exact per-view
    softmax. Needs O(|U|^2) memory; oracle and test use only."""
    mat = int(store.view_mat[v])
    logits = store.centers[mat] @ store.contexts[mat].T
    logz = _log_partition(logits)
    picked = logits[pair_centers, pair_contexts]
    return float((logz[pair_centers] - picked).sum())


def exact_softmax_gradients(centers: np.ndarray, contexts: np.ndarray,
                            pair_centers, pair_contexts
                            ) -> tuple[np.ndarray, np.ndarray, float]:
    """Batch gradient of the exact softmax loss for one view's matrices."""
    n = centers.shape[0]
    counts = np.zeros((n, n))
    np.add.at(counts, (pair_centers, pair_contexts), 1.0)
    logits = centers @ contexts.T
    logz = _log_partition(logits)
    loss = float((counts * (logz[:, None] - logits)).sum())
    row_totals = counts.sum(axis=1, keepdims=True)
    probs = np.exp(logits - logz[:, None])
    delta = row_totals * probs - counts
    return delta @ contexts, delta.T @ centers, loss
