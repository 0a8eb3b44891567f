"""Per-view random-walk sampling and skip-gram pair extraction.

Every view contributes the same number N of walks (N = multiplier times the
largest non-isolated node count over views). Walks are weight-proportional
first-order walks confined to their view. Node pairs that co-occur within a
window along a walk become (center, context) training pairs, emitted in both
directions; the per-view lists are then joined and shuffled once.

Walk stepping is delegated to the active kernel backend; per-node RNG
streams are derived here so both backends produce identical walks.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import kernel
from ._rng import Stream, mix64
from .graph import MultiViewNetwork, ValidationError

_TAG_ALLOC = 0x57414C4B    # start-count allocation shuffle
_TAG_NODE = 0x4E4F4445     # per-node walk streams
_TAG_JOIN = 0x4A4F494E     # merged-list shuffle


@dataclass(frozen=True)
class WalkConfig:
    walk_length: int = 20
    window: int = 3
    walks_multiplier: int = 50
    seed: int = 1

    def __post_init__(self):
        if self.walk_length < 2:
            raise ValidationError("walk_length must be >= 2")
        if self.window < 1:
            raise ValidationError("window must be >= 1")
        if self.walks_multiplier < 1:
            raise ValidationError("walks_multiplier must be >= 1")


@dataclass
class PairList:
    """Flat (center, context, view) pair arrays, one entry per pair."""

    centers: np.ndarray            # int32
    contexts: np.ndarray           # int32
    views: np.ndarray              # int32

    def __len__(self) -> int:
        return len(self.centers)


def walk_budget(net: MultiViewNetwork, cfg: WalkConfig) -> int:
    """N = multiplier * max over views of the non-isolated node count."""
    counts = [net.non_isolated_count(v) for v in range(net.num_views)]
    n_max = max(counts, default=0)
    if n_max == 0:
        raise ValidationError("all views are empty; nothing to walk")
    return cfg.walks_multiplier * n_max


def _start_allocation(net: MultiViewNetwork, v: int, n_walks: int,
                      cfg: WalkConfig) -> tuple[np.ndarray, np.ndarray]:
    """Assign start counts to non-isolated nodes of view v.

    Counts differ by at most one; the ceil share goes to the first
    (n_walks mod n) nodes of a seeded Fisher-Yates shuffle.
    """
    nodes = net.non_isolated_nodes(v)
    n = len(nodes)
    if n == 0:
        raise ValidationError(f"view {net.view_names[v]!r} has no edges")
    order = nodes.copy()
    stream = Stream(mix64(cfg.seed, _TAG_ALLOC, v))
    for i in range(n - 1, 0, -1):
        j = stream.next_below(i + 1)
        order[i], order[j] = order[j], order[i]
    base, extra = divmod(n_walks, n)
    counts = np.full(n, base, dtype=np.int64)
    counts[:extra] += 1
    return order, counts


def generate_walks(net: MultiViewNetwork, v: int, n_walks: int,
                   cfg: WalkConfig) -> np.ndarray:
    """Sample exactly ``n_walks`` weight-proportional walks in view v.

    Returns an int32 array of shape (n_walks, walk_length) whose rows are
    grouped by start node in allocation order. Fully deterministic: node u
    draws all of its walks from a stream keyed by (seed, view, u).
    """
    order, counts = _start_allocation(net, v, n_walks, cfg)
    keep = counts > 0
    order, counts = order[keep], counts[keep]
    seeds = np.array([mix64(cfg.seed, _TAG_NODE, v, int(u)) for u in order],
                     dtype=np.uint64)
    csr = net.views[v]
    out = np.empty((n_walks, cfg.walk_length), dtype=np.int32)
    kernel.sample_walk_groups(csr.indptr, csr.neighbors, csr.cumw,
                              order.astype(np.int32), counts, seeds, out)
    return out


def extract_pairs(walks: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """All ordered (center, context) pairs within ``window`` walk steps.

    For every position i and every j != i with |i - j| <= window, the pair
    (walk[i], walk[j]) is emitted, so each co-occurrence appears in both
    directions. Output order is fixed (offset-major) for reproducibility.
    """
    if walks.size == 0:
        raise ValidationError("no walks to extract pairs from")
    length = walks.shape[1]
    cen, ctx = [], []
    for d in range(1, window + 1):
        if d >= length:
            break
        left = walks[:, :length - d].ravel()
        right = walks[:, d:].ravel()
        cen.append(left)
        ctx.append(right)
        cen.append(right)
        ctx.append(left)
    return np.concatenate(cen), np.concatenate(ctx)


def build_pairs(net: MultiViewNetwork, cfg: WalkConfig,
                dump_path: str | None = None) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-view pair lists for every view; empty views yield empty lists."""
    n_walks = walk_budget(net, cfg)
    per_view = []
    dump = io.open(dump_path, "w", encoding="utf-8") if dump_path else None
    try:
        for v in range(net.num_views):
            if net.non_isolated_count(v) == 0:
                empty = np.empty(0, dtype=np.int32)
                per_view.append((empty, empty))
                continue
            walks = generate_walks(net, v, n_walks, cfg)
            if dump is not None:
                for row in walks:
                    dump.write(" ".join(net.node_labels[u] for u in row) + "\n")
            per_view.append(extract_pairs(walks, cfg.window))
    finally:
        if dump is not None:
            dump.close()
    return per_view


def merge_and_shuffle(per_view: list[tuple[np.ndarray, np.ndarray]],
                      seed: int) -> PairList:
    """Join per-view pair lists, tag with view ids, apply one seeded shuffle."""
    sizes = [len(c) for c, _ in per_view]
    total = sum(sizes)
    if total == 0:
        raise ValidationError("no pairs to merge")
    centers = np.concatenate([c for c, _ in per_view])
    contexts = np.concatenate([x for _, x in per_view])
    views = np.repeat(np.arange(len(per_view), dtype=np.int32), sizes)
    rng = np.random.Generator(np.random.PCG64(mix64(seed, _TAG_JOIN)))
    perm = rng.permutation(total)
    return PairList(centers[perm].astype(np.int32),
                    contexts[perm].astype(np.int32),
                    views[perm].astype(np.int32))


@dataclass
class NoiseTable:
    """Alias sampler drawing node u with probability proportional to
    count(u) ** 0.75, where counts come from pair-list occurrences."""

    nodes: np.ndarray     # int32, nodes with positive count
    prob: np.ndarray      # float64 alias acceptance probabilities
    alias: np.ndarray     # int64 alias slots
    counts: np.ndarray = field(repr=False, default=None)  # occurrence counts

    def sample(self, stream: Stream) -> int:
        """Draw one node; consumes exactly two uniforms (as the kernels do)."""
        k = int(stream.next_double() * len(self.nodes))
        if k >= len(self.nodes):
            k = len(self.nodes) - 1
        slot = k if stream.next_double() < self.prob[k] else self.alias[k]
        return int(self.nodes[slot])


def _vose_alias(mass: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = len(mass)
    scaled = mass * (n / mass.sum())
    prob = np.zeros(n, dtype=np.float64)
    alias = np.zeros(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    scaled = scaled.copy()
    while small and large:
        s = small.pop()
        l = large.pop()
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] -= 1.0 - scaled[s]
        (small if scaled[l] < 1.0 else large).append(l)
    for i in large:
        prob[i] = 1.0
        alias[i] = i
    for i in small:
        prob[i] = 1.0      # leftovers are 1.0 up to rounding
        alias[i] = i
    return prob, alias


def build_noise_table(centers: np.ndarray, contexts: np.ndarray,
                      num_nodes: int) -> NoiseTable:
    """Occurrence counts over both pair positions, raised to the 3/4 power."""
    if len(centers) == 0:
        raise ValidationError("cannot build a noise table from an empty pair list")
    counts = (np.bincount(centers, minlength=num_nodes)
              + np.bincount(contexts, minlength=num_nodes))
    nodes = np.nonzero(counts)[0].astype(np.int32)
    mass = counts[nodes].astype(np.float64) ** 0.75
    prob, alias = _vose_alias(mass)
    return NoiseTable(nodes=nodes, prob=prob, alias=alias, counts=counts[nodes])


def flatten_noise_tables(tables: list[NoiseTable | None]):
    """Concatenate per-view alias tables for the training kernel.

    Views without a table (no pairs) get empty slices; drawing from them is
    a bug the kernel never exercises because such views contribute no pairs.
    """
    sizes = [0 if t is None else len(t.nodes) for t in tables]
    off = np.zeros(len(tables) + 1, dtype=np.int64)
    np.cumsum(sizes, out=off[1:])
    if off[-1] == 0:
        raise ValidationError("no noise tables to flatten")
    prob = np.concatenate([t.prob for t in tables if t is not None])
    alias = np.concatenate([t.alias for t in tables if t is not None])
    node = np.concatenate([t.nodes for t in tables if t is not None])
    return prob.astype(np.float64), alias.astype(np.int64), \
        node.astype(np.int32), off
