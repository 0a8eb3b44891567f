"""Throughput benchmark of the compiled kernel against the pure-Python
fallback on an identical synthetic workload. Run via ``mvembed bench``."""

from __future__ import annotations

import sys
import time

import numpy as np

from ._rng import mix64
from .kernel import get_backend
from .synth import SynthConfig, generate
from .store import init_store
from .walks import WalkConfig, build_noise_table, build_pairs, \
    flatten_noise_tables, merge_and_shuffle


def _workload(num_nodes: int, n_pairs: int):
    labeled = generate(SynthConfig(intrusion=0.2,
                                   nodes_per_class=max(num_nodes // 4, 2),
                                   seed=11))
    net = labeled.net
    wcfg = WalkConfig(walks_multiplier=1, seed=11)
    per_view = build_pairs(net, wcfg)
    pairs = merge_and_shuffle(per_view, wcfg.seed)
    if len(pairs) > n_pairs:
        pairs.centers = pairs.centers[:n_pairs]
        pairs.contexts = pairs.contexts[:n_pairs]
        pairs.views = pairs.views[:n_pairs]
    tables = [build_noise_table(c, x, net.num_nodes) if len(c) else None
              for c, x in per_view]
    return net, pairs, tables


def run_benchmark(num_nodes: int = 2000, dim: int = 128,
                  n_pairs: int = 200_000, negatives: int = 5,
                  out=sys.stdout) -> dict[str, float]:
    net, pairs, tables = _workload(num_nodes, n_pairs)
    noise = flatten_noise_tables(tables)
    results: dict[str, float] = {}
    out.write(f"workload: {len(pairs)} pairs, {net.num_nodes} nodes, "
              f"dim {dim}, {negatives} negatives\n")
    for name in ("c", "python"):
        try:
            backend = get_backend(name)
        except ImportError:
            out.write(f"{name:>8}: unavailable (extension not built)\n")
            continue
        store = init_store(net, "independent", dim, seed=3)
        budget = len(pairs) if name == "c" else min(len(pairs), 20_000)
        start = time.perf_counter()
        backend.train_slice(
            store.centers, store.contexts, pairs.centers, pairs.contexts,
            pairs.views, 0, budget, 0, len(pairs), store.view_mat,
            *noise, store.node_views_indptr, store.node_views,
            0, 0.0, 0.0, 0, negatives, 0.025, 0.025 * 1e-4,
            mix64(3, 0x42454E43))
        elapsed = time.perf_counter() - start
        rate = budget / elapsed
        results[name] = rate
        out.write(f"{name:>8}: {budget} pairs in {elapsed:.2f}s "
                  f"= {rate:,.0f} pairs/s\n")
    if len(results) == 2:
        out.write(f"speedup: {results['c'] / results['python']:.1f}x\n")
    return results
