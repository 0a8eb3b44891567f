import numpy as np
import pytest
from scipy import stats

from mvembed._rng import Stream, mix64
from mvembed.graph import NetworkBuilder, ValidationError
from mvembed.kernel import get_backend
from mvembed.walks import (NoiseTable, WalkConfig, build_noise_table,
                           build_pairs, extract_pairs, generate_walks,
                           merge_and_shuffle, walk_budget)


def path_graph(n=3, view="A"):
    b = NetworkBuilder()
    for i in range(n - 1):
        b.add_edge(view, str(i), str(i + 1))
    return b.build()


def two_view_net():
    b = NetworkBuilder()
    b.add_edge("A", "0", "1")
    b.add_edge("A", "1", "2")
    b.add_edge("B", "0", "2")
    return b.build()


def test_config_validation():
    with pytest.raises(ValidationError):
        WalkConfig(walk_length=1)
    with pytest.raises(ValidationError):
        WalkConfig(window=0)
    with pytest.raises(ValidationError):
        WalkConfig(walks_multiplier=0)


def test_walk_budget_uses_largest_view():
    b = NetworkBuilder()
    for i in range(0, 100, 2):
        b.add_edge("A", f"a{i}", f"a{i+1}")
    for i in range(0, 60, 2):
        b.add_edge("B", f"a{i}", f"a{i+1}")
    net = b.build()
    assert net.non_isolated_count(0) == 100
    assert net.non_isolated_count(1) == 60
    assert walk_budget(net, WalkConfig(walks_multiplier=50)) == 5000


def test_walk_budget_single_view():
    b = NetworkBuilder()
    for i in range(0, 10, 2):
        b.add_edge("A", str(i), str(i + 1))
    assert walk_budget(b.build(), WalkConfig(walks_multiplier=1)) == 10


def test_walk_budget_empty():
    b = NetworkBuilder()
    b.ensure_node("1")
    b.ensure_view("A")
    with pytest.raises(ValidationError):
        walk_budget(b.build(), WalkConfig())


def test_start_counts_floor_ceil():
    # 4 non-isolated nodes, 10 walks -> start counts are a permutation of 3,3,2,2
    b = NetworkBuilder()
    b.add_edge("A", "0", "1")
    b.add_edge("A", "2", "3")
    net = b.build()
    walks = generate_walks(net, 0, 10, WalkConfig(seed=5))
    starts = walks[:, 0]
    counts = np.bincount(starts, minlength=4)
    assert sorted(counts.tolist()) == [2, 2, 3, 3]
    assert counts.sum() == 10


def test_start_counts_exact_for_every_view():
    net = two_view_net()
    for v in range(2):
        n_walks = 7
        walks = generate_walks(net, v, n_walks, WalkConfig(seed=1))
        starts = np.bincount(walks[:, 0], minlength=net.num_nodes)
        non_iso = net.non_isolated_nodes(v)
        assert starts.sum() == n_walks
        assert set(np.nonzero(starts)[0]) <= set(non_iso.tolist())
        assert starts[non_iso].max() - starts[non_iso].min() <= 1


def test_walks_stay_in_view_and_follow_edges():
    net = two_view_net()
    walks = generate_walks(net, 1, 20, WalkConfig(seed=3))
    nodes_b = {net.node_index["0"], net.node_index["2"]}
    for row in walks:
        assert set(row.tolist()) <= nodes_b
        for a, b in zip(row[:-1], row[1:]):
            assert net.edge_weight(int(a), int(b), 1) > 0


def test_path_middle_uniform():
    net = path_graph(3)
    mid = net.node_index["1"]
    walks = generate_walks(net, 0, 3 * 10_000, WalkConfig(walk_length=2, seed=8))
    from_mid = walks[walks[:, 0] == mid][:, 1]
    frac = np.mean(from_mid == net.node_index["0"])
    assert abs(frac - 0.5) < 0.02


def test_weighted_transition_monte_carlo():
    # star center c with weights 1 and 3: P(c -> heavy leaf) = 0.75
    b = NetworkBuilder()
    b.add_edge("A", "c", "a", 1.0)
    b.add_edge("A", "c", "b", 3.0)
    net = b.build()
    c = net.node_index["c"]
    heavy = net.node_index["b"]
    walks = generate_walks(net, 0, 3 * 100_000,
                           WalkConfig(walk_length=2, seed=4))
    from_c = walks[walks[:, 0] == c][:, 1]
    assert len(from_c) == 100_000
    assert abs(np.mean(from_c == heavy) - 0.75) < 0.01


def test_walks_deterministic_and_backend_identical():
    net = two_view_net()
    cfg = WalkConfig(seed=11)
    w1 = generate_walks(net, 0, 9, cfg)
    w2 = generate_walks(net, 0, 9, cfg)
    assert np.array_equal(w1, w2)
    # both backends consume the same streams
    try:
        get_backend("c")
    except ImportError:
        pytest.skip("compiled backend not built")
    import mvembed.walks as walks_mod
    import mvembed.kernel as kernel_mod
    real = kernel_mod.sample_walk_groups
    try:
        kernel_mod.sample_walk_groups = get_backend("python").sample_walk_groups
        w3 = generate_walks(net, 0, 9, cfg)
    finally:
        kernel_mod.sample_walk_groups = real
    assert np.array_equal(w1, w3)


def test_extract_pairs_window_one():
    walks = np.array([[0, 1, 2]], dtype=np.int32)
    cen, ctx = extract_pairs(walks, 1)
    got = set(zip(cen.tolist(), ctx.tolist()))
    assert got == {(0, 1), (1, 0), (1, 2), (2, 1)}
    assert len(cen) == 4


def test_extract_pairs_window_covers_walk():
    walks = np.array([[0, 1, 2]], dtype=np.int32)
    cen, ctx = extract_pairs(walks, 3)
    got = set(zip(cen.tolist(), ctx.tolist()))
    assert (0, 2) in got and (2, 0) in got
    assert len(cen) == 6


def brute_force_pairs(walk, window):
    out = []
    for i in range(len(walk)):
        for j in range(len(walk)):
            if i != j and abs(i - j) <= window:
                out.append((walk[i], walk[j]))
    return out


def test_extract_pairs_count_matches_brute_force():
    rng = np.random.default_rng(0)
    walk = rng.integers(0, 50, size=20).astype(np.int32)
    cen, ctx = extract_pairs(walk[None, :], 3)
    expected = brute_force_pairs(walk.tolist(), 3)
    assert len(cen) == len(expected) == 108
    assert sorted(zip(cen.tolist(), ctx.tolist())) == sorted(expected)


def test_merge_sizes_and_determinism():
    a = (np.arange(3, dtype=np.int32), np.arange(3, dtype=np.int32))
    b = (np.arange(5, dtype=np.int32), np.arange(5, dtype=np.int32))
    merged = merge_and_shuffle([a, b], seed=3)
    assert len(merged) == 8
    again = merge_and_shuffle([a, b], seed=3)
    assert np.array_equal(merged.centers, again.centers)
    assert np.array_equal(merged.views, again.views)
    assert np.bincount(merged.views).tolist() == [3, 5]


def test_merge_shuffle_uniform_permutations():
    # 4 distinct elements, 10^4 seeds: each of the 24 orders near uniform
    base = (np.array([0, 1, 2, 3], dtype=np.int32),) * 2
    counts: dict[tuple, int] = {}
    for seed in range(10_000):
        merged = merge_and_shuffle([base], seed=seed)
        key = tuple(merged.centers.tolist())
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 24
    expected = 10_000 / 24
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    # 23 dof; 3-sigma-ish upper bound
    assert chi2 < stats.chi2.ppf(0.999, 23)


def test_noise_counts_both_positions():
    cen = np.array([0, 0, 1], dtype=np.int32)
    ctx = np.array([1, 2, 0], dtype=np.int32)
    table = build_noise_table(cen, ctx, 4)
    assert table.nodes.tolist() == [0, 1, 2]
    assert table.counts.tolist() == [3, 2, 1]


def test_noise_table_power_law_odds():
    # counts 16 and 81 -> sampling odds 8 : 27
    cen = np.array([0] * 8 + [1] * 40, dtype=np.int32)
    ctx = np.array([0] * 8 + [1] * 41, dtype=np.int32)
    table = build_noise_table(cen, ctx, 2)
    assert table.counts.tolist() == [16, 81]
    stream = Stream(mix64(123))
    draws = np.array([table.sample(stream) for _ in range(200_000)])
    frac = np.mean(draws == 1)
    assert abs(frac - 27.0 / 35.0) < 0.005


def test_noise_table_single_node():
    cen = np.array([3, 3], dtype=np.int32)
    ctx = np.array([3, 3], dtype=np.int32)
    table = build_noise_table(cen, ctx, 5)
    stream = Stream(7)
    assert {table.sample(stream) for _ in range(10)} == {3}


def test_noise_table_monte_carlo_three_nodes():
    cen = np.repeat(np.array([0, 1, 2], dtype=np.int32), [1, 2, 3])
    ctx = cen.copy()
    table = build_noise_table(cen, ctx, 3)
    mass = np.array([2.0, 4.0, 6.0]) ** 0.75
    want = mass / mass.sum()
    stream = Stream(mix64(99))
    draws = np.array([table.sample(stream) for _ in range(1_000_000)])
    got = np.bincount(draws, minlength=3) / len(draws)
    assert np.abs(got - want).max() < 0.005


def test_empty_noise_table_rejected():
    with pytest.raises(ValidationError):
        build_noise_table(np.empty(0, dtype=np.int32),
                          np.empty(0, dtype=np.int32), 3)


def test_build_pairs_dump_walks(tmp_path):
    net = two_view_net()
    dump = tmp_path / "walks.txt"
    per_view = build_pairs(net, WalkConfig(walks_multiplier=2, seed=5),
                           dump_path=str(dump))
    assert len(per_view) == 2
    lines = dump.read_text().strip().split("\n")
    n_walks = walk_budget(net, WalkConfig(walks_multiplier=2, seed=5))
    assert len(lines) == 2 * n_walks
    assert all(len(line.split(" ")) == 20 for line in lines)
