import numpy as np
import pytest

from mvembed.graph import NetworkBuilder
from mvembed.store import UsageError
from mvembed.viewstats import (agreement_report, node_jaccard,
                               write_agreement_csv, write_histogram_csv)


def build(edges):
    b = NetworkBuilder()
    for view, s, d in edges:
        b.add_edge(view, s, d)
    return b.build()


def test_identical_sets():
    net = build([("A", "0", "1"), ("A", "0", "2"),
                 ("B", "0", "1"), ("B", "0", "2")])
    assert node_jaccard(net, 0, 0, 1) == 1.0


def test_disjoint_sets():
    net = build([("A", "0", "1"), ("B", "0", "2")])
    assert node_jaccard(net, 0, 0, 1) == 0.0


def test_half_overlap():
    # N_v = {1,2,3}, N_w = {2,3,4} -> 2/4
    net = build([("A", "u", "1"), ("A", "u", "2"), ("A", "u", "3"),
                 ("B", "u", "2"), ("B", "u", "3"), ("B", "u", "4")])
    u = net.node_index["u"]
    assert node_jaccard(net, u, 0, 1) == 0.5


def test_symmetry_in_views():
    net = build([("A", "u", "1"), ("A", "u", "2"),
                 ("B", "u", "2"), ("B", "u", "3")])
    u = net.node_index["u"]
    assert node_jaccard(net, u, 0, 1) == node_jaccard(net, u, 1, 0)


def test_both_empty_undefined_one_empty_zero():
    net = build([("A", "0", "1"), ("B", "2", "3")])
    # node 0 has neighbors only in A
    assert node_jaccard(net, 0, 0, 1) == 0.0
    b = NetworkBuilder()
    b.add_edge("A", "0", "1")
    b.add_edge("B", "0", "1")
    b.ensure_node("z")
    net2 = b.build()
    z = net2.node_index["z"]
    assert node_jaccard(net2, z, 0, 1) is None


def test_same_view_rejected():
    net = build([("A", "0", "1"), ("B", "0", "1")])
    with pytest.raises(UsageError):
        node_jaccard(net, 0, 0, 0)


def test_shared_edge_never_decreases_jaccard():
    base = [("A", "u", "1"), ("A", "u", "2"), ("B", "u", "2"), ("B", "u", "3")]
    net = build(base)
    u = net.node_index["u"]
    before = node_jaccard(net, u, 0, 1)
    net2 = build(base + [("A", "u", "9"), ("B", "u", "9")])
    u2 = net2.node_index["u"]
    assert node_jaccard(net2, u2, 0, 1) >= before


def test_report_two_identical_views():
    net = build([("A", "0", "1"), ("A", "1", "2"),
                 ("B", "0", "1"), ("B", "1", "2")])
    report = agreement_report(net, threshold=0.5)
    assert len(report.pairs) == 1
    assert report.pairs[0].proportion == 1.0
    assert report.pairs[0].n_considered == 3


def test_report_hand_computed_five_nodes():
    # per-node J against view pair (A, B):
    #   n0: A{1,2} B{1}   -> 1/2
    #   n1: A{0}   B{0,2} -> 1/2
    #   n2: A{0}   B{1}   -> 0
    #   n3: A{4}   B{}    -> 0 (counted)
    #   n4: A{3}   B{}    -> 0 (counted)
    net = build([("A", "0", "1"), ("A", "0", "2"), ("A", "3", "4"),
                 ("B", "0", "1"), ("B", "1", "2")])
    report = agreement_report(net, threshold=0.4)
    pair = report.pairs[0]
    assert pair.n_considered == 5
    assert pair.proportion == pytest.approx(2 / 5)
    strict = agreement_report(net, threshold=0.5).pairs[0]
    assert strict.proportion == 0.0


def test_report_needs_two_views():
    net = build([("A", "0", "1")])
    with pytest.raises(UsageError):
        agreement_report(net)


def test_relabeling_invariance():
    edges = [("A", "0", "1"), ("A", "1", "2"), ("B", "0", "2"), ("B", "1", "2")]
    renamed = [(v, {"0": "x", "1": "y", "2": "z"}[s],
                {"0": "x", "1": "y", "2": "z"}[d]) for v, s, d in edges]
    r1 = agreement_report(build(edges)).pairs[0]
    r2 = agreement_report(build(renamed)).pairs[0]
    assert r1.proportion == r2.proportion
    assert np.array_equal(r1.histogram, r2.histogram)


def test_csv_outputs(tmp_path):
    net = build([("A", "0", "1"), ("B", "0", "1"), ("B", "1", "2")])
    report = agreement_report(net)
    agg = tmp_path / "agreement.csv"
    hist = tmp_path / "hist.csv"
    write_agreement_csv(report, str(agg))
    write_histogram_csv(report, str(hist))
    lines = agg.read_text().strip().split("\n")
    assert lines[0] == "view_a,view_b,threshold,proportion,n_nodes_considered"
    assert len(lines) == 2
    hlines = hist.read_text().strip().split("\n")
    assert len(hlines) == 1 + 20
