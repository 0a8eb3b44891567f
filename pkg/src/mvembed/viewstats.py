"""Cross-view agreement measured by per-node neighbor-set Jaccard overlap.

For a pair of views, each node contributes the Jaccard coefficient of its
two neighbor sets. Nodes with no neighbors in either view are excluded;
nodes with neighbors in exactly one view score 0 and are counted. The
headline statistic is the proportion of counted nodes whose coefficient
exceeds a threshold (default 0.5).
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .graph import MultiViewNetwork
from .store import UsageError

HISTOGRAM_BINS = 20


def node_jaccard(net: MultiViewNetwork, u: int, v: int, w: int) -> float | None:
    """Jaccard coefficient of u's neighbor sets in views v and w, or None
    when both sets are empty."""
    if v == w:
        raise UsageError("node_jaccard needs two distinct views")
    a = net.neighbors(u, v)
    b = net.neighbors(u, w)
    if len(a) == 0 and len(b) == 0:
        return None
    if len(a) == 0 or len(b) == 0:
        return 0.0
    inter = len(np.intersect1d(a, b, assume_unique=True))
    union = len(a) + len(b) - inter
    return inter / union


@dataclass
class ViewPairAgreement:
    view_a: str
    view_b: str
    threshold: float
    proportion: float
    n_considered: int
    histogram: np.ndarray  # HISTOGRAM_BINS counts over [0, 1]


@dataclass
class AgreementReport:
    threshold: float
    pairs: list[ViewPairAgreement]


def agreement_report(net: MultiViewNetwork,
                     threshold: float = 0.5) -> AgreementReport:
    if net.num_views < 2:
        raise UsageError("agreement report needs at least two views")
    pairs = []
    for v in range(net.num_views):
        for w in range(v + 1, net.num_views):
            coeffs = []
            for u in range(net.num_nodes):
                j = node_jaccard(net, u, v, w)
                if j is not None:
                    coeffs.append(j)
            coeffs = np.asarray(coeffs)
            hist, _ = np.histogram(coeffs, bins=HISTOGRAM_BINS, range=(0.0, 1.0))
            prop = float((coeffs > threshold).mean()) if len(coeffs) else 0.0
            pairs.append(ViewPairAgreement(
                view_a=net.view_names[v], view_b=net.view_names[w],
                threshold=threshold, proportion=prop,
                n_considered=len(coeffs), histogram=hist))
    return AgreementReport(threshold=threshold, pairs=pairs)


def write_agreement_csv(report: AgreementReport, path: str) -> None:
    with io.open(path, "w", encoding="utf-8") as fh:
        fh.write("view_a,view_b,threshold,proportion,n_nodes_considered\n")
        for p in report.pairs:
            fh.write(f"{p.view_a},{p.view_b},{p.threshold},"
                     f"{p.proportion},{p.n_considered}\n")


def write_histogram_csv(report: AgreementReport, path: str) -> None:
    edges = np.linspace(0.0, 1.0, HISTOGRAM_BINS + 1)
    with io.open(path, "w", encoding="utf-8") as fh:
        fh.write("view_a,view_b,bin_low,bin_high,count\n")
        for p in report.pairs:
            for k in range(HISTOGRAM_BINS):
                fh.write(f"{p.view_a},{p.view_b},{edges[k]},{edges[k + 1]},"
                         f"{int(p.histogram[k])}\n")
