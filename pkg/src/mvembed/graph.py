"""In-memory multi-view network model and edge-list ingestion.

A multi-view network is one node set shared by several weighted undirected
edge sets ("views"). Nodes carry external string labels mapped to dense
integer ids; per-view adjacency is stored in CSR form so walk sampling can
run over flat arrays.

Edge-list file format (UTF-8, tab-separated, ``#`` comments skipped)::

    view<TAB>src<TAB>dst[<TAB>weight]

Missing weights default to 1.0. Duplicate (view, src, dst) lines accumulate
their weights. Self-loops are rejected.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np


class ParseError(ValueError):
    """Malformed edge-list input; carries the 1-based line number."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ValidationError(ValueError):
    """Structurally invalid network data (bad weight, self-loop, empty)."""


@dataclass(frozen=True)
class ViewCSR:
    """Symmetric adjacency of one view in CSR form.

    ``cumw`` holds the running sum of ``weights`` within each node's slice,
    so a weighted neighbor draw is one binary search.
    """

    indptr: np.ndarray    # int64, shape (num_nodes + 1,)
    neighbors: np.ndarray  # int32
    weights: np.ndarray   # float64
    cumw: np.ndarray      # float64, per-node cumulative weights

    @property
    def num_edges(self) -> int:
        # each undirected edge stored in both directions
        return len(self.neighbors) // 2


class MultiViewNetwork:
    """Immutable multi-view network; safe for concurrent reads."""

    def __init__(self, node_labels: list[str], view_names: list[str],
                 views: list[ViewCSR]):
        self.node_labels = node_labels
        self.node_index = {lab: i for i, lab in enumerate(node_labels)}
        self.view_names = view_names
        self.view_index = {name: i for i, name in enumerate(view_names)}
        self.views = views

    @property
    def num_nodes(self) -> int:
        return len(self.node_labels)

    @property
    def num_views(self) -> int:
        return len(self.view_names)

    def degree(self, u: int, v: int) -> int:
        csr = self.views[v]
        return int(csr.indptr[u + 1] - csr.indptr[u])

    def neighbors(self, u: int, v: int) -> np.ndarray:
        csr = self.views[v]
        return csr.neighbors[csr.indptr[u]:csr.indptr[u + 1]]

    def neighbor_weights(self, u: int, v: int) -> np.ndarray:
        csr = self.views[v]
        return csr.weights[csr.indptr[u]:csr.indptr[u + 1]]

    def edge_weight(self, u: int, w: int, v: int) -> float:
        """Weight of edge (u, w) in view v, or 0.0 if absent."""
        csr = self.views[v]
        sl = slice(csr.indptr[u], csr.indptr[u + 1])
        hits = np.nonzero(csr.neighbors[sl] == w)[0]
        if len(hits) == 0:
            return 0.0
        return float(csr.weights[sl][hits[0]])

    def non_isolated_nodes(self, v: int) -> np.ndarray:
        """Ids of nodes with at least one edge in view v, ascending."""
        csr = self.views[v]
        deg = np.diff(csr.indptr)
        return np.nonzero(deg > 0)[0].astype(np.int32)

    def non_isolated_count(self, v: int) -> int:
        return int(len(self.non_isolated_nodes(v)))

    def total_weight(self, v: int) -> float:
        """Sum of weights over the view's undirected edge set."""
        return float(self.views[v].weights.sum()) / 2.0

    def node_view_lists(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-node lists of views where the node has >= 1 edge.

        Returns (indptr, flat) in CSR layout: views of node u are
        ``flat[indptr[u]:indptr[u+1]]``, ascending view ids.
        """
        n = self.num_nodes
        masks = np.zeros((n, self.num_views), dtype=bool)
        for v, csr in enumerate(self.views):
            masks[np.diff(csr.indptr) > 0, v] = True
        counts = masks.sum(axis=1)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        flat = np.nonzero(masks)[1].astype(np.int32)
        return indptr, flat

    def views_of_node(self, u: int) -> list[int]:
        return [v for v in range(self.num_views) if self.degree(u, v) > 0]


def _build_csr(num_nodes: int, edges: dict[tuple[int, int], float]) -> ViewCSR:
    """edges maps (u, w) with u < w to weight; emits symmetric CSR."""
    m = len(edges)
    src = np.empty(2 * m, dtype=np.int32)
    dst = np.empty(2 * m, dtype=np.int32)
    wgt = np.empty(2 * m, dtype=np.float64)
    for k, ((u, w), x) in enumerate(edges.items()):
        src[2 * k], dst[2 * k], wgt[2 * k] = u, w, x
        src[2 * k + 1], dst[2 * k + 1], wgt[2 * k + 1] = w, u, x
    order = np.lexsort((dst, src))
    src, dst, wgt = src[order], dst[order], wgt[order]
    indptr = np.zeros(num_nodes + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    np.cumsum(indptr, out=indptr)
    cumw = wgt.copy()
    for u in range(num_nodes):
        lo, hi = indptr[u], indptr[u + 1]
        if hi > lo:
            np.cumsum(wgt[lo:hi], out=cumw[lo:hi])
    return ViewCSR(indptr=indptr, neighbors=dst, weights=wgt, cumw=cumw)


class NetworkBuilder:
    """Accumulates edges, then freezes into a MultiViewNetwork."""

    def __init__(self, binarize: bool = False):
        self.binarize = binarize
        self._labels: list[str] = []
        self._index: dict[str, int] = {}
        self._view_names: list[str] = []
        self._view_index: dict[str, int] = {}
        self._edges: list[dict[tuple[int, int], float]] = []

    def ensure_node(self, label: str) -> int:
        i = self._index.get(label)
        if i is None:
            i = len(self._labels)
            self._index[label] = i
            self._labels.append(label)
        return i

    def ensure_view(self, name: str) -> int:
        v = self._view_index.get(name)
        if v is None:
            v = len(self._view_names)
            self._view_index[name] = v
            self._view_names.append(name)
            self._edges.append({})
        return v

    def add_edge(self, view: str, src: str, dst: str, weight: float = 1.0,
                 line_no: int | None = None) -> None:
        where = f"line {line_no}: " if line_no is not None else ""
        if weight <= 0.0 or not np.isfinite(weight):
            raise ValidationError(f"{where}non-positive weight {weight!r} "
                                  f"on edge {src!r}-{dst!r}")
        if src == dst:
            raise ValidationError(f"{where}self-loop on node {src!r} rejected")
        v = self.ensure_view(view)
        a, b = self.ensure_node(src), self.ensure_node(dst)
        key = (a, b) if a < b else (b, a)
        bucket = self._edges[v]
        bucket[key] = bucket.get(key, 0.0) + weight

    def build(self) -> MultiViewNetwork:
        n = len(self._labels)
        views = []
        for bucket in self._edges:
            if self.binarize:
                bucket = {k: 1.0 for k in bucket}
            views.append(_build_csr(n, bucket))
        return MultiViewNetwork(list(self._labels), list(self._view_names), views)


def _parse_line(line: str, line_no: int) -> tuple[str, str, str, float] | None:
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None
    parts = stripped.split("\t")
    if len(parts) not in (3, 4):
        raise ParseError(f"expected 3 or 4 tab-separated fields, got "
                         f"{len(parts)}: {stripped!r}", line_no)
    view, src, dst = parts[0], parts[1], parts[2]
    if not view or not src or not dst:
        raise ParseError(f"empty field in {stripped!r}", line_no)
    if len(parts) == 4:
        try:
            weight = float(parts[3])
        except ValueError:
            raise ParseError(f"bad weight {parts[3]!r}", line_no) from None
    else:
        weight = 1.0
    return view, src, dst, weight


def load_network(path: str, binarize: bool = False) -> MultiViewNetwork:
    """Parse an edge-list TSV into a network.

    Duplicate (view, src, dst) lines sum their weights; with ``binarize``
    every accumulated edge weight is reset to 1.0 after ingestion.
    """
    builder = NetworkBuilder(binarize=binarize)
    with io.open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            rec = _parse_line(line, line_no)
            if rec is None:
                continue
            view, src, dst, weight = rec
            builder.add_edge(view, src, dst, weight, line_no=line_no)
    return builder.build()


def save_network(net: MultiViewNetwork, path: str) -> None:
    """Write the canonical edge-list form: one line per undirected edge,
    endpoints ordered by node id, lines sorted by (view, src, dst)."""
    with io.open(path, "w", encoding="utf-8") as fh:
        for v, name in enumerate(net.view_names):
            csr = net.views[v]
            for u in range(net.num_nodes):
                for k in range(csr.indptr[u], csr.indptr[u + 1]):
                    w = int(csr.neighbors[k])
                    if u < w:
                        fh.write(f"{name}\t{net.node_labels[u]}\t"
                                 f"{net.node_labels[w]}\t{float(csr.weights[k])!r}\n")


def save_node_dictionary(net: MultiViewNetwork, path: str) -> None:
    with io.open(path, "w", encoding="utf-8") as fh:
        for i, lab in enumerate(net.node_labels):
            fh.write(f"{i}\t{lab}\n")


def merge_views(net: MultiViewNetwork) -> MultiViewNetwork:
    """Collapse all views into a single view.

    Each non-empty view is rescaled so its total edge weight is 1.0, then
    the rescaled views are summed edge-wise. Empty views contribute nothing.
    """
    totals = [net.total_weight(v) for v in range(net.num_views)]
    if all(t == 0.0 for t in totals):
        raise ValidationError("cannot merge a network whose views are all empty")
    merged: dict[tuple[int, int], float] = {}
    for v, total in enumerate(totals):
        if total == 0.0:
            continue
        csr = net.views[v]
        scale = 1.0 / total
        for u in range(net.num_nodes):
            for k in range(csr.indptr[u], csr.indptr[u + 1]):
                w = int(csr.neighbors[k])
                if u < w:
                    key = (u, w)
                    merged[key] = merged.get(key, 0.0) + csr.weights[k] * scale
    view = _build_csr(net.num_nodes, merged)
    return MultiViewNetwork(list(net.node_labels), ["merged"], [view])


def single_view(net: MultiViewNetwork, v: int) -> MultiViewNetwork:
    """Network restricted to one view (same node set and labels)."""
    return MultiViewNetwork(list(net.node_labels), [net.view_names[v]],
                            [net.views[v]])
