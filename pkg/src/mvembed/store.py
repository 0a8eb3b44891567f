"""Parameter storage for every model variant plus final-embedding assembly.

Per-view variants (con, reg, independent) keep one center and one context
matrix per view, each of width dim/|views|; the shared-space variants
(one-space, view-merging, single-view) keep a single matrix pair of width
dim. Matrices live in one contiguous (num_matrices, num_nodes, width)
array so the training kernels can address rows directly.
"""

from __future__ import annotations

import io
import struct

import numpy as np

from ._rng import mix64
from .graph import MultiViewNetwork, ValidationError

VARIANTS = ("con", "reg", "independent", "one-space", "view-merging",
            "single-view")
PER_VIEW_VARIANTS = frozenset({"con", "reg", "independent"})

_TAG_INIT = 0x494E4954

BINARY_MAGIC = b"MVNEMB01"


class UsageError(ValueError):
    """Operation called on a store of the wrong variant."""


class EmbeddingStore:
    def __init__(self, variant: str, node_labels: list[str], num_views: int,
                 dim: int, seed: int,
                 node_views_indptr: np.ndarray, node_views: np.ndarray):
        if variant not in VARIANTS:
            raise ValidationError(f"unknown variant {variant!r}")
        self.variant = variant
        self.node_labels = node_labels
        self.num_views = num_views
        self.dim = dim
        self.seed = seed
        self.node_views_indptr = node_views_indptr
        self.node_views = node_views

        n = len(node_labels)
        if variant in PER_VIEW_VARIANTS:
            if num_views < 1 or dim % num_views != 0:
                raise ValidationError(
                    f"dim {dim} is not divisible by the view count {num_views}")
            self.view_dim = dim // num_views
            n_mat = num_views
            self.view_mat = np.arange(num_views, dtype=np.int32)
        else:
            self.view_dim = dim
            n_mat = 1
            self.view_mat = np.zeros(max(num_views, 1), dtype=np.int32)

        rng = np.random.Generator(np.random.PCG64(mix64(seed, _TAG_INIT)))
        span = 1.0 / self.view_dim
        self.centers = (rng.random((n_mat, n, self.view_dim)) - 0.5) * span
        self.contexts = np.zeros((n_mat, n, self.view_dim), dtype=np.float64)

    @property
    def num_nodes(self) -> int:
        return len(self.node_labels)

    def views_of_node(self, u: int) -> np.ndarray:
        lo, hi = self.node_views_indptr[u], self.node_views_indptr[u + 1]
        return self.node_views[lo:hi]

    def check_finite(self) -> None:
        if not np.isfinite(self.centers).all() or \
                not np.isfinite(self.contexts).all():
            raise ValidationError("store contains non-finite entries")


def init_store(net: MultiViewNetwork, variant: str, dim: int,
               seed: int) -> EmbeddingStore:
    """Seeded store: centers uniform in [-0.5/d, +0.5/d), contexts zero."""
    indptr, flat = net.node_view_lists()
    return EmbeddingStore(variant, list(net.node_labels), net.num_views,
                          dim, seed, indptr, flat)


def blend_coefficients(theta: float, n_views_of_node: int,
                       appendix: bool = False) -> tuple[float, float]:
    """(own-view, other-view) context blend weights for the con variant."""
    m = n_views_of_node
    if appendix:
        return theta + (1.0 - theta) / m, theta
    return (1.0 - theta) + theta / m, theta / m


def phi_context(store: EmbeddingStore, u: int, v: int, theta: float,
                appendix: bool = False) -> np.ndarray:
    """Blended context vector of node u for view v.

    Mixes (1 - theta) of the view's own context row with theta of the mean
    over the node's non-isolated views; at theta=0 this is the own row, at
    theta=1 the plain mean.
    """
    if store.variant != "con":
        raise UsageError("phi_context requires the constrained variant")
    if not 0.0 <= theta <= 1.0:
        raise ValidationError("theta must lie in [0, 1]")
    views = store.views_of_node(u)
    own, oth = blend_coefficients(theta, len(views), appendix)
    out = np.zeros(store.view_dim)
    for vv in views:
        out += (own if vv == v else oth) * store.contexts[vv, u]
    return out


def regularizer_residual(store: EmbeddingStore, u: int, v: int,
                         which: str = "center") -> tuple[float, np.ndarray]:
    """Squared distance from the view-v row of node u to its cross-view
    mean, plus the raw residual vector (row minus mean)."""
    if store.variant != "reg":
        raise UsageError("regularizer_residual requires the regularized variant")
    mats = store.centers if which == "center" else store.contexts
    views = store.views_of_node(u)
    mean = mats[views, u, :].mean(axis=0)
    residual = mats[v, u] - mean
    return float(np.dot(residual, residual)), residual


def final_embedding(store: EmbeddingStore) -> np.ndarray:
    """Per-node output vectors: per-view centers concatenated in ascending
    view order, or the shared center matrix unchanged."""
    if store.variant in PER_VIEW_VARIANTS:
        return np.ascontiguousarray(
            store.centers.transpose(1, 0, 2).reshape(store.num_nodes, store.dim))
    return store.centers[0].copy()


def save_embeddings_text(path: str, labels: list[str],
                         table: np.ndarray) -> None:
    n, d = table.shape
    with io.open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{n} {d}\n")
        for i in range(n):
            vals = " ".join(repr(float(x)) for x in table[i])
            fh.write(f"{labels[i]} {vals}\n")


def load_embeddings_text(path: str) -> tuple[list[str], np.ndarray]:
    with io.open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        n, d = int(header[0]), int(header[1])
        labels = []
        table = np.empty((n, d), dtype=np.float64)
        for i in range(n):
            parts = fh.readline().rstrip("\n").split(" ")
            labels.append(parts[0])
            table[i] = [float(x) for x in parts[1:]]
    return labels, table


def save_embeddings_binary(path: str, labels: list[str],
                           table: np.ndarray) -> None:
    """Little-endian binary twin of the text format: 16-byte header
    (magic, node count, dimension), then length-prefixed UTF-8 label and
    float64 row per node."""
    n, d = table.shape
    with io.open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<II", n, d))
        for i in range(n):
            raw = labels[i].encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(np.ascontiguousarray(table[i], dtype="<f8").tobytes())


def load_embeddings_binary(path: str) -> tuple[list[str], np.ndarray]:
    with io.open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != BINARY_MAGIC:
            raise ValidationError(f"bad magic {magic!r} in {path}")
        n, d = struct.unpack("<II", fh.read(8))
        labels = []
        table = np.empty((n, d), dtype=np.float64)
        for i in range(n):
            (m,) = struct.unpack("<I", fh.read(4))
            labels.append(fh.read(m).decode("utf-8"))
            table[i] = np.frombuffer(fh.read(8 * d), dtype="<f8")
    return labels, table
