"""Synthetic two-view benchmark family with tunable view agreement.

Four equal classes A, B, C, D. Four preferential-attachment networks are
generated: over A+B and over C+D (destined for view v1), over A+C and over
B+D (destined for view v2). Each edge then lands in its destined view with
probability 1 - p and in the other view with probability p. At p = 0 the
views carry complementary partitions of the classes; at p = 0.5 every edge
lands in either view with equal probability, so the two views become
statistically interchangeable.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass

import numpy as np

from ._rng import mix64
from .graph import MultiViewNetwork, NetworkBuilder, ValidationError

CLASSES = ("A", "B", "C", "D")

_TAG_SYNTH = 0x53594E54

DEFAULT_BASE_SEED = 97


@dataclass(frozen=True)
class SynthConfig:
    intrusion: float
    nodes_per_class: int = 1000
    attach_edges: int = 1
    seed: int = DEFAULT_BASE_SEED

    def __post_init__(self):
        if not 0.0 <= self.intrusion <= 0.5:
            raise ValidationError("intrusion probability must lie in [0, 0.5]")
        if self.nodes_per_class < 2 or self.attach_edges < 1:
            raise ValidationError("need nodes_per_class >= 2 and attach_edges >= 1")


@dataclass
class LabeledNetwork:
    net: MultiViewNetwork
    labels: dict[str, str]


def _preferential_attachment(members: np.ndarray, m: int,
                             rng: np.random.Generator,
                             taken: set[tuple[int, int]]) -> list[tuple[int, int]]:
    """Seed edge between the first two members, then each new node attaches
    m edges to existing nodes drawn proportionally to current degree.

    ``taken`` holds pairs already generated by earlier component networks;
    they are redrawn so no node pair ever appears in two components. This
    keeps cross-view neighbor sets exactly disjoint when nothing intrudes.
    """
    def key(a, b):
        return (a, b) if a < b else (b, a)

    edges = [(int(members[0]), int(members[1]))]
    taken.add(key(int(members[0]), int(members[1])))
    # one list entry per unit of degree
    targets = [int(members[0]), int(members[1])]
    existing = 2
    for node in members[2:]:
        node = int(node)
        chosen: list[int] = []
        want = min(m, existing)
        attempts = 0
        while len(chosen) < want:
            t = targets[rng.integers(len(targets))]
            attempts += 1
            if t not in chosen and (key(node, t) not in taken or attempts > 1000):
                chosen.append(t)
        for t in chosen:
            edges.append((node, t))
            taken.add(key(node, t))
            targets.append(node)
            targets.append(t)
        existing += 1
    return edges


def generate(cfg: SynthConfig) -> LabeledNetwork:
    npc = cfg.nodes_per_class
    rng = np.random.Generator(np.random.PCG64(mix64(cfg.seed, _TAG_SYNTH)))
    ids = {c: np.arange(k * npc, (k + 1) * npc) for k, c in enumerate(CLASSES)}

    components = [
        (np.concatenate([ids["A"], ids["B"]]), "v1"),
        (np.concatenate([ids["C"], ids["D"]]), "v1"),
        (np.concatenate([ids["A"], ids["C"]]), "v2"),
        (np.concatenate([ids["B"], ids["D"]]), "v2"),
    ]
    builder = NetworkBuilder()
    builder.ensure_view("v1")
    builder.ensure_view("v2")
    taken: set[tuple[int, int]] = set()
    for members, destined in components:
        # hub identity should depend on the seed, not on node indices
        order = rng.permutation(members)
        for a, b in _preferential_attachment(order, cfg.attach_edges, rng, taken):
            view = destined
            if rng.random() < cfg.intrusion:
                view = "v2" if destined == "v1" else "v1"
            builder.add_edge(view, str(a), str(b))
    # node ids follow first appearance; register any stragglers is not
    # needed because every member gains at least one edge
    net = builder.build()
    labels = {str(i): CLASSES[i // npc] for i in range(4 * npc)}
    return LabeledNetwork(net=net, labels=labels)


def default_series(nodes_per_class: int = 1000,
                   base_seed: int = DEFAULT_BASE_SEED) -> list[SynthConfig]:
    """The six standard settings p = 0.0, 0.1, ..., 0.5, one seed per p."""
    return [SynthConfig(intrusion=k / 10.0, nodes_per_class=nodes_per_class,
                        seed=base_seed + k) for k in range(6)]


def write_labels(labeled: LabeledNetwork, path: str) -> None:
    with io.open(path, "w", encoding="utf-8") as fh:
        for node, cls in sorted(labeled.labels.items(), key=lambda kv: int(kv[0])):
            fh.write(f"{node}\t{cls}\n")


def load_labels(path: str) -> dict[str, str]:
    labels = {}
    with io.open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            node, cls = line.split("\t")
            labels[node] = cls
    return labels
