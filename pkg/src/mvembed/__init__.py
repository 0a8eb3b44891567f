"""Multi-view network embedding toolkit.

Learns node embeddings for networks with several edge types by trading off
two effects: keeping per-view information separated (per-view embedding
subspaces) and letting views reinforce each other (parameter sharing or
cross-view regularization). Ships the two trade-off models plus the
independent, one-space, view-merging and single-view baselines, a
synthetic benchmark generator, cross-view agreement statistics, and a
link-prediction/classification evaluation harness.
"""

__version__ = "0.1.0"

from .graph import (MultiViewNetwork, ParseError, ValidationError,
                    load_network, merge_views, save_network)
from .store import (EmbeddingStore, UsageError, final_embedding, init_store,
                    load_embeddings_text, save_embeddings_text)
from .train import TrainConfig, TrainingDivergedError, run_embedding, train
from .walks import NoiseTable, PairList, WalkConfig, walk_budget

__all__ = [
    "MultiViewNetwork", "ParseError", "ValidationError", "UsageError",
    "load_network", "save_network", "merge_views",
    "EmbeddingStore", "init_store", "final_embedding",
    "save_embeddings_text", "load_embeddings_text",
    "TrainConfig", "TrainingDivergedError", "train", "run_embedding",
    "WalkConfig", "PairList", "NoiseTable", "walk_budget",
    "__version__",
]
