"""Downstream evaluation: features, logistic regression, metrics, and the
repeated shuffle-split protocol.

Embeddings are normalized onto the unit sphere; link features are the
Hadamard product of the two endpoint vectors. The learner is a
deterministic batch gradient-descent logistic regression with l2 penalty,
tuned over a fixed grid on the validation split. Each task runs a number
of seeded 80/10/10 shuffle splits (20 by default) and reports the mean and
standard error of every metric. Nodes isolated in any view are excluded
from evaluation.
"""

from __future__ import annotations

import io
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._rng import mix64
from .graph import MultiViewNetwork, ValidationError
from .store import UsageError

DEFAULT_L2_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0)
SPLIT_RATIOS = (0.8, 0.1, 0.1)

_TAG_EVAL = 0x4556414C

TASK_KINDS = ("link-prediction", "multiclass", "multilabel")
TASK_ALIASES = {"multi-class-classification": "multiclass",
                "multi-label-classification": "multilabel",
                "link": "link-prediction"}


# ---------------------------------------------------------------------------
# features
# ---------------------------------------------------------------------------

def normalize_embeddings(table: np.ndarray) -> np.ndarray:
    """Scale every row to unit l2 norm; zero rows stay zero with a warning."""
    norms = np.linalg.norm(table, axis=1)
    zero = norms == 0.0
    if zero.any():
        warnings.warn(f"{int(zero.sum())} zero embedding rows left unnormalized")
        norms[zero] = 1.0
    return table / norms[:, None]


def pair_features(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape != b.shape:
        raise ValidationError("pair features need equal dimensions")
    return a * b


# ---------------------------------------------------------------------------
# logistic regression (batch gradient descent, backtracking line search)
# ---------------------------------------------------------------------------

def _sigmoid_vec(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _binary_loss(w, Xb, y):
    # softplus(z) - y*z, stable in both tails
    z = Xb @ w
    ce = np.logaddexp(0.0, z) - y * z
    return ce.sum() / len(y), z


def _binary_grad(w, Xb, y, z):
    return Xb.T @ (_sigmoid_vec(z) - y) / len(y)


def _softmax_loss(W, Xb, y_idx):
    n = len(y_idx)
    scores = Xb @ W.T
    m = scores.max(axis=1, keepdims=True)
    logz = m + np.log(np.exp(scores - m).sum(axis=1, keepdims=True))
    logp = scores - logz
    return -logp[np.arange(n), y_idx].sum() / n, logp


def _softmax_grad(W, Xb, y_idx, logp):
    n = len(y_idx)
    P = np.exp(logp)
    P[np.arange(n), y_idx] -= 1.0
    return P.T @ Xb / n


def _descend(w0, loss_fn, grad_fn, l2_over_n, max_iter, tol):
    """Batch gradient descent with Armijo backtracking. The smooth data
    term takes the gradient step; the quadratic l2 penalty (bias excluded)
    is applied as its exact proximal shrinkage so extreme penalties stay
    well-conditioned. Stops when the gradient-mapping norm falls below
    ``tol`` or after ``max_iter`` accepted steps."""

    def penalty(w):
        pen = w[..., :-1]
        return 0.5 * l2_over_n * float((pen * pen).sum())

    def prox(w, eta):
        out = w.copy()
        out[..., :-1] /= 1.0 + eta * l2_over_n
        return out

    w = w0.copy()
    smooth, aux = loss_fn(w)
    total = smooth + penalty(w)
    eta = 1.0
    for _ in range(max_iter):
        grad = grad_fn(w, aux)
        eta = min(eta * 2.0, 1e8)
        for _ in range(60):
            cand = prox(w - eta * grad, eta)
            step = cand - w
            sq = float((step * step).sum())
            cand_smooth, cand_aux = loss_fn(cand)
            cand_total = cand_smooth + penalty(cand)
            if cand_total <= total - 1e-4 / eta * sq:
                break
            eta *= 0.5
        w, total, aux = cand, cand_total, cand_aux
        if np.sqrt(sq) / eta <= tol:
            break
    return w, total


@dataclass
class LogisticModel:
    mode: str                     # "binary" | "softmax" | "one-vs-rest"
    weights: np.ndarray | list[np.ndarray]
    final_loss: float | list[float]
    classes: np.ndarray | None = None

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        Xb = np.hstack([X, np.ones((len(X), 1))])
        if self.mode == "binary":
            return _sigmoid_vec(Xb @ self.weights)
        if self.mode == "softmax":
            scores = Xb @ self.weights.T
            m = scores.max(axis=1, keepdims=True)
            e = np.exp(scores - m)
            return e / e.sum(axis=1, keepdims=True)
        return np.column_stack([_sigmoid_vec(Xb @ w) for w in self.weights])

    def predict(self, X: np.ndarray) -> np.ndarray:
        p = self.predict_proba(X)
        if self.mode == "binary":
            labels = (p >= 0.5).astype(np.int64)
        else:
            labels = p.argmax(axis=1)
        if self.classes is not None:
            return self.classes[labels]
        return labels


def train_logreg(X: np.ndarray, y: np.ndarray, l2: float,
                 mode: str = "binary", max_iter: int = 1000,
                 tol: float = 1e-6, init=None) -> LogisticModel:
    """Deterministic fit: zero (or given) start, gradient descent with
    backtracking until the gradient norm falls below ``tol``."""
    Xb = np.hstack([X, np.ones((len(X), 1))])
    if mode == "binary":
        y = np.asarray(y, dtype=np.float64)
        if len(np.unique(y)) < 2:
            raise ValidationError("binary training data has a single class")
        w0 = np.zeros(Xb.shape[1]) if init is None else init
        w, loss = _descend(w0, lambda w: _binary_loss(w, Xb, y),
                           lambda w, z: _binary_grad(w, Xb, y, z),
                           l2 / len(y), max_iter, tol)
        return LogisticModel(mode="binary", weights=w, final_loss=loss)
    if mode == "softmax":
        classes, y_idx = np.unique(y, return_inverse=True)
        if len(classes) < 2:
            raise ValidationError("softmax training data has a single class")
        W0 = np.zeros((len(classes), Xb.shape[1])) if init is None else init
        W, loss = _descend(W0, lambda W: _softmax_loss(W, Xb, y_idx),
                           lambda W, lp: _softmax_grad(W, Xb, y_idx, lp),
                           l2 / len(y_idx), max_iter, tol)
        return LogisticModel(mode="softmax", weights=W, final_loss=loss,
                             classes=classes)
    if mode == "one-vs-rest":
        # y: (n, L) binary indicator matrix; one independent model per label
        weights, losses = [], []
        for k in range(y.shape[1]):
            sub = train_logreg(X, y[:, k], l2, mode="binary",
                               max_iter=max_iter, tol=tol)
            weights.append(sub.weights)
            losses.append(sub.final_loss)
        return LogisticModel(mode="one-vs-rest", weights=weights,
                             final_loss=losses)
    raise UsageError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def _midranks(scores: np.ndarray) -> np.ndarray:
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores))
    s = scores[order]
    i = 0
    while i < len(s):
        j = i
        while j < len(s) and s[j] == s[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + j - 1) + 1.0
        i = j
    return ranks


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Tie-corrected rank statistic: probability a random positive outscores
    a random negative, ties counting one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("ROC-AUC needs both classes present")
    ranks = _midranks(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0)
                 / (n_pos * n_neg))


def roc_curve(scores: np.ndarray, labels: np.ndarray):
    """(fpr, tpr) at every distinct threshold, descending, with (0,0) start."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    order = np.argsort(-scores, kind="mergesort")
    y = (labels[order] == 1).astype(np.float64)
    s = scores[order]
    distinct = np.nonzero(np.diff(s))[0]
    ends = np.concatenate([distinct, [len(s) - 1]])
    tp = np.cumsum(y)[ends]
    fp = (ends + 1) - tp
    tpr = np.concatenate([[0.0], tp / tp[-1]])
    fpr = np.concatenate([[0.0], fp / fp[-1]])
    return fpr, tpr


def auprc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Step integration of the precision-recall curve over distinct
    thresholds (tied scores grouped)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    order = np.argsort(-scores, kind="mergesort")
    y = (labels[order] == 1).astype(np.float64)
    s = scores[order]
    n_pos = y.sum()
    if n_pos == 0 or n_pos == len(y):
        raise ValidationError("AUPRC needs both classes present")
    distinct = np.nonzero(np.diff(s))[0]
    ends = np.concatenate([distinct, [len(s) - 1]])
    tp = np.cumsum(y)[ends]
    precision = tp / (ends + 1.0)
    recall = tp / n_pos
    prev = np.concatenate([[0.0], recall[:-1]])
    return float(((recall - prev) * precision).sum())


def compute_metrics(scores: np.ndarray, labels: np.ndarray) -> dict[str, float]:
    """Both ranking metrics for one binary score/label set."""
    return {"roc_auc": roc_auc(scores, labels),
            "auprc": auprc(scores, labels)}


def accuracy(predicted: np.ndarray, truth: np.ndarray) -> float:
    return float(np.mean(np.asarray(predicted) == np.asarray(truth)))


def cross_entropy(probs: np.ndarray, true_idx: np.ndarray) -> float:
    """Mean negative natural-log likelihood of the true classes."""
    p = np.clip(probs[np.arange(len(true_idx)), true_idx], 1e-15, 1.0)
    return float(-np.log(p).mean())


# ---------------------------------------------------------------------------
# splits
# ---------------------------------------------------------------------------

def shuffle_split(n: int, rng: np.random.Generator,
                  ratios=SPLIT_RATIOS) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    perm = rng.permutation(n)
    n_train = int(round(ratios[0] * n))
    n_val = int(round(ratios[1] * n))
    return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]


def grouped_split(groups: np.ndarray, rng: np.random.Generator,
                  ratios=SPLIT_RATIOS) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """80/10/10 split that keeps records sharing a group key (e.g. the
    source node of a link record) inside a single bucket."""
    uniq, inverse, counts = np.unique(groups, return_inverse=True,
                                      return_counts=True)
    order = rng.permutation(len(uniq))
    targets = [r * len(groups) for r in ratios]
    filled = [0.0, 0.0, 0.0]
    assign = np.empty(len(uniq), dtype=np.int64)
    for g in order:
        deficits = [targets[b] - filled[b] for b in range(3)]
        bucket = int(np.argmax(deficits))
        assign[g] = bucket
        filled[bucket] += counts[g]
    buckets = assign[inverse]
    idx = np.arange(len(groups))
    return idx[buckets == 0], idx[buckets == 1], idx[buckets == 2]


# ---------------------------------------------------------------------------
# task specification and reports
# ---------------------------------------------------------------------------

@dataclass
class TaskSpec:
    task: str
    network: str | None = None
    edges: str | None = None
    labels: str | None = None
    negatives_ratio: int = 5
    runs: int = 20
    split_by_source: bool = True
    seed: int = 7
    max_positives: int = 0    # 0 = keep all; else seeded subsample

    def __post_init__(self):
        self.task = TASK_ALIASES.get(self.task, self.task)
        if self.task not in TASK_KINDS:
            raise ValidationError(f"unknown task {self.task!r}")
        if self.task == "link-prediction" and not self.edges:
            raise ValidationError("link-prediction needs an edges file")
        if self.task in ("multiclass", "multilabel") and not self.labels:
            raise ValidationError(f"{self.task} needs a labels file")


_BOOL = {"true": True, "false": False, "1": True, "0": False,
         "yes": True, "no": False}


def load_task_spec(path: str) -> TaskSpec:
    fields = {}
    with io.open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValidationError(f"{path} line {line_no}: expected key = value")
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    kwargs: dict = {}
    for key, value in fields.items():
        if key in ("negatives_ratio", "runs", "seed", "max_positives"):
            kwargs[key] = int(value)
        elif key == "split_by_source":
            kwargs[key] = _BOOL[value.lower()]
        elif key in ("task", "network", "edges", "labels"):
            kwargs[key] = value
        else:
            raise ValidationError(f"unknown task-spec key {key!r}")
    if "task" not in kwargs:
        raise ValidationError(f"{path} does not define a task")
    return TaskSpec(**kwargs)


@dataclass
class MetricReport:
    model: str
    task: str
    metrics: dict[str, list[float]] = field(default_factory=dict)

    def add(self, name: str, value: float) -> None:
        self.metrics.setdefault(name, []).append(value)

    def mean(self, name: str) -> float:
        return float(np.mean(self.metrics[name]))

    def stderr(self, name: str) -> float:
        vals = self.metrics[name]
        if len(vals) < 2:
            return 0.0
        return float(np.std(vals, ddof=1) / np.sqrt(len(vals)))


def write_reports_csv(reports: list[MetricReport], path: str) -> None:
    with io.open(path, "w", encoding="utf-8") as fh:
        fh.write("model,task,metric,mean,stderr,run_values\n")
        for rep in reports:
            for name, vals in rep.metrics.items():
                runs = ";".join(repr(v) for v in vals)
                fh.write(f"{rep.model},{rep.task},{name},{rep.mean(name)!r},"
                         f"{rep.stderr(name)!r},{runs}\n")


# ---------------------------------------------------------------------------
# protocol
# ---------------------------------------------------------------------------

def eligible_nodes(net: MultiViewNetwork) -> np.ndarray:
    """Nodes with at least one edge in every view."""
    mask = np.ones(net.num_nodes, dtype=bool)
    for v in range(net.num_views):
        deg = np.diff(net.views[v].indptr)
        mask &= deg > 0
    return np.nonzero(mask)[0]


def _tune_l2(fit, score, grid=DEFAULT_L2_GRID):
    """Fit per grid value (descending, warm-started) and keep the model
    with the best validation score; ties keep the stronger penalty."""
    best = None
    init = None
    for l2 in sorted(grid, reverse=True):
        model = fit(l2, init)
        init = model.weights
        s = score(model)
        if best is None or s > best[0]:
            best = (s, model, l2)
    return best[1], best[2], best[0]


def load_edge_pairs(path: str) -> list[tuple[str, str]]:
    pairs = []
    with io.open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            pairs.append((parts[0], parts[1]))
    return pairs


def load_node_labels(path: str) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    with io.open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            node, _, lab = line.partition("\t")
            out.setdefault(node, []).append(lab)
    return out


def _link_run(run: int, spec: TaskSpec, emb: np.ndarray,
              positives: list[tuple[int, int]], friend_set: set,
              pool: np.ndarray, max_iter: int) -> dict[str, float] | None:
    rng = np.random.Generator(np.random.PCG64(mix64(spec.seed, _TAG_EVAL, run)))
    wanted = spec.negatives_ratio * len(positives)
    negatives: list[tuple[int, int]] = []
    seen = set()
    while len(negatives) < wanted:
        a, b = pool[rng.integers(len(pool))], pool[rng.integers(len(pool))]
        if a == b:
            continue
        key = (a, b) if a < b else (b, a)
        if key in friend_set or key in seen:
            continue
        seen.add(key)
        negatives.append((int(a), int(b)))
    records = positives + negatives
    y = np.concatenate([np.ones(len(positives)), np.zeros(len(negatives))])
    X = np.stack([emb[a] * emb[b] for a, b in records])
    sources = np.array([a for a, _ in records])
    if spec.split_by_source:
        tr, va, te = grouped_split(sources, rng)
    else:
        tr, va, te = shuffle_split(len(records), rng)
    if len(np.unique(y[te])) < 2 or len(np.unique(y[tr])) < 2:
        warnings.warn(f"run {run}: one-class split, run excluded")
        return None
    model, _, best_val = _tune_l2(
        lambda l2, init: train_logreg(X[tr], y[tr], l2, mode="binary",
                                      max_iter=max_iter, init=init),
        lambda m: roc_auc(m.predict_proba(X[va]), y[va])
        if len(np.unique(y[va])) == 2 else 0.5)
    scores = model.predict_proba(X[te])
    return {"roc_auc": roc_auc(scores, y[te]),
            "auprc": auprc(scores, y[te]),
            "val_roc_auc": best_val}


def _multiclass_run(run: int, spec: TaskSpec, X_all: np.ndarray,
                    y_all: np.ndarray, max_iter: int) -> dict[str, float]:
    rng = np.random.Generator(np.random.PCG64(mix64(spec.seed, _TAG_EVAL, run)))
    tr, va, te = shuffle_split(len(y_all), rng)
    model, _, best_val = _tune_l2(
        lambda l2, init: train_logreg(X_all[tr], y_all[tr], l2, mode="softmax",
                                      max_iter=max_iter, init=init),
        lambda m: accuracy(m.predict(X_all[va]), y_all[va]))
    probs = model.predict_proba(X_all[te])
    class_index = {c: k for k, c in enumerate(model.classes)}
    true_idx = np.array([class_index[c] for c in y_all[te]])
    return {"accuracy": accuracy(model.predict(X_all[te]), y_all[te]),
            "cross_entropy": cross_entropy(probs, true_idx),
            "val_accuracy": best_val}


def _multilabel_run(run: int, spec: TaskSpec, X_all: np.ndarray,
                    Y_all: np.ndarray, max_iter: int) -> dict[str, float] | None:
    rng = np.random.Generator(np.random.PCG64(mix64(spec.seed, _TAG_EVAL, run)))
    tr, va, te = shuffle_split(len(X_all), rng)
    aucs, aps = [], []
    for k in range(Y_all.shape[1]):
        ytr, yva, yte = Y_all[tr, k], Y_all[va, k], Y_all[te, k]
        if len(np.unique(ytr)) < 2 or len(np.unique(yte)) < 2:
            warnings.warn(f"run {run}: label {k} one-class, label skipped")
            continue
        model, _, _ = _tune_l2(
            lambda l2, init: train_logreg(X_all[tr], ytr, l2, mode="binary",
                                          max_iter=max_iter, init=init),
            lambda m: roc_auc(m.predict_proba(X_all[va]), yva)
            if len(np.unique(yva)) == 2 else 0.5)
        scores = model.predict_proba(X_all[te])
        aucs.append(roc_auc(scores, yte))
        aps.append(auprc(scores, yte))
    if not aucs:
        return None
    return {"roc_auc": float(np.mean(aucs)), "auprc": float(np.mean(aps))}


def run_protocol(labels: list[str], table: np.ndarray,
                 net: MultiViewNetwork, spec: TaskSpec, model_name: str,
                 n_jobs: int = 1, logreg_max_iter: int = 1000) -> MetricReport:
    """Execute the seeded shuffle-split protocol and aggregate metrics."""
    emb = normalize_embeddings(table)
    row_of = {lab: i for i, lab in enumerate(labels)}
    core = eligible_nodes(net)
    core_labels = {net.node_labels[u] for u in core}

    if spec.task == "link-prediction":
        raw = load_edge_pairs(spec.edges)
        friend_set = set()
        positives = []
        for a, b in raw:
            if a in core_labels and b in core_labels and a != b \
                    and a in row_of and b in row_of:
                i, j = row_of[a], row_of[b]
                key = (i, j) if i < j else (j, i)
                if key not in friend_set:
                    friend_set.add(key)
                    positives.append(key)
        if not positives:
            raise ValidationError("no usable positive pairs for link prediction")
        if spec.max_positives and len(positives) > spec.max_positives:
            sub_rng = np.random.Generator(
                np.random.PCG64(mix64(spec.seed, _TAG_EVAL, 0x534142)))
            keep = sub_rng.choice(len(positives), size=spec.max_positives,
                                  replace=False)
            positives = [positives[i] for i in sorted(keep)]
        pool = np.array(sorted(row_of[net.node_labels[u]] for u in core
                               if net.node_labels[u] in row_of))
        runner = lambda r: _link_run(r, spec, emb, positives, friend_set,
                                     pool, logreg_max_iter)
    elif spec.task == "multiclass":
        node_labels = load_node_labels(spec.labels)
        keep = [(row_of[lab], labs[0]) for lab, labs in node_labels.items()
                if lab in core_labels and lab in row_of]
        X_all = emb[[r for r, _ in keep]]
        y_all = np.array([c for _, c in keep])
        runner = lambda r: _multiclass_run(r, spec, X_all, y_all,
                                           logreg_max_iter)
    elif spec.task == "multilabel":
        node_labels = load_node_labels(spec.labels)
        all_labels = sorted({l for labs in node_labels.values() for l in labs})
        lab_idx = {l: k for k, l in enumerate(all_labels)}
        rows, Y = [], []
        for lab in node_labels:
            if lab in core_labels and lab in row_of:
                rows.append(row_of[lab])
                vec = np.zeros(len(all_labels))
                for l in node_labels[lab]:
                    vec[lab_idx[l]] = 1.0
                Y.append(vec)
        X_all = emb[rows]
        Y_all = np.stack(Y)
        runner = lambda r: _multilabel_run(r, spec, X_all, Y_all,
                                           logreg_max_iter)
    else:
        raise ValidationError(f"unknown task {spec.task!r}")

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            results = list(ex.map(runner, range(spec.runs)))
    else:
        results = [runner(r) for r in range(spec.runs)]

    report = MetricReport(model=model_name, task=spec.task)
    for res in results:
        if res is None:
            continue
        for name, value in res.items():
            report.add(name, value)
    return report
