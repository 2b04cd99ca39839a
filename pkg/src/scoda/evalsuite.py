"""Evaluation and analysis tools.

Feature quality is measured classifier-free where possible: a cosine
kNN over a labeled reference bank, or a small multinomial logistic
probe when a parametric head is wanted.  On top of those sit the
adaptation-gain / forgetting report (pre vs post accuracy on source and
target with a reference bank frozen before adaptation) and the
loss-component ablation (full vs cosine-only vs space-only from the
same checkpoint and seed).
"""

import json
from dataclasses import asdict, dataclass

import numpy as np

from .datagen import DomainDataset, split_dataset
from .duospeed import AdaptationConfig, AdaptRunResult, VARIANTS, adapt_run
from .errors import DataError, ShapeError
from .losses import EPS
from .model import FeatureExtractorParams, forward_features
from .numkernel import col_sum, matmul

__all__ = [
    "ProbeParams",
    "DomainRecord",
    "AdaptationReport",
    "ConfusionMatrix",
    "extract_features",
    "knn_accuracy",
    "train_probe",
    "evaluate_model",
    "forgetting_report",
    "ablation_run",
    "write_report",
]


@dataclass
class ProbeParams:
    weights: np.ndarray   # d x K
    bias: np.ndarray      # K


@dataclass
class DomainRecord:
    domain_id: str
    pre_accuracy: float
    post_accuracy: float
    delta: float


@dataclass
class AdaptationReport:
    records: list          # DomainRecord per evaluated domain
    loss_summary: dict
    config: dict
    seed: int


@dataclass
class ConfusionMatrix:
    counts: np.ndarray     # K x K, rows = true class, cols = predicted

    @property
    def n(self):
        return int(self.counts.sum())

    @property
    def accuracy(self):
        return float(np.trace(self.counts)) / self.n


def extract_features(params: FeatureExtractorParams, x: np.ndarray) -> np.ndarray:
    """Eval-mode features; never mutates the model."""
    f, _ = forward_features(params, x, "eval")
    return f


def _knn_predict(ref_f, ref_y, q_f, k):
    if ref_f.shape[0] == 0:
        raise DataError("knn: empty reference bank")
    if k < 1:
        raise DataError(f"knn: k must be >= 1, got {k}")
    if ref_f.shape[1] != q_f.shape[1]:
        raise ShapeError(
            f"knn: reference dim {ref_f.shape[1]} != query dim {q_f.shape[1]}")
    rn = np.linalg.norm(ref_f, axis=1)
    qn = np.linalg.norm(q_f, axis=1)
    rn = np.where(rn < EPS, 1.0, rn)
    qn = np.where(qn < EPS, 1.0, qn)
    cos = matmul(q_f, np.ascontiguousarray(ref_f.T)) / (qn[:, None] * rn[None, :])
    dist = 1.0 - cos
    K = int(ref_y.max()) + 1
    preds = np.empty(q_f.shape[0], dtype=np.int64)
    for i in range(q_f.shape[0]):
        nn = np.argsort(dist[i], kind="stable")[:k]
        votes = np.bincount(ref_y[nn], minlength=K)
        top = votes.max()
        cands = np.flatnonzero(votes == top)
        if len(cands) > 1:
            # tie: smallest summed distance over each candidate's neighbors,
            # then lowest class id
            sums = [dist[i][nn[ref_y[nn] == c]].sum() for c in cands]
            cands = cands[np.flatnonzero(np.isclose(sums, min(sums)))]
        preds[i] = cands[0]
    return preds


def knn_accuracy(ref_features, ref_labels, query_features, query_labels, k=5):
    preds = _knn_predict(ref_features, np.asarray(ref_labels),
                         query_features, k)
    return float(np.mean(preds == np.asarray(query_labels)))


def train_probe(features, labels, seed, epochs, eta) -> ProbeParams:
    """Multinomial logistic regression by full-batch gradient descent.

    Zero-initialized (uniform logits at zero epochs) so the convex
    problem is deterministic; seed is part of the interface for config
    plumbing but draws nothing.
    """
    labels = np.asarray(labels)
    K = int(labels.max()) + 1
    if K < 2:
        raise DataError(f"train_probe: need >= 2 classes, got {K}")
    f = np.ascontiguousarray(features, dtype=np.float64)
    N, d = f.shape
    onehot = np.zeros((N, K))
    onehot[np.arange(N), labels] = 1.0
    w = np.zeros((d, K))
    b = np.zeros(K)
    for _ in range(epochs):
        logits = matmul(f, w) + b
        z = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(z)
        p = e / e.sum(axis=1, keepdims=True)
        g = (p - onehot) / N
        w = w - eta * matmul(np.ascontiguousarray(f.T), g)
        b = b - eta * col_sum(g)
    return ProbeParams(w, b)


def evaluate_model(params: FeatureExtractorParams, ds: DomainDataset, classifier):
    """Accuracy and confusion matrix of a model on a dataset.

    classifier is either ProbeParams or a kNN reference bank
    (ref_features, ref_labels) or (ref_features, ref_labels, k).
    Features are extracted in eval mode.
    """
    f = extract_features(params, ds.features)
    if isinstance(classifier, ProbeParams):
        if f.shape[1] != classifier.weights.shape[0]:
            raise ShapeError(
                f"probe expects dim {classifier.weights.shape[0]}, features have {f.shape[1]}")
        logits = matmul(f, classifier.weights) + classifier.bias
        preds = logits.argmax(axis=1)
    else:
        ref_f, ref_y, *rest = classifier
        k = rest[0] if rest else 5
        preds = _knn_predict(ref_f, np.asarray(ref_y), f, k)
    K = ds.n_classes
    counts = np.zeros((K, K), dtype=np.int64)
    for t, p in zip(ds.labels, preds):
        counts[int(t), int(p)] += 1
    cm = ConfusionMatrix(counts)
    return cm.accuracy, cm


def _trace_summary(trace):
    if not trace:
        return {"steps": 0, "first_total": None, "last_total": None, "mean_total": None}
    totals = [lv.total for lv in trace]
    return {"steps": len(trace), "first_total": totals[0], "last_total": totals[-1],
            "mean_total": float(np.mean(totals))}


def forgetting_report(h: FeatureExtractorParams, adapted: AdaptRunResult,
                      source_eval: DomainDataset, target_eval: DomainDataset,
                      cfg: AdaptationConfig) -> AdaptationReport:
    """Adaptation gain vs source forgetting, against a frozen reference.

    The source eval set is split 50/50 (stratified, seeded on the run
    seed); the reference bank is h's features on the first half, frozen
    before adaptation, so pre/post numbers move only because the query
    features move.  Source accuracy is measured on the held-out half,
    target accuracy on the full target eval set.
    """
    ref_ds, query_ds = split_dataset(source_eval, 0.5, [cfg.seed, 9])
    ref_f = extract_features(h, ref_ds.features)
    ref_y = ref_ds.labels
    student = adapted.adapted_student

    def acc(net, ds):
        return knn_accuracy(ref_f, ref_y, extract_features(net, ds.features), ds.labels, 5)

    pre_src, pre_tgt = acc(h, query_ds), acc(h, target_eval)
    post_src, post_tgt = acc(student, query_ds), acc(student, target_eval)
    records = [
        DomainRecord(source_eval.domain_id, pre_src, post_src, post_src - pre_src),
        DomainRecord(target_eval.domain_id, pre_tgt, post_tgt, post_tgt - pre_tgt),
    ]
    return AdaptationReport(records, _trace_summary(adapted.loss_trace),
                            asdict(cfg), cfg.seed)


def ablation_run(h: FeatureExtractorParams, target_data: DomainDataset,
                 source_eval: DomainDataset, target_eval: DomainDataset,
                 cfg: AdaptationConfig):
    """Loss-component ablation: three adaptations from the same h and seed.

    full uses cos + lam*space; cos_only trains without the space term
    (still recorded in the trace); space_only trains on the space term
    alone at weight 1.  Each variant's post-adapt target accuracy is
    measured with that variant's own source features as the reference
    bank.  Returns [(variant, accuracy), ...] in a fixed order.
    """
    rows = []
    for variant in VARIANTS:
        res = adapt_run(h, target_data, cfg, variant=variant)
        st = res.adapted_student
        acc = knn_accuracy(extract_features(st, source_eval.features), source_eval.labels,
                           extract_features(st, target_eval.features), target_eval.labels, 5)
        rows.append((variant, acc))
    return rows


# ---------------------------------------------------------------------------
# report files

_REPORT_HEADER = "domain,phase,accuracy,delta,seed"


def write_report(report, path, format="csv"):
    """Serialize a report deterministically.

    AdaptationReport -> rows `domain,phase,accuracy,delta,seed` (pre and
    post per domain); ConfusionMatrix -> K x K integer CSV block.
    format="structured-text" emits the same content as JSON.
    """
    if format not in ("csv", "structured-text"):
        raise ValueError(f"unknown report format {format!r}")
    if isinstance(report, ConfusionMatrix):
        if format == "csv":
            body = "\n".join(",".join(str(int(v)) for v in row)
                             for row in report.counts) + "\n"
        else:
            body = json.dumps({"counts": report.counts.tolist()},
                              indent=2, sort_keys=True) + "\n"
    elif isinstance(report, AdaptationReport):
        if format == "csv":
            lines = [_REPORT_HEADER]
            for r in report.records:
                lines.append(f"{r.domain_id},pre,{r.pre_accuracy!r},,{report.seed}")
                lines.append(f"{r.domain_id},post,{r.post_accuracy!r},{r.delta!r},{report.seed}")
            body = "\n".join(lines) + "\n"
        else:
            doc = {"records": [vars(r) for r in report.records],
                   "loss_summary": report.loss_summary,
                   "config": report.config, "seed": report.seed}
            body = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    else:
        raise TypeError(f"cannot serialize report of type {type(report).__name__}")
    with open(path, "w", newline="") as fh:
        fh.write(body)
