"""Evaluation protocol: stratified split, train centroids, score the test split.

The split is stratified per class with a seeded shuffle (the PRNG seed is
mixed with a stable hash of the label so class order cannot leak into the
shuffle), sliced 70/10/20 by default. Centroids are built from the train
split only; the validation split is produced and reported but not
consumed by the default pipeline, which has nothing to tune. Metrics are
accuracy, precision, recall and F1, macro-averaged by default with micro
available.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .classify import classify_batch
from .exceptions import ClassTooSmall, EmptyMatrix, NoClasses, ValidationError
from .pooling import DocumentEmbedding, build_class_centroids
from .vectors import check_measure

AVERAGINGS = ("macro", "micro")


@dataclass(frozen=True)
class SplitSpec:
    train_frac: float = 0.7
    val_frac: float = 0.1
    test_frac: float = 0.2
    seed: int = 42

    def __post_init__(self):
        for name, frac in (
            ("train_frac", self.train_frac),
            ("val_frac", self.val_frac),
            ("test_frac", self.test_frac),
        ):
            if not 0.0 < frac < 1.0:
                raise ValidationError(f"{name} must be in (0, 1), got {frac}")
        total = self.train_frac + self.val_frac + self.test_frac
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"split fractions must sum to 1, got {total}")


def _label_seed(seed: int, label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return (seed ^ int.from_bytes(digest[:8], "little")) & ((1 << 64) - 1)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split(samples, spec: SplitSpec):
    """Split (id, label) pairs into disjoint, exhaustive train/val/test id lists.

    Per class the ids are sorted, shuffled with the label-mixed seed, and
    sliced round(n * frac) / round(n * frac) / remainder, nudged so every
    split keeps at least one sample of every class. Classes with fewer
    than 3 samples cannot satisfy that and are rejected.
    """
    groups: dict[str, list] = {}
    for sid, label in samples:
        groups.setdefault(str(label), []).append(sid)

    train, val, test = [], [], []
    for label in sorted(groups):
        ids = sorted(groups[label])
        n = len(ids)
        if n < 3:
            raise ClassTooSmall(f"class {label!r} has {n} samples; need >= 3")
        rng = np.random.default_rng(_label_seed(spec.seed, label))
        order = rng.permutation(n)
        shuffled = [ids[i] for i in order]

        n_train = _round_half_up(n * spec.train_frac)
        n_val = _round_half_up(n * spec.val_frac)
        n_test = n - n_train - n_val
        sizes = [n_train, n_val, n_test]
        while min(sizes) < 1:
            sizes[sizes.index(min(sizes))] += 1
            sizes[sizes.index(max(sizes))] -= 1
        n_train, n_val, n_test = sizes

        train.extend(shuffled[:n_train])
        val.extend(shuffled[n_train : n_train + n_val])
        test.extend(shuffled[n_train + n_val :])
    return train, val, test


@dataclass(frozen=True)
class ConfusionMatrix:
    """Square count matrix: rows are true labels, columns predicted."""

    labels: tuple[str, ...]
    counts: np.ndarray

    @classmethod
    def from_pairs(cls, pairs, labels) -> "ConfusionMatrix":
        labels = tuple(labels)
        pos = {label: i for i, label in enumerate(labels)}
        counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
        for true, pred in pairs:
            counts[pos[true], pos[pred]] += 1
        return cls(labels=labels, counts=counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int
    zero_division: bool = False


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    averaging: str
    per_class: dict[str, ClassMetrics]

    def as_dict(self) -> dict:
        return {
            "averaging": self.averaging,
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "per_class": {
                label: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "support": m.support,
                    "zero_division": m.zero_division,
                }
                for label, m in self.per_class.items()
            },
        }


def _safe_div(num: float, den: float) -> tuple[float, bool]:
    if den == 0:
        return 0.0, True
    return num / den, False


def compute_metrics(cm: ConfusionMatrix, averaging: str = "macro") -> MetricsReport:
    """Accuracy plus macro- or micro-averaged precision/recall/F1.

    0/0 cases (a class never predicted, or with no true samples) are
    defined as 0 and flagged per class.
    """
    if averaging not in AVERAGINGS:
        raise ValidationError(f"averaging must be one of {AVERAGINGS}, got {averaging!r}")
    counts = cm.counts
    if counts.size == 0 or counts.sum() == 0:
        raise EmptyMatrix("confusion matrix has no observations")

    total = counts.sum()
    accuracy = float(np.trace(counts) / total)
    per_class: dict[str, ClassMetrics] = {}
    tps, fps, fns = [], [], []
    for i, label in enumerate(cm.labels):
        tp = int(counts[i, i])
        fp = int(counts[:, i].sum()) - tp
        fn = int(counts[i, :].sum()) - tp
        tps.append(tp)
        fps.append(fp)
        fns.append(fn)
        precision, p_zero = _safe_div(tp, tp + fp)
        recall, r_zero = _safe_div(tp, tp + fn)
        f1, f_zero = _safe_div(2.0 * precision * recall, precision + recall)
        per_class[label] = ClassMetrics(
            precision=precision,
            recall=recall,
            f1=f1,
            support=tp + fn,
            zero_division=p_zero or r_zero or f_zero,
        )

    if averaging == "macro":
        precision = float(np.mean([m.precision for m in per_class.values()]))
        recall = float(np.mean([m.recall for m in per_class.values()]))
        f1 = float(np.mean([m.f1 for m in per_class.values()]))
    else:
        tp, fp, fn = sum(tps), sum(fps), sum(fns)
        precision, _ = _safe_div(tp, tp + fp)
        recall, _ = _safe_div(tp, tp + fn)
        f1, _ = _safe_div(2.0 * precision * recall, precision + recall)
    return MetricsReport(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        averaging=averaging,
        per_class=per_class,
    )


@dataclass(frozen=True)
class EvaluationResult:
    report: MetricsReport
    confusion: ConfusionMatrix
    split_sizes: dict[str, int]
    measure: str


def run_evaluation(
    samples,
    label_table,
    spec: SplitSpec,
    measure: str = "cosine",
    averaging: str = "macro",
) -> EvaluationResult:
    """Full protocol over stored samples: split, train centroids, score test.

    ``samples`` are StoredSample records; centroids are mean-pooled from
    the train split only, and only the test split is scored. The
    validation ids are split off and left unused.
    """
    check_measure(measure)
    labels_present = {label_table[s.label_id] for s in samples}
    if len(labels_present) < 2:
        raise NoClasses(f"evaluation needs >= 2 classes, store has {len(labels_present)}")

    by_id = {s.id: s for s in samples}
    id_label_pairs = [(s.id, label_table[s.label_id]) for s in samples]
    train_ids, val_ids, test_ids = stratified_split(id_label_pairs, spec)

    train_docs = [
        (
            DocumentEmbedding(vector=by_id[i].vector, doc_id=str(i), page_count=1),
            label_table[by_id[i].label_id],
        )
        for i in train_ids
    ]
    centroids = build_class_centroids(train_docs)

    queries = [(str(i), by_id[i].vector) for i in test_ids]
    results = classify_batch(queries, centroids, measure)
    pairs = []
    for test_id, item in zip(test_ids, results):
        if not item.ok:
            raise ValidationError(f"test sample {test_id} failed to classify: {item.error}")
        pairs.append((label_table[by_id[test_id].label_id], item.result.predicted_label))

    cm = ConfusionMatrix.from_pairs(pairs, sorted(labels_present))
    report = compute_metrics(cm, averaging)
    return EvaluationResult(
        report=report,
        confusion=cm,
        split_sizes={"train": len(train_ids), "val": len(val_ids), "test": len(test_ids)},
        measure=measure,
    )
