"""Annotation agreement, classification metrics and cross-validation.

Covers the measurement side of the pipeline: adjudicating three-judge
annotations into gold labels, Fleiss' kappa over the same annotations,
confusion-matrix precision/recall/F1 with support-weighted totals, seeded
stratified k-fold plans, and a cross-validation driver that fits both
classifiers fold by fold and aggregates one confusion matrix each.
"""

from __future__ import annotations

import csv
import random
import warnings
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from discoursekit.classifiers import (
    LdaClassifier,
    SvmConfig,
    build_feature_space,
    classify_lda,
    fit_topic_class_map,
    predict_svm,
    train_multiclass,
    vectorize,
)
from discoursekit.corpus import CLASS_ORDER, Label
from discoursekit.lda import GibbsConfig, TokenStream, run_chains


class NoMajorityError(ValueError):
    def __init__(self, message_id: str):
        self.message_id = message_id
        super().__init__(f"judges fully disagree on message {message_id!r}")


class DegenerateInput(ValueError):
    pass


class TooFewItemsError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Annotations


@dataclass(frozen=True)
class AnnotationSet:
    """Ordered judge labels per message id; every message has the same
    number of judges."""

    judgments: dict[str, tuple[Label, ...]]

    def __post_init__(self) -> None:
        sizes = {len(v) for v in self.judgments.values()}
        if len(sizes) > 1:
            raise ValueError(f"inconsistent judge counts: {sorted(sizes)}")

    @property
    def n_judges(self) -> int:
        for v in self.judgments.values():
            return len(v)
        return 0

    def __len__(self) -> int:
        return len(self.judgments)


def load_annotations(path: str | Path) -> AnnotationSet:
    """CSV rows: message_id, judge1, judge2, judge3 (header optional)."""
    judgments: dict[str, tuple[Label, ...]] = {}
    with Path(path).open(encoding="utf-8", newline="") as fh:
        for row_no, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].startswith("#"):
                continue
            if row_no == 1 and row[0].strip().lower() in ("message_id", "id"):
                continue
            if len(row) < 2:
                raise ValueError(f"{path}:{row_no}: expected id plus judge labels")
            msg_id = row[0].strip()
            if msg_id in judgments:
                raise ValueError(f"{path}:{row_no}: duplicate message id {msg_id!r}")
            try:
                judgments[msg_id] = tuple(Label(cell.strip()) for cell in row[1:])
            except ValueError:
                raise ValueError(f"{path}:{row_no}: unknown label in {row[1:]}") from None
    return AnnotationSet(judgments=judgments)


def adjudicate(annotations: AnnotationSet) -> dict[str, Label]:
    """Majority label per message; full disagreement aborts with the id."""
    gold: dict[str, Label] = {}
    for msg_id, labels in annotations.judgments.items():
        counts: dict[Label, int] = {}
        for lab in labels:
            counts[lab] = counts.get(lab, 0) + 1
        top = max(counts.values())
        if top * 2 <= len(labels):
            raise NoMajorityError(msg_id)
        gold[msg_id] = next(lab for lab, c in counts.items() if c == top)
    return gold


def fleiss_kappa(annotations: AnnotationSet) -> float:
    """Chance-corrected agreement for a fixed judge count per item.

    Per-item agreement is the fraction of concordant judge pairs; expected
    agreement comes from the pooled category proportions.  Exactly 1.0 is
    returned when everyone agrees on a single category throughout (the
    chance term degenerates there).
    """
    n_items = len(annotations)
    n_judges = annotations.n_judges
    if n_items < 2 or n_judges < 2:
        raise DegenerateInput(
            f"need >= 2 items and >= 2 judges, got {n_items} and {n_judges}"
        )
    categories = list(CLASS_ORDER)
    table = np.zeros((n_items, len(categories)), dtype=np.int64)
    for i, labels in enumerate(annotations.judgments.values()):
        for lab in labels:
            table[i, categories.index(lab)] += 1

    p_i = (table * (table - 1)).sum(axis=1) / (n_judges * (n_judges - 1))
    p_bar = float(p_i.mean())
    p_j = table.sum(axis=0) / (n_items * n_judges)
    p_e = float((p_j**2).sum())
    if p_e >= 1.0:
        return 1.0
    return (p_bar - p_e) / (1.0 - p_e)


# ---------------------------------------------------------------------------
# Confusion matrices and metrics


@dataclass(frozen=True)
class ConfusionMatrix:
    classes: tuple[Label, ...]
    counts: np.ndarray  # counts[true, predicted]

    def __post_init__(self) -> None:
        k = len(self.classes)
        if self.counts.shape != (k, k):
            raise ValueError("counts must be square over the class list")
        if (self.counts < 0).any():
            raise ValueError("counts must be non-negative")

    @classmethod
    def from_pairs(
        cls, gold: Sequence[Label], predicted: Sequence[Label],
        classes: Sequence[Label] = CLASS_ORDER,
    ) -> "ConfusionMatrix":
        if len(gold) != len(predicted):
            raise ValueError("gold and predicted lengths differ")
        index = {c: i for i, c in enumerate(classes)}
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
        for g, p in zip(gold, predicted):
            counts[index[g], index[p]] += 1
        return cls(classes=tuple(classes), counts=counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def tp(self, c: Label) -> int:
        i = self.classes.index(c)
        return int(self.counts[i, i])

    def fp(self, c: Label) -> int:
        i = self.classes.index(c)
        return int(self.counts[:, i].sum() - self.counts[i, i])

    def fn(self, c: Label) -> int:
        i = self.classes.index(c)
        return int(self.counts[i].sum() - self.counts[i, i])

    def support(self, c: Label) -> int:
        return int(self.counts[self.classes.index(c)].sum())

    def accuracy(self) -> float:
        if self.total == 0:
            return 0.0
        return float(np.trace(self.counts) / self.total)

    def add(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.classes != self.classes:
            raise ValueError("class lists differ")
        return ConfusionMatrix(classes=self.classes, counts=self.counts + other.counts)


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    support: int
    degenerate: bool = False  # some 0/0 cell was defined as 0


@dataclass(frozen=True)
class ClassMetrics:
    per_class: dict[Label, PRF]
    total_precision: float
    total_recall: float
    total_f1: float
    total_support: int


def _safe_ratio(num: int, den: int) -> tuple[float, bool]:
    if den == 0:
        return 0.0, True
    return num / den, False


def class_metrics(cm: ConfusionMatrix) -> ClassMetrics:
    """Per-class precision/recall/F1 plus support-weighted Total row."""
    per_class: dict[Label, PRF] = {}
    for c in cm.classes:
        tp, fp, fn = cm.tp(c), cm.fp(c), cm.fn(c)
        p, p_deg = _safe_ratio(tp, tp + fp)
        r, r_deg = _safe_ratio(tp, tp + fn)
        if p + r > 0:
            f1, f_deg = 2 * p * r / (p + r), False
        else:
            f1, f_deg = 0.0, True
        per_class[c] = PRF(
            precision=p, recall=r, f1=f1, support=cm.support(c),
            degenerate=p_deg or r_deg or f_deg,
        )
    total_support = sum(m.support for m in per_class.values())
    if total_support == 0:
        tp_, tr_, tf_ = 0.0, 0.0, 0.0
    else:
        tp_ = sum(m.precision * m.support for m in per_class.values()) / total_support
        tr_ = sum(m.recall * m.support for m in per_class.values()) / total_support
        tf_ = sum(m.f1 * m.support for m in per_class.values()) / total_support
    return ClassMetrics(
        per_class=per_class,
        total_precision=tp_,
        total_recall=tr_,
        total_f1=tf_,
        total_support=total_support,
    )


def weighted_total(values: Sequence[float], supports: Sequence[int]) -> float:
    """Support-weighted average, the Total-row convention of the reports."""
    if len(values) != len(supports):
        raise ValueError("values and supports lengths differ")
    denom = sum(supports)
    if denom == 0:
        return 0.0
    return sum(v * s for v, s in zip(values, supports)) / denom


# ---------------------------------------------------------------------------
# Fold plans


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[tuple[str, ...], ...]
    k: int
    seed: int

    def __post_init__(self) -> None:
        if len(self.folds) != self.k:
            raise ValueError("fold count must equal k")
        flat = [i for fold in self.folds for i in fold]
        if len(flat) != len(set(flat)):
            raise ValueError("folds overlap")


def stratified_kfold(labels: Mapping[str, Label], k: int, seed: int) -> FoldPlan:
    """Per-class shuffled round-robin with a fold pointer that keeps running
    across classes, so overall fold sizes also stay within one of each other
    (not just the per-class counts)."""
    if k < 2:
        raise TooFewItemsError(f"need k >= 2, got {k}")
    if len(labels) < k:
        raise TooFewItemsError(f"{len(labels)} items cannot fill {k} folds")

    by_class: dict[Label, list[str]] = {}
    for msg_id, lab in labels.items():
        by_class.setdefault(lab, []).append(msg_id)

    rng = random.Random(seed)
    folds: list[list[str]] = [[] for _ in range(k)]
    pointer = 0
    for lab in CLASS_ORDER:
        ids = by_class.get(lab)
        if not ids:
            continue
        if len(ids) < k:
            warnings.warn(
                f"class {lab.value} has {len(ids)} items for {k} folds", stacklevel=2
            )
        rng.shuffle(ids)
        for msg_id in ids:
            folds[pointer % k].append(msg_id)
            pointer += 1
    return FoldPlan(folds=tuple(tuple(f) for f in folds), k=k, seed=seed)


# ---------------------------------------------------------------------------
# Cross-validation


@dataclass(frozen=True)
class CvResult:
    confusion: ConfusionMatrix
    metrics: ClassMetrics


@dataclass(frozen=True)
class EvaluationReport:
    results: dict[str, CvResult]  # classifier name -> aggregated result
    k: int
    seed: int
    n_messages: int


def cross_validate(
    docs: Sequence[TokenStream],
    labels: Sequence[Label],
    k: int = 10,
    seed: int = 0,
    svm_config: SvmConfig | None = None,
    lda_config: GibbsConfig | None = None,
    jobs: int = 1,
) -> EvaluationReport:
    """Stratified k-fold evaluation of the SVM and/or the topic-likelihood
    classifier (pass a config to enable each; at least one is required).

    Each fold rebuilds the feature space and refits models on its training
    split only, so nothing from the held-out messages leaks in.  Confusions
    are aggregated over folds before metrics are computed.
    """
    if len(docs) != len(labels):
        raise ValueError("need one label per document")
    if svm_config is None and lda_config is None:
        raise ValueError("enable at least one classifier")

    ids = {str(i): lab for i, lab in enumerate(labels)}
    plan = stratified_kfold(ids, k=k, seed=seed)

    collected: dict[str, tuple[list[Label], list[Label]]] = {}
    if svm_config is not None:
        collected["svm"] = ([], [])
    if lda_config is not None:
        collected["lda"] = ([], [])

    for fold_no, fold in enumerate(plan.folds):
        test_idx = [int(i) for i in fold]
        train_idx = [i for i in range(len(docs)) if str(i) not in set(fold)]
        train_docs = [docs[i] for i in train_idx]
        train_labels = [labels[i] for i in train_idx]
        test_docs = [docs[i] for i in test_idx]
        test_labels = [labels[i] for i in test_idx]

        if svm_config is not None:
            fs = build_feature_space(train_docs)
            train_vecs = [vectorize(d, fs) for d in train_docs]
            model = train_multiclass(
                train_vecs, train_labels, fs,
                replace(svm_config, seed=svm_config.seed + fold_no), jobs=jobs,
            )
            gold, pred = collected["svm"]
            for doc, lab in zip(test_docs, test_labels):
                gold.append(lab)
                pred.append(predict_svm(model, vectorize(doc, fs))[0])

        if lda_config is not None:
            topic_model = run_chains(
                train_docs, replace(lda_config, seed=lda_config.seed + fold_no)
            )
            mapping = fit_topic_class_map(topic_model, train_docs, train_labels)
            clf = LdaClassifier(model=topic_model, class_map=mapping)
            gold, pred = collected["lda"]
            for doc, lab in zip(test_docs, test_labels):
                gold.append(lab)
                pred.append(classify_lda(doc, clf).label)

    results = {}
    for name, (gold, pred) in collected.items():
        cm = ConfusionMatrix.from_pairs(gold, pred)
        results[name] = CvResult(confusion=cm, metrics=class_metrics(cm))
    return EvaluationReport(results=results, k=k, seed=seed, n_messages=len(docs))


# ---------------------------------------------------------------------------
# Report output


def report_csv(report: EvaluationReport, path: str | Path) -> None:
    """One row per class plus Total; per-classifier P/R/F1 columns as
    full-precision fractions."""
    names = sorted(report.results)
    header = ["class"]
    for name in names:
        header += [f"{name}_precision", f"{name}_recall", f"{name}_f1"]
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for c in CLASS_ORDER:
            row: list[object] = [c.value]
            for name in names:
                m = report.results[name].metrics.per_class[c]
                row += [repr(m.precision), repr(m.recall), repr(m.f1)]
            writer.writerow(row)
        total_row: list[object] = ["Total"]
        for name in names:
            m = report.results[name].metrics
            total_row += [repr(m.total_precision), repr(m.total_recall), repr(m.total_f1)]
        writer.writerow(total_row)


def report_text(report: EvaluationReport) -> str:
    """Human-readable table: percentages to one decimal, footnoted when a
    degenerate 0/0 cell was forced to zero."""
    names = sorted(report.results)
    lines = [
        f"{report.k}-fold cross-validation over {report.n_messages} messages"
        f" (seed {report.seed})",
        "",
    ]
    head = f"{'Class':<14}" + "".join(
        f"{name + ' P%':>10}{name + ' R%':>10}{name + ' F1%':>11}" for name in names
    )
    lines.append(head)
    degenerate = False
    for c in CLASS_ORDER:
        row = f"{c.value:<14}"
        for name in names:
            m = report.results[name].metrics.per_class[c]
            degenerate = degenerate or m.degenerate
            row += f"{100 * m.precision:>10.1f}{100 * m.recall:>10.1f}{100 * m.f1:>11.1f}"
        lines.append(row)
    row = f"{'Total':<14}"
    for name in names:
        m = report.results[name].metrics
        row += (
            f"{100 * m.total_precision:>10.1f}"
            f"{100 * m.total_recall:>10.1f}"
            f"{100 * m.total_f1:>11.1f}"
        )
    lines.append(row)
    if degenerate:
        lines.append("")
        lines.append("note: cells with an empty denominator are reported as 0.")
    return "\n".join(lines)
