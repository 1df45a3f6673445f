"""Message classifiers: a linear SVM trained with SMO, and a topic-model
word-likelihood baseline.

Features are binary bags of lemmas.  The SVM side trains one binary model
per unordered class pair (one-vs-one) and predicts by voting; the binary
trainer is a sequential minimal optimization loop written here, solving the
two-variable subproblems analytically.  The baseline scores a message per
class by summing log word likelihoods under the topic mapped to that class.
"""

from __future__ import annotations

import csv
import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations, permutations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from discoursekit.corpus import CLASS_ORDER, Label
from discoursekit.lda import TopicModel, TokenStream

SVM_FORMAT = "discoursekit-svm-model"
SVM_VERSION = 1

#: A message's feature vector: the set of active column indices.
BinaryVector = frozenset[int]


class EmptyVocabulary(ValueError):
    pass


class SingleClassInput(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class FeatureSpace:
    """Lemma to column map, insertion-ordered by first occurrence."""

    columns: dict[str, int]

    def __len__(self) -> int:
        return len(self.columns)

    def __contains__(self, lemma: str) -> bool:
        return lemma in self.columns

    @property
    def lemmas(self) -> tuple[str, ...]:
        return tuple(self.columns)


def build_feature_space(docs: Iterable[TokenStream]) -> FeatureSpace:
    columns: dict[str, int] = {}
    for doc in docs:
        for lemma in doc:
            columns.setdefault(lemma, len(columns))
    if not columns:
        raise EmptyVocabulary("no lemmas to index")
    return FeatureSpace(columns=columns)


def vectorize(tokens: TokenStream, fs: FeatureSpace) -> BinaryVector:
    """Active column set; lemmas outside the space are dropped."""
    return frozenset(fs.columns[t] for t in tokens if t in fs.columns)


def densify(vectors: Sequence[BinaryVector], n_features: int) -> np.ndarray:
    out = np.zeros((len(vectors), n_features), dtype=np.float64)
    for i, vec in enumerate(vectors):
        for j in vec:
            if j >= n_features:
                raise DimensionMismatch(f"index {j} outside feature space")
            out[i, j] = 1.0
    return out


# ---------------------------------------------------------------------------
# SMO


@dataclass(frozen=True)
class SvmConfig:
    c: float = 1.0
    tol: float = 1e-3
    eps: float = 1e-12
    max_passes: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.c <= 0 or self.tol <= 0 or self.eps <= 0:
            raise ValueError("C, tol and eps must be positive")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")


@dataclass(frozen=True)
class SvmBinaryModel:
    w: np.ndarray
    b: float
    alphas: np.ndarray | None
    X: np.ndarray | None
    y: np.ndarray | None
    config: SvmConfig

    def decision(self, x: np.ndarray) -> float:
        return float(self.w @ x + self.b)


def _pair_objective(a1, a2, k11, k22, k12, s, y1, y2, v1, v2):
    """Dual objective restricted to the working pair (constants dropped)."""
    return (
        a1 + a2
        - 0.5 * k11 * a1 * a1
        - 0.5 * k22 * a2 * a2
        - s * k12 * a1 * a2
        - y1 * a1 * v1
        - y2 * a2 * v2
    )


def dual_objective(alphas: np.ndarray, y: np.ndarray, gram: np.ndarray) -> float:
    ay = alphas * y
    return float(alphas.sum() - 0.5 * ay @ gram @ ay)


def _optimal_bias(alphas: np.ndarray, y: np.ndarray, f0: np.ndarray, c: float) -> float:
    """Best threshold for fixed alphas (f0 is the decision value without b).

    With free support vectors the margin pins b exactly; otherwise the
    stationarity conditions only bound it, and the midpoint of the feasible
    interval is used.
    """
    t = y - f0
    interior = (alphas > 1e-10) & (alphas < c - 1e-10)
    if interior.any():
        return float(t[interior].mean())
    lower = ((alphas <= 1e-10) & (y > 0)) | ((alphas >= c - 1e-10) & (y < 0))
    upper = ((alphas <= 1e-10) & (y < 0)) | ((alphas >= c - 1e-10) & (y > 0))
    b_lo = t[lower].max() if lower.any() else None
    b_hi = t[upper].min() if upper.any() else None
    if b_lo is None:
        return float(b_hi)
    if b_hi is None:
        return float(b_lo)
    return float(0.5 * (b_lo + b_hi))


def smo_train(X, y, cfg: SvmConfig | None = None) -> SvmBinaryModel:
    """Train a soft-margin linear SVM on dense rows of X with labels ±1.

    Full passes run in a seed-shuffled order over the current KKT violators;
    each violator is paired with the example of maximal error difference
    (falling back to a shuffled scan).  Training stops once no violations
    remain, or after ``max_passes`` consecutive passes without any alpha
    moving by more than ``eps`` (plus a generous hard cap as a safety valve).
    """
    if cfg is None:
        cfg = SvmConfig()
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatch(f"X must be 2-D, got shape {X.shape}")
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (X.shape[0],):
        raise DimensionMismatch("y length must match X rows")
    if X.shape[0] < 2:
        raise DimensionMismatch("need at least two training examples")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise SingleClassInput("both labels must be present")
    if not np.all(np.abs(y) == 1.0):
        raise ValueError("labels must be -1 or +1")

    n = X.shape[0]
    c = cfg.c
    eps = cfg.eps
    # Violation trigger far below tol: keeps the final dual within oracle
    # tolerance while the reported KKT check still uses cfg.tol.
    trigger = min(cfg.tol, 1e-9)
    rng = random.Random(cfg.seed)

    gram = X @ X.T
    alphas = np.zeros(n)
    b = 0.0
    errors = -y.copy()  # u - y with all alphas at zero

    def take_step(i1: int, i2: int) -> bool:
        nonlocal b, errors
        if i1 == i2:
            return False
        a1, a2 = alphas[i1], alphas[i2]
        y1, y2 = y[i1], y[i2]
        e1, e2 = errors[i1], errors[i2]
        s = y1 * y2
        if s < 0:
            low, high = max(0.0, a2 - a1), min(c, c + a2 - a1)
        else:
            low, high = max(0.0, a1 + a2 - c), min(c, a1 + a2)
        if high - low < 1e-15:
            return False
        k11, k22, k12 = gram[i1, i1], gram[i2, i2], gram[i1, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0.0:
            a2_new = a2 + y2 * (e1 - e2) / eta
            a2_new = min(max(a2_new, low), high)
        else:
            # Flat or concave direction: move to whichever bound scores the
            # better restricted objective.
            gamma = a1 + s * a2
            u1, u2 = e1 + y1, e2 + y2
            v1 = (u1 - b) - y1 * a1 * k11 - y2 * a2 * k12
            v2 = (u2 - b) - y1 * a1 * k12 - y2 * a2 * k22
            obj_low = _pair_objective(gamma - s * low, low, k11, k22, k12, s, y1, y2, v1, v2)
            obj_high = _pair_objective(gamma - s * high, high, k11, k22, k12, s, y1, y2, v1, v2)
            if obj_low > obj_high + eps:
                a2_new = low
            elif obj_high > obj_low + eps:
                a2_new = high
            else:
                a2_new = a2
        if abs(a2_new - a2) < eps * (a2_new + a2 + eps):
            return False
        a1_new = a1 + s * (a2 - a2_new)
        # Snap near-bound values exactly, preserving the equality constraint.
        if a1_new < 1e-10:
            a1_new = 0.0
        elif a1_new > c - 1e-10:
            a1_new = c
        a2_new = s * (a1 + s * a2 - a1_new)
        a2_new = min(max(a2_new, 0.0), c)

        d1, d2 = a1_new - a1, a2_new - a2
        b1 = b - e1 - y1 * d1 * k11 - y2 * d2 * k12
        b2 = b - e2 - y1 * d1 * k12 - y2 * d2 * k22
        if 0.0 < a1_new < c:
            b_new = b1
        elif 0.0 < a2_new < c:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)

        alphas[i1], alphas[i2] = a1_new, a2_new
        errors += y1 * d1 * gram[i1] + y2 * d2 * gram[i2] + (b_new - b)
        b = b_new
        return True

    def examine(i2: int) -> bool:
        r2 = y[i2] * errors[i2]
        if not ((r2 < -trigger and alphas[i2] < c) or (r2 > trigger and alphas[i2] > 0)):
            return False
        non_bound = np.flatnonzero((alphas > 0) & (alphas < c))
        if non_bound.size > 1:
            i1 = int(non_bound[np.argmax(np.abs(errors[i2] - errors[non_bound]))])
            if take_step(i1, i2):
                return True
        candidates = list(non_bound)
        rng.shuffle(candidates)
        for i1 in candidates:
            if take_step(int(i1), i2):
                return True
        everyone = list(range(n))
        rng.shuffle(everyone)
        for i1 in everyone:
            if take_step(i1, i2):
                return True
        return False

    quiet_passes = 0
    hard_cap = 10_000
    for _ in range(hard_cap):
        # Fresh error cache each pass so incremental updates cannot drift,
        # with the threshold re-centered on the current alphas (the update
        # directions only use error differences, so this cannot bias them).
        f0 = (alphas * y) @ gram
        b = _optimal_bias(alphas, y, f0, c)
        errors = f0 + b - y
        r = y * errors
        violators = np.flatnonzero(
            ((r < -trigger) & (alphas < c)) | ((r > trigger) & (alphas > 0))
        )
        if violators.size == 0:
            break
        order = list(violators)
        rng.shuffle(order)
        changed = sum(examine(int(i)) for i in order)
        quiet_passes = 0 if changed else quiet_passes + 1
        if quiet_passes >= cfg.max_passes:
            break

    b = _optimal_bias(alphas, y, (alphas * y) @ gram, c)
    w = (alphas * y) @ X
    return SvmBinaryModel(w=w, b=b, alphas=alphas, X=X, y=y, config=cfg)


def kkt_violation(model: SvmBinaryModel, tol: float | None = None) -> float:
    """Largest violation of the stationarity conditions over the training
    set (0.0 means every example satisfies them within the tolerance)."""
    if model.X is None or model.y is None or model.alphas is None:
        raise ValueError("model does not carry its training set")
    if tol is None:
        tol = model.config.tol
    f = model.X @ model.w + model.b
    r = model.y * f
    worst = 0.0
    for a, ri in zip(model.alphas, r):
        if a < 1e-10:
            worst = max(worst, (1.0 - tol) - ri)
        elif a > model.config.c - 1e-10:
            worst = max(worst, ri - (1.0 + tol))
        else:
            worst = max(worst, abs(ri - 1.0) - tol)
    return max(worst, 0.0)


# ---------------------------------------------------------------------------
# One-vs-one multiclass


@dataclass(frozen=True)
class SvmMulticlassModel:
    """Pairwise binary models over a fixed class order.

    In each pair the class earlier in the order is the positive side.
    """

    classes: tuple[Label, ...]
    pairs: tuple[tuple[Label, Label], ...]
    models: tuple[SvmBinaryModel, ...]
    feature_space: FeatureSpace
    config: SvmConfig


def train_multiclass(
    vectors: Sequence[BinaryVector],
    labels: Sequence[Label],
    fs: FeatureSpace,
    cfg: SvmConfig | None = None,
    jobs: int = 1,
) -> SvmMulticlassModel:
    """Train one binary model per class pair, each on the pair's examples
    only.  Pairwise trainings are independent; ``jobs`` > 1 runs them in a
    thread pool (identical results, pairs are assembled in a fixed order)."""
    if cfg is None:
        cfg = SvmConfig()
    if len(vectors) != len(labels):
        raise DimensionMismatch("need one label per vector")
    present = [c for c in CLASS_ORDER if c in set(labels)]
    if len(present) < 2:
        raise SingleClassInput("need at least two classes to train")

    X_all = densify(vectors, len(fs))
    by_class: dict[Label, list[int]] = {c: [] for c in present}
    for i, lab in enumerate(labels):
        by_class[lab].append(i)

    pair_list = list(combinations(present, 2))

    def _train_pair(pair: tuple[Label, Label]) -> SvmBinaryModel:
        pos, neg = pair
        rows = by_class[pos] + by_class[neg]
        X = X_all[rows]
        y = np.array([1.0] * len(by_class[pos]) + [-1.0] * len(by_class[neg]))
        return smo_train(X, y, cfg)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            models = tuple(pool.map(_train_pair, pair_list))
    else:
        models = tuple(_train_pair(p) for p in pair_list)

    return SvmMulticlassModel(
        classes=tuple(present),
        pairs=tuple(pair_list),
        models=models,
        feature_space=fs,
        config=cfg,
    )


def predict_svm(
    model: SvmMulticlassModel, vec: BinaryVector
) -> tuple[Label, dict[Label, int]]:
    """Vote across the pairwise models; a decision value >= 0 votes the
    positive (earlier) class.  Ties go to the earliest class in order."""
    x = densify([vec], len(model.feature_space))[0]
    tally = {c: 0 for c in model.classes}
    for (pos, neg), bin_model in zip(model.pairs, model.models):
        if bin_model.decision(x) >= 0.0:
            tally[pos] += 1
        else:
            tally[neg] += 1
    best = max(model.classes, key=lambda c: (tally[c], -model.classes.index(c)))
    return best, tally


def save_svm(model: SvmMulticlassModel, path: str | Path) -> None:
    payload = {
        "format": SVM_FORMAT,
        "version": SVM_VERSION,
        "classes": [c.value for c in model.classes],
        "feature_space": list(model.feature_space.lemmas),
        "config": {
            "c": model.config.c,
            "tol": model.config.tol,
            "eps": model.config.eps,
            "max_passes": model.config.max_passes,
            "seed": model.config.seed,
        },
        "pairs": [
            {
                "positive": pos.value,
                "negative": neg.value,
                "b": bin_model.b,
                "w": [
                    [int(i), float(v)]
                    for i, v in enumerate(bin_model.w)
                    if v != 0.0
                ],
            }
            for (pos, neg), bin_model in zip(model.pairs, model.models)
        ],
    }
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=1)
        fh.write("\n")


def load_svm(path: str | Path) -> SvmMulticlassModel:
    with Path(path).open(encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != SVM_FORMAT:
        raise ValueError(f"{path}: not an SVM model file")
    if payload.get("version") != SVM_VERSION:
        raise ValueError(f"{path}: unsupported model version")
    fs = FeatureSpace(columns={w: i for i, w in enumerate(payload["feature_space"])})
    cfg = SvmConfig(**payload["config"])
    pairs: list[tuple[Label, Label]] = []
    models: list[SvmBinaryModel] = []
    for entry in payload["pairs"]:
        pairs.append((Label(entry["positive"]), Label(entry["negative"])))
        w = np.zeros(len(fs))
        for i, v in entry["w"]:
            w[i] = v
        models.append(
            SvmBinaryModel(w=w, b=float(entry["b"]), alphas=None, X=None, y=None, config=cfg)
        )
    return SvmMulticlassModel(
        classes=tuple(Label(c) for c in payload["classes"]),
        pairs=tuple(pairs),
        models=tuple(models),
        feature_space=fs,
        config=cfg,
    )


# ---------------------------------------------------------------------------
# Topic-likelihood baseline


@dataclass(frozen=True)
class LdaPrediction:
    label: Label
    abstained: bool
    scores: dict[Label, float]


@dataclass(frozen=True)
class LdaClassifier:
    """Wraps a topic model with a bijective topic-to-class map.

    Each topic keeps a likelihood floor (its smallest word probability) so
    unseen words contribute a finite penalty instead of a zero product.
    """

    model: TopicModel
    class_map: dict[int, Label]
    floors: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        k = self.model.k
        if sorted(self.class_map) != list(range(k)):
            raise ValueError("class map must cover every topic exactly once")
        if len(set(self.class_map.values())) != k:
            raise ValueError("class map must be a bijection")
        if not self.floors:
            object.__setattr__(
                self, "floors", tuple(float(row.min()) for row in self.model.phi)
            )

    @cached_property
    def word_index(self) -> dict[str, int]:
        return {w: i for i, w in enumerate(self.model.vocabulary)}


def classify_lda(tokens: TokenStream, clf: LdaClassifier) -> LdaPrediction:
    """Per-class sum of log word likelihoods under the mapped topic; the
    best class wins, ties and all-unseen messages fall back to class order."""
    index = clf.word_index
    known = [index[t] for t in tokens if t in index]
    order = [c for c in CLASS_ORDER if c in clf.class_map.values()]
    if not known:
        return LdaPrediction(label=order[0], abstained=True, scores={c: 0.0 for c in order})

    scores: dict[Label, float] = {}
    for topic, label in clf.class_map.items():
        row = clf.model.phi[topic]
        floor = clf.floors[topic]
        scores[label] = float(sum(np.log(np.maximum(row[known], floor))))
    best = max(order, key=lambda c: (scores[c], -order.index(c)))
    return LdaPrediction(label=best, abstained=False, scores=scores)


def fit_topic_class_map(
    model: TopicModel, docs: Sequence[TokenStream], labels: Sequence[Label]
) -> dict[int, Label]:
    """Choose the topic-to-class bijection that best explains a labeled
    sample, by scoring every permutation's training accuracy.  Used where no
    hand-made map is available (e.g. inside cross-validation folds)."""
    if len(docs) != len(labels):
        raise DimensionMismatch("need one label per document")
    classes = [c for c in CLASS_ORDER if c in set(labels)]
    if len(classes) != model.k:
        raise ValueError(
            f"need exactly {model.k} distinct classes, got {len(classes)}"
        )
    best_map: dict[int, Label] | None = None
    best_hits = -1
    for perm in permutations(classes):
        mapping = dict(enumerate(perm))
        clf = LdaClassifier(model=model, class_map=mapping)
        hits = sum(
            classify_lda(doc, clf).label == lab for doc, lab in zip(docs, labels)
        )
        if hits > best_hits:
            best_hits = hits
            best_map = mapping
    assert best_map is not None
    return best_map


def read_topic_class_map(path: str | Path) -> dict[int, Label]:
    """Two-column CSV (topic_index, class), optional header row."""
    mapping: dict[int, Label] = {}
    with Path(path).open(encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#"):
                continue
            if row[0].strip().lower() in ("topic", "topic_index"):
                continue
            if len(row) < 2:
                raise ValueError(f"{path}: expected topic_index,class rows")
            idx = int(row[0])
            if idx in mapping:
                raise ValueError(f"{path}: duplicate topic index {idx}")
            mapping[idx] = Label(row[1].strip())
    if not mapping:
        raise ValueError(f"{path}: empty topic-class map")
    return mapping


def write_topic_class_map(mapping: Mapping[int, Label], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["topic_index", "class"])
        for idx in sorted(mapping):
            writer.writerow([idx, mapping[idx].value])
