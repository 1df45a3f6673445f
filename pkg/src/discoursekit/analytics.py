"""Per-group discourse indicators, correlations between them, and PCA.

Each class group becomes one row of eleven variables: the proportions of
the three discourse functions among its student messages and again among
its teacher messages, activity progress, roster size, the mean and variance
of the day gaps between completed activities, and the teacher share of all
messages.  Rows feed a Pearson correlation matrix and a PCA over the
correlation matrix (variables standardized), with CSV exports for the
feature table, the lower-triangle correlation layout, the eigen summary
and biplot arrows/points.

Dispersion is population-style (divide by N) throughout, matching the
corpus summaries.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from discoursekit.corpus import Corpus, GroupMetadata, Label, Message, Role

#: Canonical variable order for tables, correlation matrices and PCA.
VARIABLES: tuple[str, ...] = (
    "referential_s",
    "phatic_s",
    "emotive_s",
    "referential_t",
    "phatic_t",
    "emotive_t",
    "progress",
    "students",
    "mean_gap",
    "var_gap",
    "teacher_participation",
)


class MissingMetadataError(KeyError):
    def __init__(self, group_id: str):
        self.group_id = group_id
        super().__init__(f"no metadata for group {group_id!r}")


class UnlabeledMessageError(ValueError):
    def __init__(self, message_id: str):
        self.message_id = message_id
        super().__init__(f"message {message_id!r} has no label")


class TooFewRowsError(ValueError):
    pass


@dataclass(frozen=True)
class GroupFeatureRow:
    group_id: str
    dd_id: str
    referential_s: float
    phatic_s: float
    emotive_s: float
    referential_t: float
    phatic_t: float
    emotive_t: float
    progress: float
    students: int
    mean_gap: float
    var_gap: float
    teacher_participation: float
    degenerate_gaps: bool = False  # fewer than 2 completed activities

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in VARIABLES], dtype=np.float64)


def _role_fractions(messages: list[Label]) -> tuple[float, float, float]:
    """(referential, phatic, emotive) proportions; zeros when empty."""
    if not messages:
        return 0.0, 0.0, 0.0
    n = len(messages)
    return (
        sum(1 for lab in messages if lab is Label.REFERENTIAL) / n,
        sum(1 for lab in messages if lab is Label.PHATIC) / n,
        sum(1 for lab in messages if lab is Label.EMOTIVE) / n,
    )


def group_features(
    corpus: Corpus | Iterable[Message],
    metadata: Sequence[GroupMetadata],
    labels: Mapping[str, Label] | None = None,
) -> list[GroupFeatureRow]:
    """One feature row per group in the corpus, sorted by group id.

    A message's label is taken from ``labels`` (predictions) first, then
    from its gold label; a message with neither aborts the run, as does a
    group without metadata.
    """
    meta_by_id = {m.group_id: m for m in metadata}
    student: dict[str, list[Label]] = {}
    teacher: dict[str, list[Label]] = {}
    dd_ids: dict[str, str] = {}

    for msg in corpus:
        label = labels.get(msg.id) if labels else None
        if label is None:
            label = msg.gold_label
        if label is None:
            raise UnlabeledMessageError(msg.id)
        dd_ids.setdefault(msg.group_id, msg.dd_id)
        bucket = student if msg.role is Role.STUDENT else teacher
        bucket.setdefault(msg.group_id, []).append(label)

    rows: list[GroupFeatureRow] = []
    for group_id in sorted(dd_ids):
        if group_id not in meta_by_id:
            raise MissingMetadataError(group_id)
        meta = meta_by_id[group_id]
        s_msgs = student.get(group_id, [])
        t_msgs = teacher.get(group_id, [])
        ref_s, pha_s, emo_s = _role_fractions(s_msgs)
        ref_t, pha_t, emo_t = _role_fractions(t_msgs)

        dates = meta.completed_activity_dates
        if len(dates) < 2:
            mean_gap, var_gap, degenerate = 0.0, 0.0, True
        else:
            gaps = np.array(
                [(b - a).days for a, b in zip(dates, dates[1:])], dtype=np.float64
            )
            mean_gap = float(gaps.mean())
            var_gap = float(gaps.var())  # population variance
            degenerate = False

        total = len(s_msgs) + len(t_msgs)
        rows.append(
            GroupFeatureRow(
                group_id=group_id,
                dd_id=dd_ids[group_id],
                referential_s=ref_s,
                phatic_s=pha_s,
                emotive_s=emo_s,
                referential_t=ref_t,
                phatic_t=pha_t,
                emotive_t=emo_t,
                progress=meta.progress,
                students=meta.n_students,
                mean_gap=mean_gap,
                var_gap=var_gap,
                teacher_participation=len(t_msgs) / total if total else 0.0,
                degenerate_gaps=degenerate,
            )
        )
    return rows


def feature_matrix(rows: Sequence[GroupFeatureRow]) -> np.ndarray:
    return np.vstack([r.as_vector() for r in rows])


# ---------------------------------------------------------------------------
# Correlations


@dataclass(frozen=True)
class CorrelationMatrix:
    variables: tuple[str, ...]
    values: np.ndarray
    undefined: np.ndarray  # mask of cells forced to 0 (constant variable)

    def get(self, a: str, b: str) -> float:
        i, j = self.variables.index(a), self.variables.index(b)
        return float(self.values[i, j])


def _column_spread(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Population std per column plus a mask of effectively constant columns.

    A repeated value such as 0.1 has no exact binary form, so depending on
    reduction order its std can come out as rounding noise (about 1e-17)
    instead of exactly zero.  Spread below 1e-12 of the column magnitude is
    therefore treated as no variance at all.
    """
    std = x.std(axis=0)  # population
    scale = np.maximum(1.0, np.abs(x).max(axis=0))
    return std, std <= 1e-12 * scale


def pearson_from_matrix(
    x: np.ndarray, variables: Sequence[str]
) -> CorrelationMatrix:
    """Pearson coefficients column by column; constant columns yield rows
    and columns of flagged zeros (diagonal stays 1)."""
    n, k = x.shape
    if n < 3:
        raise TooFewRowsError(f"need >= 3 rows, got {n}")
    if k != len(variables):
        raise ValueError("variable names must match columns")
    mean = x.mean(axis=0)
    std, constant = _column_spread(x)
    safe_std = np.where(constant, 1.0, std)
    z = (x - mean) / safe_std
    values = (z.T @ z) / n
    undefined = np.zeros((k, k), dtype=bool)
    undefined[constant, :] = True
    undefined[:, constant] = True
    values[undefined] = 0.0
    np.fill_diagonal(values, 1.0)
    values = np.clip(values, -1.0, 1.0)
    return CorrelationMatrix(
        variables=tuple(variables), values=values, undefined=undefined
    )


def pearson_matrix(rows: Sequence[GroupFeatureRow]) -> CorrelationMatrix:
    return pearson_from_matrix(feature_matrix(rows), VARIABLES)


# ---------------------------------------------------------------------------
# PCA


@dataclass(frozen=True)
class PcaResult:
    variables: tuple[str, ...]          # retained variables, original order
    eigenvalues: np.ndarray             # descending
    loadings: np.ndarray                # column j = component j, orthonormal
    scores: np.ndarray                  # standardized data x loadings
    explained: tuple[float, ...]        # eigenvalue / retained count
    dropped: tuple[str, ...] = ()


def _jacobi_eigh(a: np.ndarray, tol: float = 1e-10, max_sweeps: int = 100):
    """Cyclic Jacobi rotations on a symmetric matrix until the off-diagonal
    Frobenius norm falls below tol.  Returns (eigenvalues, eigenvectors)."""
    a = a.copy()
    n = a.shape[0]
    vectors = np.eye(n)

    def off_norm() -> float:
        # Summing the off-diagonal entries themselves avoids the catastrophic
        # cancellation of a total-minus-diagonal difference, which would
        # report zero long before the entries are actually small.
        off = a.copy()
        np.fill_diagonal(off, 0.0)
        return float(np.sqrt((off**2).sum()))

    for _ in range(max_sweeps):
        if off_norm() < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(diff) > 1e12 * abs(apq):
                    # Tiny rotation angle; the exact formula would overflow.
                    t = apq / diff
                elif diff == 0.0:
                    t = 1.0
                else:
                    theta = diff / (2.0 * apq)
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                rot_p = c * a[p, :] - s * a[q, :]
                rot_q = s * a[p, :] + c * a[q, :]
                a[p, :], a[q, :] = rot_p, rot_q
                rot_p = c * vectors[:, p] - s * vectors[:, q]
                rot_q = s * vectors[:, p] + c * vectors[:, q]
                vectors[:, p], vectors[:, q] = rot_p, rot_q
    return np.diag(a).copy(), vectors


def pca(rows: Sequence[GroupFeatureRow]) -> PcaResult:
    """PCA over the correlation matrix of the feature table.

    Zero-variance variables cannot be standardized; they are dropped with a
    warning and recorded on the result.
    """
    x = feature_matrix(rows)
    if x.shape[0] < 3:
        raise TooFewRowsError(f"need >= 3 rows, got {x.shape[0]}")

    std, constant = _column_spread(x)
    keep = ~constant
    dropped = tuple(v for v, ok in zip(VARIABLES, keep) if not ok)
    if dropped:
        warnings.warn(f"dropping zero-variance variables: {', '.join(dropped)}",
                      stacklevel=2)
    x = x[:, keep]
    names = tuple(v for v, ok in zip(VARIABLES, keep) if ok)
    if x.shape[1] == 0:
        raise TooFewRowsError("no variables left after dropping constants")

    # Reuse the std the keep decision was made from; recomputing it on the
    # filtered array can flip a borderline column back to zero.
    z = (x - x.mean(axis=0)) / std[keep]
    corr = (z.T @ z) / x.shape[0]
    eigenvalues, vectors = _jacobi_eigh(corr)

    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = eigenvalues[order]
    vectors = vectors[:, order]
    # Deterministic orientation: largest-magnitude entry of each loading
    # vector points up.
    for j in range(vectors.shape[1]):
        pivot = np.argmax(np.abs(vectors[:, j]))
        if vectors[pivot, j] < 0:
            vectors[:, j] = -vectors[:, j]

    scores = z @ vectors
    k = len(names)
    return PcaResult(
        variables=names,
        eigenvalues=eigenvalues,
        loadings=vectors,
        scores=scores,
        explained=tuple(float(ev) / k for ev in eigenvalues),
        dropped=dropped,
    )


# ---------------------------------------------------------------------------
# CSV exports


def write_feature_table(rows: Sequence[GroupFeatureRow], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        fh.write("# dispersion variables use population (1/N) variance\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["group_id", "dd_id", *VARIABLES, "degenerate_gaps"])
        for r in rows:
            writer.writerow(
                [r.group_id, r.dd_id]
                + [repr(float(getattr(r, v))) for v in VARIABLES]
                + [int(r.degenerate_gaps)]
            )


def write_correlation_csv(cm: CorrelationMatrix, path: str | Path) -> None:
    """Lower-triangle layout (diagonal included); a final column lists the
    variables this row's coefficients were undefined against, if any."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["variable", *cm.variables, "undefined_with"])
        for i, name in enumerate(cm.variables):
            cells: list[str] = []
            for j in range(len(cm.variables)):
                cells.append(repr(float(cm.values[i, j])) if j <= i else "")
            flagged = ";".join(
                other
                for j, other in enumerate(cm.variables)
                if cm.undefined[i, j] and j != i
            )
            writer.writerow([name, *cells, flagged])


def write_eigen_csv(result: PcaResult, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["component", "eigenvalue", "explained_fraction", "cumulative"])
        running = 0.0
        for j, (ev, frac) in enumerate(zip(result.eigenvalues, result.explained), start=1):
            running += frac
            writer.writerow([j, repr(float(ev)), repr(float(frac)), repr(running)])


def export_biplot(
    result: PcaResult,
    rows: Sequence[GroupFeatureRow],
    loadings_path: str | Path,
    scores_path: str | Path,
) -> None:
    """Arrow endpoints (variable loadings on the first two components) and
    group points (scores), with the plane's explained variance up front."""
    if result.loadings.shape[1] < 2:
        raise ValueError("biplot needs at least two components")
    plane = result.explained[0] + result.explained[1]
    header = (
        f"# PC1 explains {result.explained[0]:.6f}, PC2 {result.explained[1]:.6f},"
        f" plane {plane:.6f} of the variance\n"
    )
    with Path(loadings_path).open("w", encoding="utf-8", newline="") as fh:
        fh.write(header)
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["variable", "pc1", "pc2"])
        for i, name in enumerate(result.variables):
            writer.writerow(
                [name, repr(float(result.loadings[i, 0])), repr(float(result.loadings[i, 1]))]
            )
    with Path(scores_path).open("w", encoding="utf-8", newline="") as fh:
        fh.write(header)
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["group_id", "dd_id", "pc1", "pc2"])
        for r, row in zip(rows, result.scores):
            writer.writerow([r.group_id, r.dd_id, repr(float(row[0])), repr(float(row[1]))])
