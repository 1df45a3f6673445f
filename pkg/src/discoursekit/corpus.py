"""Message corpora: loading, validation, summary statistics, synthetic generation.

A corpus is a flat, ordered collection of short microblog messages posted by
students and teachers of class groups working through a scripted sequence of
classroom activities.  Records travel as JSONL (one message per line) or as
CSV with a header row carrying the same field names.  Group-level metadata
(roster size, activity schedule) lives in a separate JSONL file.
"""

from __future__ import annotations

import csv
import json
import random
import statistics
from dataclasses import dataclass
from datetime import date, datetime, timedelta, timezone
from enum import Enum
from pathlib import Path
from typing import Iterator, Mapping, Sequence


class Role(str, Enum):
    STUDENT = "Student"
    TEACHER = "Teacher"


class Subject(str, Enum):
    LANGUAGE = "Language"
    HISTORY = "History"
    TECHNOLOGY = "Technology"


class Level(str, Enum):
    MIDDLE = "Middle"
    HIGH = "High"


class Label(str, Enum):
    """The three discourse functions this toolkit classifies."""

    PHATIC = "Phatic"
    EMOTIVE = "Emotive"
    REFERENTIAL = "Referential"


#: Canonical class order; also the tie-break order used by the classifiers.
CLASS_ORDER: tuple[Label, ...] = (Label.PHATIC, Label.EMOTIVE, Label.REFERENTIAL)


class CorpusError(ValueError):
    """Base class for corpus parsing and validation failures."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MalformedRecordError(CorpusError):
    pass


class DuplicateIdError(CorpusError):
    pass


class BadRoleError(CorpusError):
    pass


class BadTimestampError(CorpusError):
    pass


class EmptySpecError(ValueError):
    pass


@dataclass(frozen=True)
class Message:
    """One microblog post.

    ``gold_label`` is present only for messages that went through manual
    annotation (or synthetic generation); it is ``None`` otherwise.
    """

    id: str
    group_id: str
    dd_id: str
    role: Role
    subject: Subject
    level: Level
    timestamp: datetime
    text: str
    gold_label: Label | None = None

    @property
    def is_degenerate(self) -> bool:
        """True when the message carries no usable text."""
        return not self.text.strip()


@dataclass(frozen=True)
class Corpus:
    """An immutable, ordered message collection with unique ids."""

    messages: tuple[Message, ...]
    source_path: str = ""

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for i, m in enumerate(self.messages):
            if m.id in seen:
                raise DuplicateIdError(f"duplicate message id {m.id!r}", line=i + 1)
            seen.add(m.id)

    def __len__(self) -> int:
        return len(self.messages)

    def __iter__(self) -> Iterator[Message]:
        return iter(self.messages)

    def group_ids(self) -> tuple[str, ...]:
        """Distinct group ids in first-appearance order."""
        out: dict[str, None] = {}
        for m in self.messages:
            out.setdefault(m.group_id, None)
        return tuple(out)


@dataclass(frozen=True)
class GroupMetadata:
    """Per-group context: roster size and the activity completion schedule."""

    group_id: str
    n_students: int
    total_activities: int
    completed_activity_dates: tuple[date, ...]

    def __post_init__(self) -> None:
        if self.n_students < 1:
            raise ValueError(f"group {self.group_id}: n_students must be >= 1")
        if len(self.completed_activity_dates) > self.total_activities:
            raise ValueError(
                f"group {self.group_id}: completed activities exceed total"
            )
        for a, b in zip(self.completed_activity_dates, self.completed_activity_dates[1:]):
            if b < a:
                raise ValueError(
                    f"group {self.group_id}: completed dates must be non-decreasing"
                )

    @property
    def progress(self) -> float:
        """Fraction of scheduled activities the group completed."""
        if self.total_activities == 0:
            return 0.0
        return len(self.completed_activity_dates) / self.total_activities


@dataclass(frozen=True)
class RoleDistribution:
    """Distribution of per-group message counts for one author role.

    Computed over groups that have at least one message of that role; the
    standard deviation is the population one (divide by N).
    """

    n_groups: int
    median: float
    mean: float
    std: float
    maximum: int


@dataclass(frozen=True)
class SummaryStats:
    total: int
    by_role: dict[Role, int]
    by_level: dict[Level, int]
    by_subject: dict[Subject, int]
    per_group: dict[Role, RoleDistribution]


# ---------------------------------------------------------------------------
# Parsing helpers


_FIELDS = ("id", "group_id", "dd_id", "role", "subject", "level", "timestamp", "text")


def _parse_timestamp(raw: str, line: int) -> datetime:
    text = raw.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    try:
        parsed = datetime.fromisoformat(text)
    except ValueError as exc:
        raise BadTimestampError(f"unparseable timestamp {raw!r}", line=line) from exc
    if parsed.tzinfo is None:
        # Date-only and naive stamps normalize to midnight / wall-clock UTC.
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed.astimezone(timezone.utc)


def _parse_record(record: Mapping[str, object], line: int) -> Message:
    for field in _FIELDS:
        if field not in record or record[field] is None:
            raise MalformedRecordError(f"missing field {field!r}", line=line)
    try:
        role = Role(str(record["role"]))
    except ValueError:
        raise BadRoleError(f"unknown role {record['role']!r}", line=line) from None
    try:
        subject = Subject(str(record["subject"]))
        level = Level(str(record["level"]))
    except ValueError as exc:
        raise MalformedRecordError(str(exc), line=line) from None
    raw_label = record.get("gold_label")
    gold: Label | None = None
    if raw_label not in (None, ""):
        try:
            gold = Label(str(raw_label))
        except ValueError:
            raise MalformedRecordError(
                f"unknown gold_label {raw_label!r}", line=line
            ) from None
    return Message(
        id=str(record["id"]),
        group_id=str(record["group_id"]),
        dd_id=str(record["dd_id"]),
        role=role,
        subject=subject,
        level=level,
        timestamp=_parse_timestamp(str(record["timestamp"]), line),
        text=str(record["text"]),
        gold_label=gold,
    )


def load_corpus(path: str | Path, format: str = "jsonl") -> Corpus:
    """Load a corpus file. Parsing is all-or-nothing: the first bad record
    aborts with its line number.
    """
    path = Path(path)
    messages: list[Message] = []
    seen: set[str] = set()

    def _add(record: Mapping[str, object], line: int) -> None:
        msg = _parse_record(record, line)
        if msg.id in seen:
            raise DuplicateIdError(f"duplicate message id {msg.id!r}", line=line)
        seen.add(msg.id)
        messages.append(msg)

    if format == "jsonl":
        with path.open(encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                if not raw.strip():
                    continue
                try:
                    record = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise MalformedRecordError(f"invalid JSON: {exc}", line=line_no) from None
                if not isinstance(record, dict):
                    raise MalformedRecordError("record is not an object", line=line_no)
                _add(record, line_no)
    elif format == "csv":
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise MalformedRecordError("missing CSV header", line=1)
            for record in reader:
                _add(record, reader.line_num)
    else:
        raise ValueError(f"unknown corpus format {format!r}")

    return Corpus(messages=tuple(messages), source_path=str(path))


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write JSONL that :func:`load_corpus` round-trips to an equal corpus."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for m in corpus:
            record: dict[str, object] = {
                "id": m.id,
                "group_id": m.group_id,
                "dd_id": m.dd_id,
                "role": m.role.value,
                "subject": m.subject.value,
                "level": m.level.value,
                "timestamp": m.timestamp.isoformat(),
                "text": m.text,
            }
            if m.gold_label is not None:
                record["gold_label"] = m.gold_label.value
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_group_metadata(path: str | Path) -> list[GroupMetadata]:
    path = Path(path)
    out: list[GroupMetadata] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise MalformedRecordError(f"invalid JSON: {exc}", line=line_no) from None
            try:
                meta = GroupMetadata(
                    group_id=str(record["group_id"]),
                    n_students=int(record["n_students"]),
                    total_activities=int(record["total_activities"]),
                    completed_activity_dates=tuple(
                        date.fromisoformat(d) for d in record["completed_activity_dates"]
                    ),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedRecordError(str(exc), line=line_no) from None
            if meta.group_id in seen:
                raise DuplicateIdError(
                    f"duplicate group id {meta.group_id!r}", line=line_no
                )
            seen.add(meta.group_id)
            out.append(meta)
    return out


def save_group_metadata(groups: Sequence[GroupMetadata], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for g in groups:
            record = {
                "group_id": g.group_id,
                "n_students": g.n_students,
                "total_activities": g.total_activities,
                "completed_activity_dates": [d.isoformat() for d in g.completed_activity_dates],
            }
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


# ---------------------------------------------------------------------------
# Summary statistics


def corpus_summary(corpus: Corpus) -> SummaryStats:
    """Counts by role/level/subject plus per-group message-count distributions.

    Group distributions are computed per role over the groups that have at
    least one message of that role; groups with zero messages of a role are
    excluded from that role's distribution.
    """
    by_role = {r: 0 for r in Role}
    by_level = {lv: 0 for lv in Level}
    by_subject = {s: 0 for s in Subject}
    group_counts: dict[Role, dict[str, int]] = {r: {} for r in Role}
    for m in corpus:
        by_role[m.role] += 1
        by_level[m.level] += 1
        by_subject[m.subject] += 1
        counts = group_counts[m.role]
        counts[m.group_id] = counts.get(m.group_id, 0) + 1

    per_group: dict[Role, RoleDistribution] = {}
    for role, counts in group_counts.items():
        values = sorted(counts.values())
        if not values:
            continue
        per_group[role] = RoleDistribution(
            n_groups=len(values),
            median=float(statistics.median(values)),
            mean=float(statistics.fmean(values)),
            std=float(statistics.pstdev(values)),
            maximum=max(values),
        )

    return SummaryStats(
        total=len(corpus),
        by_role=by_role,
        by_level=by_level,
        by_subject=by_subject,
        per_group=per_group,
    )


# ---------------------------------------------------------------------------
# Synthetic corpora


@dataclass(frozen=True)
class ClassSpec:
    """Vocabulary and mixing weight of one generating class."""

    label: Label
    vocabulary: tuple[str, ...]
    weight: float = 1.0


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a deterministic synthetic corpus.

    Each message draws its tokens from the vocabulary of a class sampled by
    weight; with probability ``noise_rate`` a token is drawn from the union
    of all class vocabularies instead.  The generating class is recorded as
    the message's gold label.
    """

    classes: tuple[ClassSpec, ...]
    n_groups: int
    student_messages_per_group: int
    teacher_messages_per_group: int
    noise_rate: float = 0.0
    tokens_per_message: tuple[int, int] = (3, 8)
    start_date: date = date(2013, 3, 4)
    total_activities: int = 10
    completed_range: tuple[int, int] = (5, 10)
    activity_gap_days: tuple[int, int] = (4, 10)
    students_range: tuple[int, int] = (18, 38)
    n_designs: int = 5


def generate_synthetic(spec: SynthSpec, seed: int) -> tuple[Corpus, list[GroupMetadata]]:
    """Build a labeled corpus plus group metadata, reproducibly for a seed."""
    if not spec.classes or any(not c.vocabulary for c in spec.classes):
        raise EmptySpecError("every class needs a non-empty vocabulary")
    if not 0.0 <= spec.noise_rate <= 1.0:
        raise EmptySpecError("noise_rate must be in [0, 1]")
    if spec.n_groups < 1:
        raise EmptySpecError("n_groups must be >= 1")

    rng = random.Random(seed)
    union_vocab = tuple(w for c in spec.classes for w in c.vocabulary)
    weights = [c.weight for c in spec.classes]
    subjects = tuple(Subject)
    levels = tuple(Level)

    messages: list[Message] = []
    metadata: list[GroupMetadata] = []
    msg_counter = 0

    for g in range(spec.n_groups):
        group_id = f"g{g + 1:03d}"
        dd_id = f"dd{(g % max(1, spec.n_designs)) + 1}"
        subject = subjects[g % len(subjects)]
        level = levels[g % len(levels)]

        n_students = rng.randint(*spec.students_range)
        lo, hi = spec.completed_range
        n_completed = min(rng.randint(lo, hi), spec.total_activities)
        dates: list[date] = []
        current = spec.start_date
        for _ in range(n_completed):
            dates.append(current)
            current = current + timedelta(days=rng.randint(*spec.activity_gap_days))
        metadata.append(
            GroupMetadata(
                group_id=group_id,
                n_students=n_students,
                total_activities=spec.total_activities,
                completed_activity_dates=tuple(dates),
            )
        )

        span_days = max((dates[-1] - spec.start_date).days, 1) if dates else 30
        start_dt = datetime(
            spec.start_date.year, spec.start_date.month, spec.start_date.day,
            tzinfo=timezone.utc,
        )

        for role, n_msgs in (
            (Role.STUDENT, spec.student_messages_per_group),
            (Role.TEACHER, spec.teacher_messages_per_group),
        ):
            for _ in range(n_msgs):
                cls = rng.choices(spec.classes, weights=weights, k=1)[0]
                n_tokens = rng.randint(*spec.tokens_per_message)
                tokens = [
                    rng.choice(union_vocab)
                    if spec.noise_rate > 0.0 and rng.random() < spec.noise_rate
                    else rng.choice(cls.vocabulary)
                    for _ in range(n_tokens)
                ]
                msg_counter += 1
                messages.append(
                    Message(
                        id=f"m{msg_counter:05d}",
                        group_id=group_id,
                        dd_id=dd_id,
                        role=role,
                        subject=subject,
                        level=level,
                        timestamp=start_dt + timedelta(minutes=rng.randrange(span_days * 24 * 60)),
                        text=" ".join(tokens),
                        gold_label=cls.label,
                    )
                )

    return Corpus(messages=tuple(messages), source_path="<synthetic>"), metadata
