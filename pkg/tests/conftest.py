"""Shared fixtures: message builders and small labeled corpora."""

from __future__ import annotations

import random
from datetime import date, datetime, timezone

import pytest

from discoursekit.corpus import (
    Corpus,
    GroupMetadata,
    Label,
    Level,
    Message,
    Role,
    Subject,
)


@pytest.fixture
def make_message():
    """Factory with sensible defaults so tests only name what they vary."""

    def _make(
        id: str = "m1",
        group_id: str = "g001",
        dd_id: str = "dd1",
        role: Role = Role.STUDENT,
        subject: Subject = Subject.LANGUAGE,
        level: Level = Level.MIDDLE,
        timestamp: datetime | None = None,
        text: str = "hola",
        gold_label: Label | None = None,
    ) -> Message:
        return Message(
            id=id,
            group_id=group_id,
            dd_id=dd_id,
            role=role,
            subject=subject,
            level=level,
            timestamp=timestamp or datetime(2013, 3, 4, 12, 0, tzinfo=timezone.utc),
            text=text,
            gold_label=gold_label,
        )

    return _make


@pytest.fixture
def make_metadata():
    def _make(
        group_id: str = "g001",
        n_students: int = 30,
        total_activities: int = 10,
        completed: tuple[date, ...] = (
            date(2013, 3, 4),
            date(2013, 3, 11),
            date(2013, 3, 18),
        ),
    ) -> GroupMetadata:
        return GroupMetadata(
            group_id=group_id,
            n_students=n_students,
            total_activities=total_activities,
            completed_activity_dates=completed,
        )

    return _make


#: Disjoint per-class vocabularies used by the classification fixtures.
CLASS_VOCABS: dict[Label, tuple[str, ...]] = {
    Label.PHATIC: ("hola", "ola", "chao", "saludos", "jajaja", "xdxd", "po"),
    Label.EMOTIVE: ("genial", "malo", "divertido", "aburrido", "entender", "uf"),
    Label.REFERENTIAL: ("actividad", "trabajo", "historia", "guerra", "mundo", "video"),
}


def make_labeled_streams(
    per_class: int, seed: int, noise_rate: float = 0.0,
    tokens: tuple[int, int] = (3, 7),
) -> tuple[list[list[str]], list[Label]]:
    """Token streams drawn from disjoint class vocabularies, with optional
    token-level noise drawn from the union vocabulary."""
    rng = random.Random(seed)
    union = [w for words in CLASS_VOCABS.values() for w in words]
    streams: list[list[str]] = []
    labels: list[Label] = []
    for label, words in CLASS_VOCABS.items():
        for _ in range(per_class):
            n = rng.randint(*tokens)
            streams.append(
                [
                    rng.choice(union) if rng.random() < noise_rate else rng.choice(words)
                    for _ in range(n)
                ]
            )
            labels.append(label)
    order = list(range(len(streams)))
    rng.shuffle(order)
    return [streams[i] for i in order], [labels[i] for i in order]


@pytest.fixture
def labeled_streams():
    return make_labeled_streams
