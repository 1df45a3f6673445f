"""Topic models over lemma streams via collapsed Gibbs sampling.

The sampler keeps the usual three count tables (document-topic, topic-word,
topic totals) and resamples every token's topic once per sweep from

    p(z = k) ∝ (n_dk + alpha) * (n_kw + beta) / (n_k + V * beta)

with the token's own assignment removed from the counts.  Estimates are read
off the final state: phi and theta are the smoothed, normalized count tables
after the last sweep.  Because only the final state is used, ``burn_in`` is
a bookkeeping knob (validated, recorded, but without influence on results);
``iterations`` is the total sweep count.

Model selection follows the multi-start recipe: run several chains from
consecutive seeds and keep the one with the highest joint log-likelihood of
its final state.

The inner sweep loop is compiled with numba; a corpus of a few thousand
tokens runs thousands of sweeps in seconds.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit
from scipy.special import gammaln

TokenStream = Sequence[str]

MODEL_FORMAT = "discoursekit-topic-model"
MODEL_VERSION = 1


class InvalidConfig(ValueError):
    pass


class EmptyCorpus(ValueError):
    pass


class TopicOutOfRange(IndexError):
    pass


@dataclass(frozen=True)
class GibbsConfig:
    """Sampler settings.  ``alpha`` defaults to the common 50/K heuristic
    and ``beta`` to 0.1 when left unset."""

    k: int
    alpha: float | None = None
    beta: float = 0.1
    burn_in: int = 1_000
    iterations: int = 5_000
    chains: int = 3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 1:
            raise InvalidConfig(f"topic count must be >= 1, got {self.k}")
        if self.alpha is None:
            object.__setattr__(self, "alpha", 50.0 / self.k)
        if self.alpha <= 0 or self.beta <= 0:
            raise InvalidConfig("alpha and beta must be positive")
        if self.burn_in < 0 or self.iterations < self.burn_in:
            raise InvalidConfig("need iterations >= burn_in >= 0")
        if self.chains < 1:
            raise InvalidConfig("chain count must be >= 1")


@dataclass(frozen=True)
class TopicModel:
    """A fitted model: smoothed distributions plus the raw final state."""

    config: GibbsConfig
    vocabulary: tuple[str, ...]
    phi: np.ndarray        # K x V, rows sum to 1
    theta: np.ndarray      # D x K over the kept documents, rows sum to 1
    doc_ids: np.ndarray    # flat token -> kept-document row
    word_ids: np.ndarray   # flat token -> vocabulary index
    assignments: np.ndarray
    log_likelihood: float
    kept_doc_indices: tuple[int, ...] = ()
    n_skipped: int = 0

    @property
    def k(self) -> int:
        return self.phi.shape[0]

    @property
    def n_docs(self) -> int:
        return self.theta.shape[0]


# ---------------------------------------------------------------------------
# Sampler core


@njit(cache=True)
def _gibbs_sweeps(doc_ids, word_ids, n_docs, n_words, k, alpha, beta, sweeps, seed):
    np.random.seed(seed)
    n_tokens = word_ids.shape[0]
    z = np.empty(n_tokens, dtype=np.int64)
    n_dk = np.zeros((n_docs, k), dtype=np.int64)
    n_kw = np.zeros((k, n_words), dtype=np.int64)
    n_k = np.zeros(k, dtype=np.int64)

    for i in range(n_tokens):
        topic = np.random.randint(0, k)
        z[i] = topic
        n_dk[doc_ids[i], topic] += 1
        n_kw[topic, word_ids[i]] += 1
        n_k[topic] += 1

    cum = np.empty(k, dtype=np.float64)
    v_beta = n_words * beta
    for _ in range(sweeps):
        for i in range(n_tokens):
            d = doc_ids[i]
            w = word_ids[i]
            old = z[i]
            n_dk[d, old] -= 1
            n_kw[old, w] -= 1
            n_k[old] -= 1

            total = 0.0
            for t in range(k):
                total += (n_dk[d, t] + alpha) * (n_kw[t, w] + beta) / (n_k[t] + v_beta)
                cum[t] = total
            u = np.random.random() * total
            new = 0
            while new < k - 1 and cum[new] < u:
                new += 1

            z[i] = new
            n_dk[d, new] += 1
            n_kw[new, w] += 1
            n_k[new] += 1

    return z, n_dk, n_kw, n_k


def _count_tables(model: TopicModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rebuild the integer count tables from stored token assignments."""
    k = model.k
    n_docs = model.n_docs
    n_words = len(model.vocabulary)
    n_dk = np.zeros((n_docs, k), dtype=np.int64)
    n_kw = np.zeros((k, n_words), dtype=np.int64)
    np.add.at(n_dk, (model.doc_ids, model.assignments), 1)
    np.add.at(n_kw, (model.assignments, model.word_ids), 1)
    return n_dk, n_kw, n_kw.sum(axis=1)


def collapsed_log_likelihood(
    n_dk: np.ndarray, n_kw: np.ndarray, alpha: float, beta: float
) -> float:
    """Joint log p(words, assignments | alpha, beta) for a count state.

    Standard collapsed form: a Dirichlet-multinomial term per topic over the
    vocabulary plus one per document over the topics, written with log-gamma
    ratios so it stays finite at any corpus size.
    """
    n_docs, k = n_dk.shape
    n_words = n_kw.shape[1]
    n_k = n_kw.sum(axis=1)
    n_d = n_dk.sum(axis=1)

    word_side = (
        k * gammaln(n_words * beta)
        - k * n_words * gammaln(beta)
        + gammaln(n_kw + beta).sum()
        - gammaln(n_k + n_words * beta).sum()
    )
    doc_side = (
        n_docs * gammaln(k * alpha)
        - n_docs * k * gammaln(alpha)
        + gammaln(n_dk + alpha).sum()
        - gammaln(n_d + k * alpha).sum()
    )
    return float(word_side + doc_side)


def log_likelihood(model: TopicModel) -> float:
    """Recompute the collapsed joint log-likelihood of the model's state."""
    n_dk, n_kw, _ = _count_tables(model)
    return collapsed_log_likelihood(n_dk, n_kw, model.config.alpha, model.config.beta)


def fit_lda(docs: Sequence[TokenStream], cfg: GibbsConfig, seed: int | None = None) -> TopicModel:
    """Fit one chain.  ``seed`` overrides ``cfg.seed`` (used by run_chains).

    Documents that are empty after preprocessing are skipped; their count is
    reported through a warning and recorded on the model.
    """
    if seed is None:
        seed = cfg.seed

    kept: list[int] = []
    for i, doc in enumerate(docs):
        if len(doc) > 0:
            kept.append(i)
    n_skipped = len(docs) - len(kept)
    if not kept:
        raise EmptyCorpus("no non-empty documents to fit")
    if n_skipped:
        warnings.warn(f"skipping {n_skipped} empty document(s)", stacklevel=2)

    vocab_index: dict[str, int] = {}
    doc_ids: list[int] = []
    word_ids: list[int] = []
    for row, i in enumerate(kept):
        for word in docs[i]:
            idx = vocab_index.setdefault(word, len(vocab_index))
            doc_ids.append(row)
            word_ids.append(idx)

    doc_arr = np.asarray(doc_ids, dtype=np.int64)
    word_arr = np.asarray(word_ids, dtype=np.int64)
    n_words = len(vocab_index)

    z, n_dk, n_kw, n_k = _gibbs_sweeps(
        doc_arr, word_arr, len(kept), n_words, cfg.k,
        float(cfg.alpha), float(cfg.beta), cfg.iterations, seed,
    )

    phi = (n_kw + cfg.beta) / (n_k[:, None] + n_words * cfg.beta)
    n_d = n_dk.sum(axis=1)
    theta = (n_dk + cfg.alpha) / (n_d[:, None] + cfg.k * cfg.alpha)

    return TopicModel(
        config=cfg,
        vocabulary=tuple(vocab_index),
        phi=phi,
        theta=theta,
        doc_ids=doc_arr,
        word_ids=word_arr,
        assignments=z,
        log_likelihood=collapsed_log_likelihood(n_dk, n_kw, cfg.alpha, cfg.beta),
        kept_doc_indices=tuple(kept),
        n_skipped=n_skipped,
    )


def run_chains(docs: Sequence[TokenStream], cfg: GibbsConfig) -> TopicModel:
    """Fit ``cfg.chains`` chains from seeds seed, seed+1, ... and return the
    one with the highest log-likelihood (ties favor the earliest chain).

    Chains run one after another so each consumes a private, reproducible
    random stream.
    """
    best: TopicModel | None = None
    for c in range(cfg.chains):
        model = fit_lda(docs, cfg, seed=cfg.seed + c)
        if best is None or model.log_likelihood > best.log_likelihood:
            best = model
    assert best is not None
    return best


# ---------------------------------------------------------------------------
# Topic inspection


def _check_topic(model: TopicModel, topic: int) -> None:
    if not 0 <= topic < model.k:
        raise TopicOutOfRange(f"topic {topic} outside [0, {model.k})")


def top_words(model: TopicModel, topic: int, n: int) -> list[tuple[str, float]]:
    """The n most probable words of a topic, descending; ties break
    lexicographically."""
    _check_topic(model, topic)
    row = model.phi[topic]
    ranked = sorted(zip(model.vocabulary, row), key=lambda it: (-it[1], it[0]))
    return [(w, float(p)) for w, p in ranked[:n]]


def topic_mass(model: TopicModel, topic: int, n: int) -> float:
    """Probability mass covered by the top-n words of a topic."""
    _check_topic(model, topic)
    return float(sum(p for _, p in top_words(model, topic, n)))


def write_top_words_csv(model: TopicModel, n: int, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["topic", "rank", "word", "probability"])
        for t in range(model.k):
            for rank, (word, prob) in enumerate(top_words(model, t, n), start=1):
                writer.writerow([t, rank, word, repr(prob)])


# ---------------------------------------------------------------------------
# Serialization


def save_model(model: TopicModel, path: str | Path) -> None:
    """Write the versioned JSON form; floats keep full precision via repr."""
    payload = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": {
            "k": model.config.k,
            "alpha": model.config.alpha,
            "beta": model.config.beta,
            "burn_in": model.config.burn_in,
            "iterations": model.config.iterations,
            "chains": model.config.chains,
            "seed": model.config.seed,
        },
        "vocabulary": list(model.vocabulary),
        "phi": [[float(x) for x in row] for row in model.phi],
        "theta": [[float(x) for x in row] for row in model.theta],
        "doc_ids": [int(x) for x in model.doc_ids],
        "word_ids": [int(x) for x in model.word_ids],
        "assignments": [int(x) for x in model.assignments],
        "log_likelihood": model.log_likelihood,
        "kept_doc_indices": list(model.kept_doc_indices),
        "n_skipped": model.n_skipped,
    }
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, ensure_ascii=False, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path: str | Path) -> TopicModel:
    with Path(path).open(encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a topic model file")
    if payload.get("version") != MODEL_VERSION:
        raise ValueError(f"{path}: unsupported model version {payload.get('version')!r}")
    cfg = GibbsConfig(**payload["config"])
    return TopicModel(
        config=cfg,
        vocabulary=tuple(payload["vocabulary"]),
        phi=np.asarray(payload["phi"], dtype=np.float64),
        theta=np.asarray(payload["theta"], dtype=np.float64),
        doc_ids=np.asarray(payload["doc_ids"], dtype=np.int64),
        word_ids=np.asarray(payload["word_ids"], dtype=np.int64),
        assignments=np.asarray(payload["assignments"], dtype=np.int64),
        log_likelihood=float(payload["log_likelihood"]),
        kept_doc_indices=tuple(payload["kept_doc_indices"]),
        n_skipped=int(payload["n_skipped"]),
    )
