"""Seeded synthetic stand-in data for the multiple-choice pipeline.

Images are noisy copies of per-concept prototype vectors, split across a
global vector and a bag of scored proposals; answers are short phrases drawn
from per-concept word clusters of a synthetic embedding table. Concepts come
in confusable pairs: two concepts of a pair share a base prototype and differ
only by a small offset, so hard-task distractors (drawn from the partner
concept) require finer image evidence than easy-task distractors (drawn from
any other concept).

Everything is a pure function of the seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .boxes import ScoredBox
from .data import FeatureStore, ManifestRecord
from .errors import InvalidInputError
from .pooling import EmbeddingTable

__all__ = ["SynthConfig", "SynthResult", "generate_synthetic"]


@dataclass(frozen=True)
class SynthConfig:
    concepts: int = 8
    images: int = 400
    vocab_size: int = 64
    sigma: float = 0.3
    seed: int = 0
    feature_dim: int = 32
    word_dim: int = 300
    category: str = "scenes"
    answer_words: int = 3
    min_proposals: int = 15
    max_proposals: int = 30
    pair_offset: float = 0.045  # within-pair prototype separation per coordinate
    word_noise: float = 0.1


@dataclass
class SynthResult:
    """Generated manifest, features, and table, plus the generating truth."""

    records: list[ManifestRecord]
    store: FeatureStore
    table: EmbeddingTable
    prototypes: np.ndarray  # (concepts, feature_dim)
    image_concepts: dict[str, int]
    config: SynthConfig


def _phrase(rng: np.random.Generator, words: Sequence[str], count: int) -> str:
    picks = rng.choice(len(words), size=count, replace=len(words) < count)
    return " ".join(words[int(i)] for i in picks)


def generate_synthetic(config: SynthConfig = SynthConfig()) -> SynthResult:
    """Build a manifest, feature store, and embedding table from one seed."""
    k, n = config.concepts, config.images
    if k < 2:
        raise InvalidInputError(f"need at least 2 concepts, got {k}")
    if n < 4 * k:
        raise InvalidInputError(f"need at least 4 * concepts = {4 * k} images, got {n}")
    if config.vocab_size < k:
        raise InvalidInputError(f"vocab_size must be >= concepts, got {config.vocab_size}")
    if config.sigma < 0 or config.min_proposals < 0 or config.max_proposals < config.min_proposals:
        raise InvalidInputError("bad noise or proposal-count configuration")

    rng = np.random.default_rng(config.seed)

    # concept prototypes: pairs share a base, partners differ by a small offset
    n_pairs = (k + 1) // 2
    bases = rng.normal(0.0, 1.0, size=(n_pairs, config.feature_dim))
    offsets = rng.normal(0.0, config.pair_offset, size=(k, config.feature_dim))
    prototypes = bases[np.arange(k) // 2] + offsets

    def partner(c: int) -> int | None:
        p = c ^ 1
        return p if p < k else None

    # word clusters: word i belongs to concept i mod k
    text_protos = rng.normal(0.0, 1.0, size=(k, config.word_dim))
    width = max(3, len(str(config.vocab_size - 1)))
    tokens = [f"w{i:0{width}d}" for i in range(config.vocab_size)]
    table = EmbeddingTable(config.word_dim)
    for i, token in enumerate(tokens):
        table.add(token, text_protos[i % k] + rng.normal(0.0, config.word_noise, config.word_dim))
    concept_words: list[list[str]] = [[t for i, t in enumerate(tokens) if i % k == c] for c in range(k)]

    # most of sigma is per-view noise that pooling can average away; a small
    # image-level drift stays irreducible
    sigma_image = config.sigma / 6.0
    sigma_view = config.sigma

    store = FeatureStore(config.feature_dim)
    records: list[ManifestRecord] = []
    image_concepts: dict[str, int] = {}
    other_concepts = [[d for d in range(k) if d != c] for c in range(k)]

    for i in range(n):
        c = i % k
        image_id = f"img{i:05d}"
        image_concepts[image_id] = c

        center = prototypes[c] + rng.normal(0.0, sigma_image, config.feature_dim)
        global_vec = center + rng.normal(0.0, sigma_view, config.feature_dim)
        n_props = int(rng.integers(config.min_proposals, config.max_proposals + 1))
        proposals = []
        for _ in range(n_props):
            box = ScoredBox(
                x=float(rng.uniform(0.0, 400.0)),
                y=float(rng.uniform(0.0, 300.0)),
                w=float(rng.uniform(20.0, 120.0)),
                h=float(rng.uniform(20.0, 120.0)),
                score=float(rng.uniform(0.0, 1.0)),
            )
            proposals.append((box, center + rng.normal(0.0, sigma_view, config.feature_dim)))
        store.add_image(image_id, global_vec, proposals)

        truth = _phrase(rng, concept_words[c], config.answer_words)
        prompt = "the image shows <BLANK>"
        for task in ("easy", "hard"):
            if task == "easy" or partner(c) is None:
                pool = other_concepts[c]
                distractor_concepts = [int(pool[int(j)]) for j in rng.integers(0, len(pool), size=3)]
            else:
                distractor_concepts = [partner(c)] * 3
            distractors = [_phrase(rng, concept_words[d], config.answer_words) for d in distractor_concepts]
            truth_index = int(rng.integers(0, 4))
            candidates = distractors[:truth_index] + [truth] + distractors[truth_index:]
            records.append(
                ManifestRecord(
                    image_id=image_id,
                    category=config.category,
                    task=task,
                    prompt=prompt,
                    candidates=tuple(candidates),
                    truth_index=truth_index,
                )
            )

    return SynthResult(
        records=records,
        store=store,
        table=table,
        prototypes=prototypes,
        image_concepts=image_concepts,
        config=config,
    )
