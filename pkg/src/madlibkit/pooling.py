"""Order-less feature pooling and word-embedding answer encoding.

An image representation is the componentwise mean (or max) over the global
image vector and the vectors of its surviving object proposals. An answer
representation is the mean of the word vectors of its in-vocabulary tokens.
"""

from __future__ import annotations

import string
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import EmptyPoolError, InvalidInputError, ParseError, ShapeError, UnencodableAnswerError

__all__ = [
    "BLANK_TOKEN",
    "UNK_TOKEN",
    "EmbeddingTable",
    "tokenize",
    "tokenize_prompt",
    "mean_pool",
    "max_pool",
    "build_image_representation",
    "encode_answer",
]

BLANK_TOKEN = "<BLANK>"
UNK_TOKEN = "<UNK>"
_RESERVED = frozenset({BLANK_TOKEN, UNK_TOKEN})


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip surrounding ASCII punctuation.

    Tokens that are empty after stripping are dropped.
    """
    tokens = []
    for piece in text.lower().split():
        token = piece.strip(string.punctuation)
        if token:
            tokens.append(token)
    return tokens


def tokenize_prompt(text: str) -> list[str]:
    """Tokenize a prompt, passing reserved markers like ``<BLANK>`` through verbatim."""
    tokens = []
    for piece in text.split():
        if piece in _RESERVED:
            tokens.append(piece)
        else:
            tokens.extend(tokenize(piece))
    return tokens


def _stack(vectors: Sequence[np.ndarray]) -> np.ndarray:
    if len(vectors) == 0:
        raise EmptyPoolError("cannot pool an empty sequence of vectors")
    arrays = [np.asarray(v, dtype=np.float64) for v in vectors]
    dim = arrays[0].shape
    if len(dim) != 1 or dim[0] == 0:
        raise ShapeError(f"expected nonempty 1-d vectors, got shape {dim}")
    for a in arrays[1:]:
        if a.shape != dim:
            raise ShapeError(f"vector dims differ: {a.shape} vs {dim}")
    return np.stack(arrays)


def mean_pool(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Componentwise arithmetic mean of a nonempty sequence of same-dim vectors."""
    return _stack(vectors).mean(axis=0)


def max_pool(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Componentwise maximum of a nonempty sequence of same-dim vectors."""
    return _stack(vectors).max(axis=0)


def build_image_representation(
    global_vec: np.ndarray,
    proposals: Sequence[np.ndarray],
    mode: str = "mean",
    l2_normalize: bool = False,
) -> np.ndarray:
    """Pool the global image vector together with its proposal vectors.

    The global vector enters the pool as exactly one more element; with zero
    proposals the result is the global vector itself. ``l2_normalize`` scales
    every input vector to unit norm before pooling (zero vectors pass through).
    """
    if mode not in ("mean", "max"):
        raise InvalidInputError(f"unknown pooling mode {mode!r}")
    vectors = [np.asarray(global_vec, dtype=np.float64)]
    vectors.extend(np.asarray(p, dtype=np.float64) for p in proposals)
    if l2_normalize:
        normed = []
        for v in vectors:
            n = np.linalg.norm(v)
            normed.append(v / n if n > 0 else v)
        vectors = normed
    return mean_pool(vectors) if mode == "mean" else max_pool(vectors)


class EmbeddingTable:
    """Immutable token -> vector table of one shared dimensionality."""

    def __init__(self, dim: int):
        if dim <= 0:
            raise InvalidInputError(f"embedding dim must be positive, got {dim}")
        self.dim = int(dim)
        self._vectors: dict[str, np.ndarray] = {}

    def add(self, token: str, vector: np.ndarray) -> None:
        arr = np.asarray(vector, dtype=np.float64)
        if arr.shape != (self.dim,):
            raise ShapeError(f"vector for {token!r} has shape {arr.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError(f"vector for {token!r} contains non-finite values")
        arr = arr.copy()
        arr.flags.writeable = False
        self._vectors[token] = arr

    def __contains__(self, token: str) -> bool:
        return token in self._vectors

    def __getitem__(self, token: str) -> np.ndarray:
        return self._vectors[token]

    def __len__(self) -> int:
        return len(self._vectors)

    def tokens(self) -> Iterable[str]:
        return self._vectors.keys()

    @classmethod
    def from_vectors(cls, vectors: Mapping[str, np.ndarray], dim: int | None = None) -> "EmbeddingTable":
        if dim is None:
            if not vectors:
                raise InvalidInputError("cannot infer dim from an empty mapping")
            dim = len(next(iter(vectors.values())))
        table = cls(dim)
        for token, vec in vectors.items():
            table.add(token, vec)
        return table

    @classmethod
    def load_word2vec_text(cls, path: str | Path) -> "EmbeddingTable":
        """Load the word2vec text format.

        An optional first line ``<count> <dim>`` is followed by one line per
        token: the token and then ``dim`` whitespace-separated decimals.
        """
        table: EmbeddingTable | None = None
        declared_count = None
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                parts = raw.split()
                if not parts:
                    continue
                if table is None:
                    if declared_count is None and len(parts) == 2:
                        try:
                            declared_count, dim = int(parts[0]), int(parts[1])
                        except ValueError:
                            pass
                        else:
                            if dim <= 0 or declared_count < 0:
                                raise ParseError(f"bad header counts {parts}", lineno)
                            table = cls(dim)
                            continue
                    # headerless file: infer dim from the first entry
                    table = cls(len(parts) - 1)
                token = parts[0]
                if len(parts) - 1 != table.dim:
                    raise ParseError(
                        f"entry for {token!r} has {len(parts) - 1} values, expected {table.dim}", lineno
                    )
                try:
                    values = np.array([float(p) for p in parts[1:]], dtype=np.float64)
                except ValueError as exc:
                    raise ParseError(f"bad decimal in entry for {token!r}: {exc}", lineno) from None
                if not np.all(np.isfinite(values)):
                    raise ParseError(f"non-finite value in entry for {token!r}", lineno)
                table.add(token, values)
        if table is None:
            raise ParseError(f"empty embedding file: {path}")
        if declared_count is not None and declared_count != len(table):
            raise ParseError(f"header declares {declared_count} entries, file has {len(table)}")
        return table

    def save_word2vec_text(self, path: str | Path) -> None:
        """Write the table in the word2vec text format with a header line."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{len(self)} {self.dim}\n")
            for token, vec in self._vectors.items():
                fh.write(token + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def encode_answer(tokens: Sequence[str], table: EmbeddingTable) -> np.ndarray:
    """Mean of the word vectors of the in-vocabulary tokens of an answer.

    Out-of-vocabulary tokens are skipped; when nothing is left the answer
    cannot be encoded and :class:`UnencodableAnswerError` is raised.
    """
    found = [table[t] for t in tokens if t in table]
    if not found:
        raise UnencodableAnswerError(f"no in-vocabulary token among {list(tokens)!r}")
    return mean_pool(found)
