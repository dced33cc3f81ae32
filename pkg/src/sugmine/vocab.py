"""Vocabulary construction, text-format word vectors and embedding lookup."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, ParseError
from .tensor import Tensor, take_rows

PAD, UNK = "<pad>", "<unk>"
PAD_ID, UNK_ID = 0, 1
INIT_RANGE = 0.1


class Vocabulary:
    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if tokens[:2] != [PAD, UNK]:
            tokens = [PAD, UNK] + [t for t in tokens if t not in (PAD, UNK)]
        if len(set(tokens)) != len(tokens):
            raise ConfigError("vocabulary tokens must be unique")
        self.id_to_token = tokens
        self.token_to_id = {t: i for i, t in enumerate(tokens)}

    def __len__(self):
        return len(self.id_to_token)

    def __contains__(self, token):
        return token in self.token_to_id

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.id_to_token == other.id_to_token

    def id(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def encode(self, tokens: Iterable[str]) -> list:
        return [self.token_to_id.get(t, UNK_ID) for t in tokens]


def build_vocab(token_lists: Iterable[Sequence[str]], min_count: int = 1) -> Vocabulary:
    """Keep tokens seen at least ``min_count`` times; most frequent first, ties alphabetical."""
    if min_count < 1:
        raise ConfigError(f"min_count must be >= 1, got {min_count}")
    counts = Counter()
    for tokens in token_lists:
        counts.update(t for t in tokens if t not in (PAD, UNK))
    if not counts:
        raise ConfigError("cannot build a vocabulary from an empty dataset")
    kept = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    return Vocabulary(kept)


@dataclass
class EmbeddingMatrix:
    vectors: Tensor
    dim: int
    trainable: bool
    source: str  # "random" or "pretrained_file"
    coverage: float = 0.0

    def __post_init__(self):
        self.vectors.requires_grad = self.trainable


def random_embedding(vocab: Vocabulary, dim: int, seed: int, trainable: bool = True) -> EmbeddingMatrix:
    if dim < 1:
        raise ConfigError(f"embedding dim must be positive, got {dim}")
    rng = np.random.default_rng(seed)
    data = rng.uniform(-INIT_RANGE, INIT_RANGE, size=(len(vocab), dim))
    data[PAD_ID] = 0.0
    return EmbeddingMatrix(Tensor(data), dim, trainable, "random")


def read_vectors(path, dim: int) -> dict:
    """Parse ``token v1 ... v_dim`` lines into a dict of float64 arrays."""
    vectors = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            parts = line.rstrip(" ").split(" ")
            if len(parts) != dim + 1:
                raise ParseError(
                    f"{path}: expected a token and {dim} values, found {len(parts) - 1} values",
                    line=lineno,
                )
            try:
                values = np.array([float(v) for v in parts[1:]])
            except ValueError as exc:
                raise ParseError(f"{path}: {exc}", line=lineno) from None
            if not np.all(np.isfinite(values)):
                raise ParseError(f"{path}: non-finite value", line=lineno)
            vectors[parts[0]] = values
    return vectors


def load_vectors(path, vocab: Vocabulary, dim: int, seed: int = 0, trainable: bool = False) -> EmbeddingMatrix:
    """Build an embedding matrix from a text vector file.

    Tokens missing from the file keep a seeded uniform(-0.1, 0.1) row, <unk>
    is the mean of every vector in the file, <pad> is zero.
    """
    if dim < 1:
        raise ConfigError(f"embedding dim must be positive, got {dim}")
    file_vectors = read_vectors(path, dim)
    if not file_vectors:
        raise ConfigError(f"{path}: no vectors found")
    rng = np.random.default_rng(seed)
    data = rng.uniform(-INIT_RANGE, INIT_RANGE, size=(len(vocab), dim))
    found = 0
    for i, tok in enumerate(vocab.id_to_token):
        vec = file_vectors.get(tok)
        if vec is not None:
            data[i] = vec
            found += 1
    data[UNK_ID] = np.mean(np.stack(list(file_vectors.values())), axis=0)
    data[PAD_ID] = 0.0
    return EmbeddingMatrix(Tensor(data), dim, trainable, "pretrained_file", coverage=found / len(vocab))


def lookup(tokens: Sequence[str], vocab: Vocabulary, emb: EmbeddingMatrix) -> Tensor:
    """One embedding row per token; unknown tokens read the <unk> row."""
    if not tokens:
        return Tensor(np.zeros((0, emb.dim)))
    return take_rows(emb.vectors, vocab.encode(tokens), frozen_rows=(PAD_ID,))
