"""Pretrained embedding loading, vocabulary filtering and similarity primitives.

Vectors are L2-normalised once at load time, so cosine similarity between two
stored words is a plain dot product.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import warnings
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import asdict, dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .errors import EmbeddingFormatError

FORMATS = ("glove-text", "fasttext-vec")

# Fraction of malformed rows tolerated before a load is aborted.
MAX_SKIP_FRACTION = 0.01

_ALPHA_TOKEN = re.compile(r"[^\W\d_]+(?:['-][^\W\d_]+)*\Z")


@dataclass(frozen=True)
class WordVector:
    word: str
    vector: NDArray[np.float64]
    rank: int

    @property
    def dimension(self) -> int:
        return self.vector.shape[0]


@dataclass(frozen=True)
class LoadStats:
    """Bookkeeping from a single pass over an embedding file."""

    rows_read: int
    rows_skipped: int
    duplicates: int
    header_vocab: int | None = None
    header_dimension: int | None = None


class EmbeddingTable:
    """Immutable word -> unit vector map in frequency-rank order.

    Args:
        words: Vocabulary in rank order (rank 1 first). Must be unique.
        vectors: Array of shape ``(len(words), D)``. Rows are normalised here,
            so callers may pass raw vectors.
        source_id: Identifier recorded in lexicon provenance. Defaults to a
            content digest.
    """

    def __init__(
        self,
        words: Sequence[str],
        vectors: NDArray,
        source_id: str | None = None,
    ) -> None:
        matrix = np.array(vectors, dtype=np.float64, copy=True)
        if matrix.ndim != 2 or matrix.shape[0] != len(words):
            raise ValueError(
                f"vectors must have shape ({len(words)}, D), got {matrix.shape}"
            )
        if matrix.shape[1] == 0:
            raise ValueError("embedding dimension must be positive")
        if not np.all(np.isfinite(matrix)):
            raise ValueError("embedding vectors must be finite")
        norms = np.linalg.norm(matrix, axis=1)
        if np.any(norms == 0.0):
            bad = words[int(np.flatnonzero(norms == 0.0)[0])]
            raise ValueError(f"zero-norm vector for word {bad!r}")
        matrix /= norms[:, None]
        matrix.flags.writeable = False

        self._words: tuple[str, ...] = tuple(words)
        self._index = {w: i for i, w in enumerate(self._words)}
        if len(self._index) != len(self._words):
            raise ValueError("duplicate words in embedding table")
        self._matrix = matrix
        self._source_id = source_id

    @property
    def dimension(self) -> int:
        return self._matrix.shape[1]

    @property
    def words(self) -> tuple[str, ...]:
        return self._words

    @property
    def matrix(self) -> NDArray[np.float64]:
        """Read-only ``(V, D)`` array of unit vectors."""
        return self._matrix

    @property
    def source_id(self) -> str:
        return self._source_id if self._source_id is not None else self.digest

    @cached_property
    def digest(self) -> str:
        h = hashlib.sha256()
        h.update("\n".join(self._words).encode("utf-8"))
        h.update(np.ascontiguousarray(self._matrix).tobytes())
        return h.hexdigest()

    def __len__(self) -> int:
        return len(self._words)

    def __contains__(self, word: object) -> bool:
        return word in self._index

    def __iter__(self) -> Iterator[WordVector]:
        for i in range(len(self._words)):
            yield self._entry(i)

    def __getitem__(self, word: str) -> WordVector:
        try:
            return self._entry(self._index[word])
        except KeyError:
            raise KeyError(f"word not in embedding table: {word!r}") from None

    def _entry(self, i: int) -> WordVector:
        return WordVector(self._words[i], self._matrix[i], i + 1)

    def index_of(self, word: str) -> int:
        return self._index[word]

    def rows(self, words: Iterable[str]) -> NDArray[np.float64]:
        """Stack the vectors for ``words`` into a ``(n, D)`` array."""
        idx = [self._index[w] for w in words]
        return self._matrix[idx]

    def rank(self, word: str) -> int:
        return self._index[word] + 1


def load_embeddings(
    path: str | Path,
    format: str = "glove-text",
    *,
    limit: int | None = None,
    lowercase: bool = True,
) -> tuple[EmbeddingTable, LoadStats]:
    """Parse a GloVe text or FastText ``.vec`` file.

    Rows whose width disagrees with the first data row, or whose values are
    non-numeric, non-finite or all zero, are skipped and counted. The load is
    aborted if more than 1% of rows are skipped. Duplicate words (after
    lowercasing) keep their first occurrence.

    Args:
        path: Embedding file, UTF-8, space separated.
        format: ``"glove-text"`` (no header) or ``"fasttext-vec"`` (header line
            ``vocab_count D``).
        limit: Stop after this many accepted words (the most frequent ones).
        lowercase: Fold words to lower case.

    Returns:
        The table and the parse statistics.

    Raises:
        FileNotFoundError: If ``path`` does not exist.
        EmbeddingFormatError: On an unknown format, an empty file, or too many
            malformed rows.
    """
    if format not in FORMATS:
        raise EmbeddingFormatError(f"unknown embedding format {format!r}; expected one of {FORMATS}")
    path = Path(path)
    digest = hashlib.sha256()
    words: list[str] = []
    seen: set[str] = set()
    rows: list[NDArray[np.float64]] = []
    rows_read = skipped = duplicates = 0
    header_vocab = header_dim = None
    dim: int | None = None

    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            digest.update(raw)
            line = raw.decode("utf-8", errors="replace").rstrip("\r\n").rstrip()
            if lineno == 1 and format == "fasttext-vec":
                header_vocab, header_dim = _parse_header(line, path)
                continue
            if not line:
                continue
            if limit is not None and len(words) >= limit:
                continue
            rows_read += 1
            parts = line.split(" ")
            if dim is None:
                dim = len(parts) - 1
                if dim < 1:
                    raise EmbeddingFormatError(f"{path}:{lineno}: first data row has no vector")
            if len(parts) - 1 != dim:
                skipped += 1
                continue
            try:
                vec = np.array(parts[1:], dtype=np.float64)
            except ValueError:
                skipped += 1
                continue
            norm = float(np.linalg.norm(vec))
            if not np.all(np.isfinite(vec)) or norm == 0.0 or not math.isfinite(norm):
                skipped += 1
                continue
            word = parts[0].lower() if lowercase else parts[0]
            if word in seen:
                duplicates += 1
                continue
            seen.add(word)
            words.append(word)
            rows.append(vec)

    if rows_read == 0 or not words:
        raise EmbeddingFormatError(f"{path}: no embedding rows parsed")
    if skipped / rows_read > MAX_SKIP_FRACTION:
        raise EmbeddingFormatError(
            f"{path}: {skipped} of {rows_read} rows malformed "
            f"(more than {MAX_SKIP_FRACTION:.0%})"
        )
    if format == "fasttext-vec":
        if header_dim != dim:
            warnings.warn(
                f"{path}: header dimension {header_dim} disagrees with rows ({dim}); using rows",
                stacklevel=2,
            )
        if limit is None and header_vocab != rows_read:
            warnings.warn(
                f"{path}: header declares {header_vocab} words but {rows_read} rows were read",
                stacklevel=2,
            )

    table = EmbeddingTable(words, np.vstack(rows), source_id="sha256:" + digest.hexdigest())
    stats = LoadStats(rows_read, skipped, duplicates, header_vocab, header_dim)
    return table, stats


def _parse_header(line: str, path: Path) -> tuple[int, int]:
    parts = line.split()
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise EmbeddingFormatError(f"{path}:1: expected fasttext header 'vocab_count D', got {line[:60]!r}")
    return int(parts[0]), int(parts[1])


def cosine(a: WordVector | NDArray, b: WordVector | NDArray) -> float:
    """Cosine similarity of two unit vectors, clamped to [-1, 1].

    The products are summed with ``math.fsum``, which is exactly rounded, so
    ``cosine(a, b) == cosine(b, a)`` holds bit for bit.
    """
    va = a.vector if isinstance(a, WordVector) else np.asarray(a, dtype=np.float64)
    vb = b.vector if isinstance(b, WordVector) else np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise ValueError(f"dimension mismatch: {va.shape} vs {vb.shape}")
    value = math.fsum((va * vb).tolist())
    return min(1.0, max(-1.0, value))


@dataclass(frozen=True)
class VocabFilterConfig:
    drop_top_ranks: int = 50
    min_word_length: int = 2
    allowlist_path: str | None = None
    blocklist_path: str | None = None
    alpha_only: bool = True

    def __post_init__(self) -> None:
        if self.drop_top_ranks < 0:
            raise ValueError("drop_top_ranks must be >= 0")
        if self.min_word_length < 1:
            raise ValueError("min_word_length must be >= 1")

    @property
    def digest(self) -> str:
        """Digest of the settings plus the contents of any word-list files."""
        h = hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode("utf-8"))
        for p in (self.allowlist_path, self.blocklist_path):
            if p is not None and Path(p).exists():
                h.update(Path(p).read_bytes())
        return h.hexdigest()


class CandidateVocab(Sequence[str]):
    """Ordered candidate words plus the digest of the filter that produced them."""

    def __init__(self, words: Iterable[str], filter_digest: str | None = None) -> None:
        self.words = tuple(words)
        if filter_digest is None:
            filter_digest = hashlib.sha256("\n".join(self.words).encode("utf-8")).hexdigest()
        self.filter_digest = filter_digest

    def __getitem__(self, i):  # type: ignore[override]
        return self.words[i]

    def __len__(self) -> int:
        return len(self.words)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, CandidateVocab):
            return self.words == other.words
        if isinstance(other, (list, tuple)):
            return list(self.words) == list(other)
        return NotImplemented

    def __repr__(self) -> str:
        return f"CandidateVocab({len(self.words)} words)"


def read_word_list(path: str | Path) -> set[str]:
    """Read a one-word-per-line file; blank lines and ``#`` comments are ignored."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                words.add(line.lower())
    return words


def is_alpha_token(word: str) -> bool:
    """Letters only, allowing internal apostrophes and hyphens."""
    return _ALPHA_TOKEN.match(word) is not None


def filter_vocabulary(table: EmbeddingTable, config: VocabFilterConfig | None = None) -> CandidateVocab:
    """Reduce the table vocabulary to candidate lexicon terms, keeping rank order."""
    config = config or VocabFilterConfig()
    allow = read_word_list(config.allowlist_path) if config.allowlist_path else None
    block = read_word_list(config.blocklist_path) if config.blocklist_path else set()

    kept = []
    for word in table.words[config.drop_top_ranks:]:
        if len(word) < config.min_word_length:
            continue
        if config.alpha_only and not is_alpha_token(word):
            continue
        if word in block:
            continue
        if allow is not None and word not in allow:
            continue
        kept.append(word)
    return CandidateVocab(kept, config.digest)


def estimate_frequency(rank: float, corpus_size: float = 1e6, a: float = 1.0) -> float:
    """Estimated usage count of the word at ``rank`` (Mandelbrot's rank law).

    ``count = corpus_size / (rank + 2.7) ** a``
    """
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    if corpus_size <= 0:
        raise ValueError("corpus_size must be positive")
    return corpus_size / (rank + 2.7) ** a
