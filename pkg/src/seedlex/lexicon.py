"""Seed-pole expansion into valence-weighted lexicons, plus lexicon CSV I/O."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import warnings
from collections.abc import Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .embeddings import CandidateVocab, EmbeddingTable
from .errors import LexiconBuildError, LexiconFormatError

CSV_HEADER = ("word", "valence", "seed", "sentiment")

# Rows per scoring block. Fixed so raw scores do not depend on worker count.
_CHUNK = 4096


@dataclass(frozen=True)
class SeedSet:
    concept: str
    positive_label: str
    negative_label: str
    positive_seeds: tuple[str, ...]
    negative_seeds: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "positive_seeds", tuple(self.positive_seeds))
        object.__setattr__(self, "negative_seeds", tuple(self.negative_seeds))
        if not self.positive_seeds or not self.negative_seeds:
            raise LexiconBuildError(f"{self.concept}: both seed poles must be non-empty")
        for label, pole in ((self.positive_label, self.positive_seeds), (self.negative_label, self.negative_seeds)):
            if len(set(pole)) != len(pole):
                raise LexiconBuildError(f"{self.concept}: duplicate seed words in pole {label!r}")
        shared = set(self.positive_seeds) & set(self.negative_seeds)
        if shared:
            raise LexiconBuildError(f"{self.concept}: seeds on both poles: {sorted(shared)}")
        if self.positive_label == self.negative_label:
            raise LexiconBuildError(f"{self.concept}: pole labels must differ")

    @property
    def digest(self) -> str:
        payload = json.dumps(
            [self.concept, self.positive_label, self.negative_label,
             list(self.positive_seeds), list(self.negative_seeds)],
            ensure_ascii=False,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def all_words(self) -> set[str]:
        return set(self.positive_seeds) | set(self.negative_seeds)


@dataclass(frozen=True, order=False)
class LexiconEntry:
    word: str
    valence: float
    seed: bool
    pole: str


def _sort_key(entry: LexiconEntry) -> tuple[float, str]:
    return (-entry.valence, entry.word)


@dataclass(frozen=True)
class Lexicon:
    """One concept's entries, kept sorted by valence descending then word.

    ``provenance`` and ``flags`` are informational and do not take part in
    equality, so a lexicon read back from CSV compares equal to the original.
    """

    concept: str
    entries: tuple[LexiconEntry, ...]
    positive_label: str | None = None
    negative_label: str | None = None
    provenance: Mapping = field(default_factory=dict, compare=False)
    flags: frozenset[str] = field(default_factory=frozenset, compare=False)

    def __post_init__(self) -> None:
        entries = tuple(sorted(self.entries, key=_sort_key))
        object.__setattr__(self, "entries", entries)
        seen = set()
        for e in entries:
            if e.word in seen:
                raise LexiconFormatError(f"{self.concept}: duplicate word {e.word!r}")
            seen.add(e.word)
            if not (-1.0 <= e.valence <= 1.0) or e.valence == 0.0 or math.isnan(e.valence):
                raise LexiconFormatError(f"{self.concept}: valence of {e.word!r} outside [-1, 0) U (0, 1]")
            if e.seed and abs(e.valence) != 1.0:
                raise LexiconFormatError(f"{self.concept}: seed {e.word!r} must have valence +/-1")
        if self.positive_label is None:
            object.__setattr__(self, "positive_label", _pole_label(entries, 1, self.concept))
        if self.negative_label is None:
            object.__setattr__(self, "negative_label", _pole_label(entries, -1, self.concept))
        for e in entries:
            expected = self.positive_label if e.valence > 0 else self.negative_label
            if e.pole != expected:
                raise LexiconFormatError(
                    f"{self.concept}: {e.word!r} has pole {e.pole!r}, expected {expected!r}"
                )

    @cached_property
    def lookup(self) -> dict[str, LexiconEntry]:
        return {e.word: e for e in self.entries}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, word: object) -> bool:
        return word in self.lookup

    def positive(self) -> list[LexiconEntry]:
        return [e for e in self.entries if e.valence > 0]

    def negative(self) -> list[LexiconEntry]:
        return [e for e in self.entries if e.valence < 0]

    def expanded(self) -> list[LexiconEntry]:
        return [e for e in self.entries if not e.seed]

    def seeds(self) -> list[LexiconEntry]:
        return [e for e in self.entries if e.seed]


def _pole_label(entries: Sequence[LexiconEntry], sign: int, concept: str) -> str | None:
    labels = {e.pole for e in entries if (e.valence > 0) == (sign > 0)}
    if len(labels) > 1:
        raise LexiconFormatError(f"{concept}: several labels on one pole: {sorted(labels)}")
    return labels.pop() if labels else None


@dataclass(frozen=True)
class RawPolarityScore:
    word: str
    score: float


def resolve_seeds(seeds: SeedSet, table: EmbeddingTable) -> tuple[list[str], list[str], list[str]]:
    """Split seeds into those present in ``table`` and those dropped.

    Returns:
        ``(positive, negative, dropped)``.

    Raises:
        LexiconBuildError: If a pole has no word in the table.
    """
    pos = [w for w in seeds.positive_seeds if w in table]
    neg = [w for w in seeds.negative_seeds if w in table]
    dropped = [w for w in (*seeds.positive_seeds, *seeds.negative_seeds) if w not in table]
    if dropped:
        warnings.warn(
            f"{seeds.concept}: {len(dropped)} seed(s) missing from embeddings dropped: {', '.join(dropped)}",
            stacklevel=3,
        )
    for label, pole in ((seeds.positive_label, pos), (seeds.negative_label, neg)):
        if not pole:
            raise LexiconBuildError(f"{seeds.concept}: no seed of pole {label!r} is in the embeddings")
    return pos, neg, dropped


def _pole_sums(block: NDArray, pos: NDArray, neg: NDArray, pole_mean: bool) -> NDArray:
    pos_sim = (block @ pos.T).sum(axis=1)
    neg_sim = (block @ neg.T).sum(axis=1)
    if pole_mean:
        pos_sim = pos_sim / pos.shape[0]
        neg_sim = neg_sim / neg.shape[0]
    return pos_sim - neg_sim


def raw_scores(
    words: Sequence[str],
    seeds: SeedSet,
    table: EmbeddingTable,
    *,
    pole_mean: bool = False,
    workers: int = 1,
) -> NDArray[np.float64]:
    """Net polarity for many words at once: summed similarity to the positive
    seeds minus summed similarity to the negative seeds."""
    pos_words, neg_words, _ = resolve_seeds(seeds, table)
    pos = table.rows(pos_words)
    neg = table.rows(neg_words)
    for w in words:
        if w not in table:
            raise KeyError(f"word not in embedding table: {w!r}")
    idx = np.fromiter((table.index_of(w) for w in words), dtype=np.intp, count=len(words))
    chunks = [idx[i:i + _CHUNK] for i in range(0, len(idx), _CHUNK)]
    m = table.matrix

    def run(chunk):
        return _pole_sums(m[chunk], pos, neg, pole_mean)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    return np.concatenate(parts) if parts else np.zeros(0)


def net_polarity(word: str, seeds: SeedSet, table: EmbeddingTable, *, pole_mean: bool = False) -> RawPolarityScore:
    """Raw (unbounded) polarity of a single word."""
    if word not in table:
        raise KeyError(f"word not in embedding table: {word!r}")
    score = raw_scores([word], seeds, table, pole_mean=pole_mean)[0]
    return RawPolarityScore(word, float(score))


def select_poles(
    scored: Sequence[RawPolarityScore], positive_size: int, negative_size: int
) -> tuple[list[RawPolarityScore], list[RawPolarityScore]]:
    """Pick the ``positive_size`` highest positive and ``negative_size`` lowest
    negative scores. Ties resolve by word. Zero scores belong to neither pole.

    Returns pole lists ordered from most to least extreme.
    """
    if positive_size < 0 or negative_size < 0:
        raise ValueError("pole sizes must be >= 0")
    pos = sorted((s for s in scored if s.score > 0), key=lambda s: (-s.score, s.word))
    neg = sorted((s for s in scored if s.score < 0), key=lambda s: (s.score, s.word))
    return pos[:positive_size], neg[:negative_size]


def normalize_valences(raw: Sequence[RawPolarityScore]) -> list[float]:
    """Rescale raw scores into [-1, 1], separately on each side of zero.

    Positive scores are divided by the largest positive score and negative ones
    by the magnitude of the most negative score, so each populated pole's
    extreme lands exactly on +1 / -1 and within-pole order is unchanged.
    """
    scores = [r.score for r in raw]
    top = max((s for s in scores if s > 0), default=None)
    bottom = min((s for s in scores if s < 0), default=None)
    out = []
    for s in scores:
        if s > 0:
            out.append(s / top)
        elif s < 0:
            out.append(s / -bottom)
        else:
            raise LexiconBuildError("zero raw score cannot be assigned to a pole")
    return out


def build_lexicon(
    seeds: SeedSet,
    candidates: Iterable[str],
    table: EmbeddingTable,
    positive_size: int,
    negative_size: int,
    *,
    pole_mean: bool = False,
    workers: int = 1,
) -> Lexicon:
    """Expand ``seeds`` into a lexicon using nearest words in ``table``.

    Every candidate (minus the seed words) present in the table is scored by
    net polarity; the top ``positive_size`` and bottom ``negative_size`` are
    kept, valences are normalised per pole, and resolvable seeds are added at
    exactly +1 / -1.

    Flags set on the result: ``positive_truncated`` / ``negative_truncated``
    when fewer words than requested were available, ``single_pole`` when a
    pole has no expanded words.
    """
    if positive_size < 0 or negative_size < 0:
        raise ValueError("pole sizes must be >= 0")
    pos_seeds, neg_seeds, dropped = resolve_seeds(seeds, table)
    seed_words = seeds.all_words()
    pool = [w for w in dict.fromkeys(candidates) if w in table and w not in seed_words]

    scores = raw_scores(pool, seeds, table, pole_mean=pole_mean, workers=workers)
    scored = [RawPolarityScore(w, float(s)) for w, s in zip(pool, scores)]
    top, bottom = select_poles(scored, positive_size, negative_size)

    flags = set()
    if len(top) < positive_size:
        flags.add("positive_truncated")
        warnings.warn(f"{seeds.concept}: only {len(top)} of {positive_size} positive words available", stacklevel=2)
    if len(bottom) < negative_size:
        flags.add("negative_truncated")
        warnings.warn(f"{seeds.concept}: only {len(bottom)} of {negative_size} negative words available", stacklevel=2)
    if not top or not bottom:
        flags.add("single_pole")

    chosen = top + bottom
    entries = [
        LexiconEntry(r.word, v, False, seeds.positive_label if v > 0 else seeds.negative_label)
        for r, v in zip(chosen, normalize_valences(chosen))
    ]
    entries += [LexiconEntry(w, 1.0, True, seeds.positive_label) for w in pos_seeds]
    entries += [LexiconEntry(w, -1.0, True, seeds.negative_label) for w in neg_seeds]

    provenance = {
        "concept": seeds.concept,
        "embedding_source": table.source_id,
        "filter_digest": getattr(candidates, "filter_digest", None) or CandidateVocab(pool).filter_digest,
        "seed_digest": seeds.digest,
        "positive_size_requested": positive_size,
        "negative_size_requested": negative_size,
        "positive_size": len(top),
        "negative_size": len(bottom),
        "pole_mean": pole_mean,
        "dropped_seeds": dropped,
        "candidates_scored": len(pool),
        "flags": sorted(flags),
    }
    return Lexicon(
        seeds.concept,
        tuple(entries),
        seeds.positive_label,
        seeds.negative_label,
        provenance=provenance,
        flags=frozenset(flags),
    )


def sample_seeds(full: SeedSet, k: int, rng_seed: int) -> SeedSet:
    """Draw ``k`` seeds per pole uniformly without replacement.

    Poles are sampled independently from one generator seeded by ``rng_seed``;
    drawn words keep their original order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    for label, pole in ((full.positive_label, full.positive_seeds), (full.negative_label, full.negative_seeds)):
        if k > len(pole):
            raise ValueError(f"k={k} exceeds the {len(pole)} seeds of pole {label!r}")
    rng = np.random.default_rng(rng_seed)
    pos = np.sort(rng.choice(len(full.positive_seeds), size=k, replace=False))
    neg = np.sort(rng.choice(len(full.negative_seeds), size=k, replace=False))
    return SeedSet(
        full.concept,
        full.positive_label,
        full.negative_label,
        tuple(full.positive_seeds[i] for i in pos),
        tuple(full.negative_seeds[i] for i in neg),
    )


# -- CSV ------------------------------------------------------------------


def format_valence(v: float) -> str:
    """Shortest text that parses back to exactly ``v``; integers drop the ``.0``."""
    if v == int(v):
        return str(int(v))
    return repr(float(v))


def export_csv(lexicon: Lexicon, path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for e in lexicon.entries:
            writer.writerow([e.word, format_valence(e.valence), int(e.seed), e.pole])
    return path


def import_csv(path: str | Path, concept: str | None = None) -> Lexicon:
    """Read a ``word,valence,seed,sentiment`` lexicon file.

    Raises:
        LexiconFormatError: With the offending row number on a bad header,
            wrong field count, unparseable or out-of-range valence, bad seed
            flag, or duplicate word.
    """
    path = Path(path)
    entries = []
    seen: set[str] = set()
    with open(path, encoding="utf-8-sig", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip().lower() for h in header) != CSV_HEADER:
            raise LexiconFormatError(f"{path}: expected header {','.join(CSV_HEADER)}, got {header}")
        for row in reader:
            rowno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise LexiconFormatError(f"{path}: row {rowno}: expected 4 fields, got {len(row)}")
            word, val, seed, pole = (c.strip() for c in row)
            if not word:
                raise LexiconFormatError(f"{path}: row {rowno}: empty word")
            try:
                valence = float(val)
            except ValueError:
                raise LexiconFormatError(f"{path}: row {rowno}: valence {val!r} is not a number") from None
            if not (-1.0 <= valence <= 1.0) or valence == 0.0:
                raise LexiconFormatError(f"{path}: row {rowno}: valence {val} outside [-1, 0) U (0, 1]")
            if seed not in ("0", "1"):
                raise LexiconFormatError(f"{path}: row {rowno}: seed flag must be 0 or 1, got {seed!r}")
            if seed == "1" and abs(valence) != 1.0:
                raise LexiconFormatError(f"{path}: row {rowno}: seed {word!r} must have valence 1 or -1")
            if word in seen:
                raise LexiconFormatError(f"{path}: row {rowno}: duplicate word {word!r}")
            seen.add(word)
            entries.append(LexiconEntry(word, valence, seed == "1", pole))
    if not entries:
        raise LexiconFormatError(f"{path}: lexicon has no entries")
    try:
        return Lexicon(concept if concept is not None else path.stem, tuple(entries))
    except LexiconFormatError as exc:
        raise LexiconFormatError(f"{path}: {exc}") from None


def load_seeds_csv(
    path: str | Path,
    concept: str,
    positive_label: str,
    negative_label: str,
) -> SeedSet:
    """Read a ``word,pole`` seed file; ``pole`` must be one of the two labels."""
    pos: list[str] = []
    neg: list[str] = []
    with open(path, encoding="utf-8-sig", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["word", "pole"]:
            raise LexiconFormatError(f"{path}: expected header word,pole, got {header}")
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise LexiconFormatError(f"{path}: row {reader.line_num}: expected 2 fields")
            word, pole = row[0].strip().lower(), row[1].strip()
            if pole == positive_label:
                pos.append(word)
            elif pole == negative_label:
                neg.append(word)
            else:
                raise LexiconFormatError(
                    f"{path}: row {reader.line_num}: pole {pole!r} is neither "
                    f"{positive_label!r} nor {negative_label!r}"
                )
    return SeedSet(concept, positive_label, negative_label, tuple(pos), tuple(neg))


def load_seed_lists(
    positive_path: str | Path,
    negative_path: str | Path,
    concept: str,
    positive_label: str,
    negative_label: str,
) -> SeedSet:
    """Build a seed set from two plain word-per-line files."""
    def read(p):
        words = []
        with open(p, encoding="utf-8") as fh:
            for line in fh:
                line = line.split("#", 1)[0].strip().lower()
                if line:
                    words.append(line)
        return tuple(words)

    return SeedSet(concept, positive_label, negative_label, read(positive_path), read(negative_path))


# -- comparison -----------------------------------------------------------


@dataclass(frozen=True)
class OverlapReport:
    n_words: int
    n_shared: int
    overlap: float
    agreement: float | None
    slope: float | None = None
    intercept: float | None = None
    r_squared: float | None = None
    residuals: Mapping[str, float] = field(default_factory=dict)
    thresholds: tuple[float, ...] = (0.5, 0.6)

    def exceeding(self, threshold: float) -> list[str]:
        """Shared words whose residual magnitude is above ``threshold``."""
        return sorted(w for w, r in self.residuals.items() if abs(r) > threshold)


def compare_lexicons(
    a: Lexicon,
    b: Lexicon,
    exclude_seeds: bool = True,
    thresholds: tuple[float, ...] = (0.5, 0.6),
) -> OverlapReport:
    """Word overlap, pole agreement and valence residuals of ``a`` against ``b``.

    Overlap is the share of ``a``'s words (expanded only, when
    ``exclude_seeds``) that also appear anywhere in ``b``. Agreement is the
    share of shared words whose valences have the same sign. Residuals come
    from regressing ``a``'s valences on ``b``'s over the shared words; they
    are omitted with fewer than 3 shared words or constant ``b`` valences.
    """
    if not len(a) or not len(b):
        raise ValueError("both lexicons must be non-empty")
    words_a = [e for e in a.entries if not (exclude_seeds and e.seed)]
    shared = [e for e in words_a if e.word in b.lookup]
    n_words = len(words_a)
    overlap = len(shared) / n_words if n_words else 0.0
    if not shared:
        return OverlapReport(n_words, 0, overlap, None, thresholds=thresholds)

    va = np.array([e.valence for e in shared])
    vb = np.array([b.lookup[e.word].valence for e in shared])
    agreement = float(np.mean(np.sign(va) == np.sign(vb)))
    report = OverlapReport(n_words, len(shared), overlap, agreement, thresholds=thresholds)
    if len(shared) < 3 or np.all(vb == vb[0]):
        return report

    xbar, ybar = vb.mean(), va.mean()
    slope = float(np.sum((vb - xbar) * (va - ybar)) / np.sum((vb - xbar) ** 2))
    intercept = float(ybar - slope * xbar)
    resid = va - (intercept + slope * vb)
    sst = float(np.sum((va - ybar) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / sst if sst > 0 else float("nan")
    return OverlapReport(
        n_words,
        len(shared),
        overlap,
        agreement,
        slope,
        intercept,
        r2,
        {e.word: float(r) for e, r in zip(shared, resid)},
        thresholds,
    )
