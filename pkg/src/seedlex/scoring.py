"""Bag-of-words document scoring with expanded lexicons."""

from __future__ import annotations

import csv
import math
import re
from collections import Counter
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from pathlib import Path

from .errors import LexiconFormatError
from .lexicon import Lexicon

MODES = ("polarity", "valence")
NORMALIZATIONS = ("matched", "tokens")

# Moral-foundations listing order; used to break exact ties between frames.
CANONICAL_FRAMES = ("Care", "Fairness", "Loyalty", "Authority", "Sanctity")
NON_MORAL = "Non-moral"

SCORE_COLUMNS = ("doc_id", "concept", "mode", "score", "matched_pos", "matched_neg", "matched_total", "no_match")

_TOKEN = re.compile(r"[^\W_]+(?:['-][^\W_]+)*")


@dataclass(frozen=True)
class TokenizedDoc:
    doc_id: str
    tokens: tuple[str, ...]

    @property
    def token_count(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class DocumentScore:
    doc_id: str
    concept: str
    mode: str
    score: float
    matched_positive: int
    matched_negative: int
    numerator: float

    @property
    def matched_total(self) -> int:
        return self.matched_positive + self.matched_negative

    @property
    def no_match(self) -> bool:
        return self.matched_total == 0

    def as_row(self) -> list:
        return [
            self.doc_id, self.concept, self.mode, repr(self.score),
            self.matched_positive, self.matched_negative, self.matched_total, int(self.no_match),
        ]


@dataclass(frozen=True)
class MatchAttribution:
    word: str
    valence: float
    count: int
    contribution: float


@dataclass(frozen=True)
class FramePrediction:
    doc_id: str
    sums: Mapping[str, int]
    predicted_frame: str
    tie: bool


def tokenize(text: str, doc_id: str = "") -> TokenizedDoc:
    """Lowercase and split on anything but letters, digits and internal
    apostrophes or hyphens. Tokens without a letter are dropped."""
    text = text.replace("’", "'").lower()
    tokens = tuple(t for t in _TOKEN.findall(text) if any(c.isalpha() for c in t))
    return TokenizedDoc(doc_id, tokens)


def _check_mode(mode: str, normalize: str) -> None:
    if mode not in MODES:
        raise ValueError(f"unknown scoring mode {mode!r}; expected one of {MODES}")
    if normalize not in NORMALIZATIONS:
        raise ValueError(f"unknown normalization {normalize!r}; expected one of {NORMALIZATIONS}")


def _matches(doc: TokenizedDoc, lexicon: Lexicon) -> list[tuple[str, float, int]]:
    """(word, valence, count) for every lexicon word in ``doc``, sorted by word."""
    counts = Counter(t for t in doc.tokens if t in lexicon.lookup)
    return [(w, lexicon.lookup[w].valence, counts[w]) for w in sorted(counts)]


def _weight(valence: float, mode: str) -> float:
    if mode == "valence":
        return valence
    return 1.0 if valence > 0 else -1.0


def score_document(
    doc: TokenizedDoc, lexicon: Lexicon, mode: str = "polarity", normalize: str = "matched"
) -> DocumentScore:
    """Score one document.

    Polarity mode counts matched tokens per pole, ``(P - N) / (P + N)``.
    Valence mode sums matched entries' valences over the matched token count.
    With ``normalize="tokens"`` both divide by document length instead.
    Documents with no match score 0.
    """
    _check_mode(mode, normalize)
    if not len(lexicon):
        raise ValueError("lexicon is empty")
    matches = _matches(doc, lexicon)
    pos = sum(c for _, v, c in matches if v > 0)
    neg = sum(c for _, v, c in matches if v < 0)
    numerator = math.fsum(c * _weight(v, mode) for _, v, c in matches)
    denom = pos + neg if normalize == "matched" else doc.token_count
    score = numerator / denom if pos + neg else 0.0
    return DocumentScore(doc.doc_id, lexicon.concept, mode, score, pos, neg, numerator)


def score_corpus(
    docs: Sequence[TokenizedDoc],
    lexicon: Lexicon,
    mode: str = "polarity",
    normalize: str = "matched",
    workers: int = 1,
) -> list[DocumentScore]:
    """Score every document; output order follows input order."""
    _check_mode(mode, normalize)
    fn = partial(score_document, lexicon=lexicon, mode=mode, normalize=normalize)
    if workers > 1 and len(docs) > 1:
        chunksize = max(1, len(docs) // (workers * 4))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, docs, chunksize=chunksize))
    return [fn(d) for d in docs]


def attribute_matches(
    doc: TokenizedDoc, lexicon: Lexicon, top_k: int = 10, mode: str = "polarity"
) -> list[MatchAttribution]:
    """Per-word contributions to the document's score numerator.

    Contribution is occurrences times valence (valence mode) or times the pole
    sign (polarity mode). Largest magnitude first, ties by word.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    _check_mode(mode, "matched")
    out = [MatchAttribution(w, v, c, c * _weight(v, mode)) for w, v, c in _matches(doc, lexicon)]
    out.sort(key=lambda a: (-abs(a.contribution), a.word))
    return out[:top_k]


def _frame_rank(name: str, position: int) -> tuple[int, int]:
    canon = [f.lower() for f in CANONICAL_FRAMES]
    key = name.lower()
    if key in canon:
        return (canon.index(key), position)
    return (len(canon), position)


def predict_frame(doc: TokenizedDoc, frames: Mapping[str, Lexicon]) -> FramePrediction:
    """Pick the frame whose lexicon matches the most tokens, either pole.

    All-zero sums give ``"Non-moral"``. Exact ties go to the earliest frame in
    Care, Fairness, Loyalty, Authority, Sanctity order (other names after, in
    mapping order) and set ``tie``.
    """
    if not frames:
        raise ValueError("no frame lexicons given")
    sums = {}
    for name, lex in frames.items():
        sums[name] = sum(c for _, _, c in _matches(doc, lex))
    best = max(sums.values())
    if best == 0:
        return FramePrediction(doc.doc_id, sums, NON_MORAL, False)
    order = sorted(sums, key=lambda n: _frame_rank(n, list(frames).index(n)))
    winners = [n for n in order if sums[n] == best]
    return FramePrediction(doc.doc_id, sums, winners[0], len(winners) > 1)


# -- corpus I/O ------------------------------------------------------------


def read_corpus(path: str | Path) -> list[TokenizedDoc]:
    """Read a ``doc_id,text`` CSV (``.csv``) or one document per line otherwise.

    Plain-text documents get ids ``1``, ``2``, ... by line number; blank lines
    are kept as empty documents so ids stay aligned with lines.

    Raises:
        LexiconFormatError: On a missing header column, wrong field count or
            duplicate id, naming the line.
    """
    path = Path(path)
    docs = []
    if path.suffix.lower() == ".csv":
        with open(path, encoding="utf-8-sig", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header[:2]] != ["doc_id", "text"] or len(header) != 2:
                raise LexiconFormatError(f"{path}: line 1: expected header doc_id,text, got {header}")
            seen = set()
            for row in reader:
                if not row:
                    continue
                if len(row) != 2:
                    raise LexiconFormatError(f"{path}: line {reader.line_num}: expected 2 fields, got {len(row)}")
                doc_id = row[0].strip()
                if not doc_id or doc_id in seen:
                    raise LexiconFormatError(f"{path}: line {reader.line_num}: missing or duplicate doc_id {doc_id!r}")
                seen.add(doc_id)
                docs.append(tokenize(row[1], doc_id))
    else:
        with open(path, encoding="utf-8") as fh:
            for i, line in enumerate(fh, start=1):
                docs.append(tokenize(line, str(i)))
    return docs


def write_scores(scores: Sequence[DocumentScore], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SCORE_COLUMNS)
        for s in scores:
            writer.writerow(s.as_row())
