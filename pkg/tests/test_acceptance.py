"""End-to-end acceptance criteria, one test per criterion.

The conftest hook prints a PASS/FAIL line per test here at the end of the run.
"""

import math
import os
import time
import warnings
from pathlib import Path

import numpy as np
import pytest

import frame_fixture
import oracles
from conftest import DEMO_DIR
from seedlex import (
    EmbeddingTable,
    Lexicon,
    LexiconEntry,
    SeedSet,
    attribute_matches,
    build_lexicon,
    classification_metrics,
    confusion,
    estimate_frequency,
    export_csv,
    import_csv,
    load_embeddings,
    logistic_fit_accuracy,
    ols_fit,
    predict_frame,
    score_document,
    TokenizedDoc,
    tokenize,
)
from seedlex.cli import main
from seedlex.evaluation import logistic_gradient, logistic_mean_loglik
from seedlex.lexicon import raw_scores

DIMS = (3, 5, 10)
VOCABS = (50, 200, 1000)


def random_tables():
    """27 synthetic tables: three draws for every (D, V) pair."""
    for d in DIMS:
        for v in VOCABS:
            for rep in range(3):
                rng = np.random.default_rng([d, v, rep])
                words, vecs = oracles.random_vocab(rng, v, d)
                n_seeds = int(rng.integers(1, 6))
                picks = rng.choice(v, size=2 * n_seeds, replace=False)
                pos = [words[i] for i in picks[:n_seeds]]
                neg = [words[i] for i in picks[n_seeds:]]
                size = max(1, v // 10)
                yield words, vecs, pos, neg, size


def test_lexicon_induction_matches_bruteforce_oracle():
    start = time.perf_counter()
    tables = 0
    for words, vecs, pos, neg, size in random_tables():
        table = EmbeddingTable(words, np.array(vecs))
        seeds = SeedSet("c", "Positive", "Negative", tuple(pos), tuple(neg))
        lex = build_lexicon(seeds, words, table, size, size)
        exp_pos, exp_neg = oracles.expand(words, vecs, words, pos, neg, size, size)

        got_pos = [e.word for e in lex.expanded() if e.valence > 0]
        got_neg = [e.word for e in reversed(lex.expanded()) if e.valence < 0]
        assert got_pos == [w for w, _, _ in exp_pos]
        assert got_neg == [w for w, _, _ in exp_neg]

        oracle_raw = [r for _, r, _ in exp_pos + exp_neg]
        ours = raw_scores([w for w, _, _ in exp_pos + exp_neg], seeds, table)
        np.testing.assert_allclose(ours, oracle_raw, rtol=0, atol=1e-12)
        tables += 1
    assert tables >= 20
    assert time.perf_counter() - start < 10.0


def test_normalization_contract():
    for words, vecs, pos, neg, size in random_tables():
        table = EmbeddingTable(words, np.array(vecs))
        seeds = SeedSet("c", "Positive", "Negative", tuple(pos), tuple(neg))
        lex = build_lexicon(seeds, words, table, size, size)
        expanded = lex.expanded()
        pos_vals = [e.valence for e in expanded if e.valence > 0]
        neg_vals = [e.valence for e in expanded if e.valence < 0]
        if pos_vals:
            assert abs(max(pos_vals) - 1.0) <= 1e-9
        if neg_vals:
            assert abs(min(neg_vals) + 1.0) <= 1e-9
        for e in lex.seeds():
            assert e.valence == (1.0 if e.word in pos else -1.0)
        # the order by valence is the order by raw score within each pole
        for pole in ([e for e in expanded if e.valence > 0], [e for e in expanded if e.valence < 0]):
            raw = raw_scores([e.word for e in pole], seeds, table)
            by_raw = [pole[i].word for i in sorted(range(len(pole)), key=lambda i: (-raw[i], pole[i].word))]
            by_val = [e.word for e in sorted(pole, key=lambda e: (-e.valence, e.word))]
            assert by_raw == by_val


def test_metric_golden_values():
    rep = classification_metrics(confusion(list("AABB"), list("ABBB")))
    assert abs(rep.accuracy - 0.75) <= 1e-12
    assert abs(rep.macro_f1 - 11 / 15) <= 1e-12

    x = np.arange(10.0)
    perfect = ols_fit(x, 2 * x + 1)
    assert abs(perfect.rmse) <= 1e-12 and abs(perfect.adj_r_squared - 1.0) <= 1e-12

    rng = np.random.default_rng(2024)
    x = rng.uniform(-1, 1, size=10)
    y = 1.5 - 0.8 * x + rng.normal(scale=0.3, size=10)
    fit = ols_fit(x, y)
    ref = oracles.ols(x.tolist(), y.tolist())
    assert abs(fit.rmse - ref["rmse"]) <= 1e-9
    assert abs(fit.adj_r_squared - ref["adj_r_squared"]) <= 1e-9


def test_scoring_contracts_on_random_pairs():
    rng = np.random.default_rng(99)
    vocab = [f"v{i}" for i in range(30)]
    violations = []
    for trial in range(1000):
        lex_words = rng.choice(vocab, size=int(rng.integers(1, 20)), replace=False)
        vals = rng.uniform(-1, 1, size=len(lex_words))
        vals[vals == 0] = 0.5
        lexicon = Lexicon("c", tuple(
            LexiconEntry(str(w), float(v), False, "Positive" if v > 0 else "Negative") for w, v in zip(lex_words, vals)
        ))
        tokens = [str(t) for t in rng.choice(vocab + ["filler"], size=int(rng.integers(0, 80)))]
        doc = TokenizedDoc(str(trial), tuple(tokens))
        shuffled = TokenizedDoc(doc.doc_id, tuple(rng.permutation(tokens).tolist()) if tokens else ())
        twice = TokenizedDoc(doc.doc_id, tuple(tokens * 2))
        for mode in ("polarity", "valence"):
            s = score_document(doc, lexicon, mode)
            if not -1.0 <= s.score <= 1.0:
                violations.append((trial, mode, "range"))
            if score_document(shuffled, lexicon, mode).score != s.score:
                violations.append((trial, mode, "permutation"))
            attrs = attribute_matches(doc, lexicon, top_k=len(lexicon), mode=mode)
            if math.fsum(a.contribution for a in attrs) != s.numerator:
                violations.append((trial, mode, "accounting"))
        if score_document(twice, lexicon, "polarity").score != score_document(doc, lexicon, "polarity").score:
            violations.append((trial, "polarity", "self-concatenation"))
    assert violations == []


def test_frame_prediction_hand_confusion():
    frames = frame_fixture.frame_lexicons()
    truth, predicted = [], []
    for text, t, expected, tie in frame_fixture.DOCS:
        p = predict_frame(tokenize(text), frames)
        assert (p.predicted_frame, p.tie) == (expected, tie), text
        truth.append(t)
        predicted.append(p.predicted_frame)
    cm = confusion(truth, predicted, labels=frame_fixture.LABELS)
    assert cm.counts.tolist() == frame_fixture.CONFUSION
    assert classification_metrics(cm).accuracy == frame_fixture.ACCURACY


def _demo_pipeline(out: Path) -> None:
    config = str(DEMO_DIR / "demo.json")
    for cmd in ("build", "score", "eval", "compare", "seed-experiment"):
        assert main([cmd, "--config", config, "--output-dir", str(out)]) == 0, cmd


def test_demo_pipeline_is_deterministic(tmp_path):
    start = time.perf_counter()
    _demo_pipeline(tmp_path / "a")
    _demo_pipeline(tmp_path / "b")
    assert time.perf_counter() - start < 30.0
    a = sorted(p.name for p in (tmp_path / "a").iterdir())
    b = sorted(p.name for p in (tmp_path / "b").iterdir())
    assert a == b and len(a) >= 10
    for name in a:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def _finite_difference(params, x, y_idx, h=1e-5):
    out = np.zeros_like(params)
    for i in np.ndindex(params.shape):
        e = np.zeros_like(params)
        e[i] = h
        out[i] = (logistic_mean_loglik(params + e, x, y_idx) - logistic_mean_loglik(params - e, x, y_idx)) / (2 * h)
    return out


def test_logistic_gradient_check():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        k = 2 + seed % 2
        n = 40 + 10 * seed
        y_idx = rng.integers(0, k, size=n)
        x = y_idx * 0.8 + rng.normal(size=n)
        y = [f"c{i}" for i in y_idx]
        fit = logistic_fit_accuracy(x, y)
        assert fit.converged
        params = np.stack([fit.intercepts[1:], fit.slopes[1:]], axis=1)

        analytic = logistic_gradient(params, x, y_idx)
        numeric = _finite_difference(params, x, y_idx)
        # at the optimum both gradients are ~0, so the error is scaled by max(1, |g|)
        scale = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
        assert np.all(np.abs(analytic - numeric) / scale < 1e-4)
        assert np.abs(analytic).max() < 1e-6

        # away from the optimum the gradient is large enough for a plain relative check
        moved = params + rng.normal(scale=0.5, size=params.shape)
        analytic = logistic_gradient(moved, x, y_idx)
        numeric = _finite_difference(moved, x, y_idx)
        assert np.all(np.abs(analytic - numeric) <= 1e-4 * np.abs(analytic))


GLOVE = os.environ.get("SEEDLEX_GLOVE")
PHRASEBANK = os.environ.get("SEEDLEX_PHRASEBANK")
LEXICON = os.environ.get("SEEDLEX_LEXICON")


def _read_phrasebank(path):
    docs, labels = [], []
    with open(path, encoding="latin-1") as fh:
        for i, line in enumerate(fh):
            text, sep, label = line.rstrip("\n").rpartition("@")
            if sep:
                docs.append(tokenize(text, str(i)))
                labels.append(label.strip())
    return docs, labels


@pytest.mark.skipif(not (GLOVE and PHRASEBANK and LEXICON),
                    reason="set SEEDLEX_GLOVE, SEEDLEX_PHRASEBANK and SEEDLEX_LEXICON to run")
def test_dataset_smoke(tmp_path):
    table, _ = load_embeddings(GLOVE, "glove-text", limit=50_000)
    assert table.dimension > 0
    lexicon = import_csv(LEXICON)
    assert import_csv(export_csv(lexicon, tmp_path / Path(LEXICON).name)) == lexicon
    docs, labels = _read_phrasebank(PHRASEBANK)
    assert len(set(labels)) == 3
    x = [score_document(d, lexicon).score for d in docs]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        acc = logistic_fit_accuracy(x, labels).accuracy
    assert 0.33 <= acc <= 0.75


def test_mandelbrot_frequency_estimate():
    assert abs(estimate_frequency(1) - 1e6 / 3.7) <= 1e-6 * (1e6 / 3.7)
