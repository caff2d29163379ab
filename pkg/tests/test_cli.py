import csv
import json
import subprocess
import sys

import pytest

import frame_fixture
import oracles
from conftest import DEMO_DIR, GOLDEN_DIR
from seedlex import Lexicon, LexiconEntry, export_csv, import_csv
from seedlex.cli import main

DEMO = DEMO_DIR / "demo.json"


def rows(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def metric(path, name, lexicon=None):
    for r in rows(path):
        if r["metric"] == name and (lexicon is None or r["lexicon"] == lexicon):
            return r["value"]
    raise KeyError(name)


@pytest.fixture
def sentiment_csv(tmp_path):
    lex = Lexicon("sent", (
        LexiconEntry("superb", 1.0, False, "Positive"),
        LexiconEntry("fine", 0.5, False, "Positive"),
        LexiconEntry("blamed", -1.0, False, "Negative"),
        LexiconEntry("dull", -0.25, False, "Negative"),
    ))
    return export_csv(lex, tmp_path / "sent.csv")


# -- usage errors -------------------------------------------------------------


def test_missing_embeddings_exit_2(tmp_path, capsys):
    missing = tmp_path / "no_such_vectors.txt"
    code = main(["build", "--config", str(DEMO), "--embeddings", str(missing), "--output-dir", str(tmp_path)])
    assert code == 2
    assert str(missing) in capsys.readouterr().err


def test_unknown_task_exit_2(tmp_path, capsys):
    code = main(["eval", "--task", "clustering", "--output-dir", str(tmp_path)])
    assert code == 2
    assert "clustering" in capsys.readouterr().err


def test_bad_config_key_exit_2(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"sizes": {"positive": 3}}), encoding="utf-8")
    assert main(["build", "--config", str(cfg)]) == 2


def test_data_error_exit_1(tmp_path, sentiment_csv):
    corpus = tmp_path / "c.csv"
    corpus.write_text("doc_id,text\na,x,y\n", encoding="utf-8")
    code = main(["score", "--lexicon", str(sentiment_csv), "--corpus", str(corpus), "--output-dir", str(tmp_path)])
    assert code == 1


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "seedlex", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "seedlex" in proc.stdout


# -- score ------------------------------------------------------------------------


def test_three_line_corpus(tmp_path, sentiment_csv):
    corpus = tmp_path / "three.txt"
    corpus.write_text("superb stuff\nnothing\nblamed and dull\n", encoding="utf-8")
    assert main(["score", "--lexicon", str(sentiment_csv), "--corpus", str(corpus), "--output-dir", str(tmp_path)]) == 0
    out = rows(tmp_path / "scores.csv")
    assert [r["doc_id"] for r in out] == ["1", "2", "3"]
    assert [r["no_match"] for r in out] == ["0", "1", "0"]
    assert (tmp_path / "scores.provenance.json").exists()


def test_top_words_adds_attributions(tmp_path, sentiment_csv):
    corpus = tmp_path / "c.txt"
    corpus.write_text("superb superb blamed\n", encoding="utf-8")
    args = ["score", "--lexicon", str(sentiment_csv), "--corpus", str(corpus), "--output-dir", str(tmp_path)]
    assert main(args) == 0
    assert not (tmp_path / "attributions.csv").exists()
    assert main(args + ["--top-words", "10"]) == 0
    attrs = rows(tmp_path / "attributions.csv")
    assert [(a["word"], float(a["contribution"])) for a in attrs] == [("superb", 2.0), ("blamed", -1.0)]


def test_valence_and_polarity_modes(tmp_path, sentiment_csv):
    corpus = tmp_path / "c.txt"
    corpus.write_text("fine fine dull\n", encoding="utf-8")
    scores = {}
    for mode in ("polarity", "valence"):
        out = tmp_path / mode
        assert main(["score", "--lexicon", str(sentiment_csv), "--corpus", str(corpus), "--mode", mode,
                     "--output-dir", str(out)]) == 0
        scores[mode] = float(rows(out / "scores.csv")[0]["score"])
    assert scores["polarity"] == pytest.approx((2 - 1) / 3)
    assert scores["valence"] == pytest.approx((0.5 + 0.5 - 0.25) / 3)


# -- eval -------------------------------------------------------------------------


def test_regression_perfect_fit(tmp_path):
    pred = tmp_path / "pred.csv"
    labels = tmp_path / "labels.csv"
    xs = [-0.5, -0.25, 0.0, 0.25, 0.5, 1.0]
    pred.write_text("doc_id,score\n" + "".join(f"d{i},{x}\n" for i, x in enumerate(xs)), encoding="utf-8")
    labels.write_text("doc_id,rating\n" + "".join(f"d{i},{4 * x + 3}\n" for i, x in enumerate(xs)), encoding="utf-8")
    assert main(["eval", "--task", "regression", "--predictions", str(pred), "--labels", str(labels),
                 "--truth-column", "rating", "--output-dir", str(tmp_path)]) == 0
    report = tmp_path / "eval_regression.csv"
    assert float(metric(report, "rmse")) == pytest.approx(0.0, abs=1e-12)
    assert float(metric(report, "slope")) == pytest.approx(4.0)
    assert rows(report)[0].keys() == {"lexicon", "metric", "value", "test"}


def test_regression_missing_truth_counted(tmp_path):
    pred = tmp_path / "pred.csv"
    pred.write_text("doc_id,score,y\na,1,1\nb,2,2\nc,3,\nd,4,4\ne,5,5.5\n", encoding="utf-8")
    assert main(["eval", "--task", "regression", "--predictions", str(pred), "--truth-column", "y",
                 "--output-dir", str(tmp_path)]) == 0
    assert metric(tmp_path / "eval_regression.csv", "n_dropped") == "1"
    assert metric(tmp_path / "eval_regression.csv", "n_valid") == "4"


def test_frames_task_matches_hand_confusion(tmp_path):
    lex_paths, corpus, labels = frame_fixture.write_files(tmp_path / "in")
    out = tmp_path / "out"
    args = ["score", "--corpus", str(corpus), "--output-dir", str(out)]
    for p in lex_paths:
        args += ["--lexicon", str(p)]
    assert main(args) == 0
    assert main(["eval", "--task", "frames", "--labels", str(labels), "--truth-column", "frame",
                 "--output-dir", str(out)]) == 0
    assert float(metric(out / "eval_frames.csv", "accuracy")) == frame_fixture.ACCURACY
    cm = {(r["truth"], r["predicted"]): int(r["count"]) for r in rows(out / "confusion_frames.csv")}
    labels_ = frame_fixture.LABELS
    for i, t in enumerate(labels_):
        for j, p in enumerate(labels_):
            assert cm.get((t, p), 0) == frame_fixture.CONFUSION[i][j], (t, p)


# -- compare / seed experiment -------------------------------------------------------


def test_compare_with_self(tmp_path, sentiment_csv):
    assert main(["compare", str(sentiment_csv), str(sentiment_csv), "--output-dir", str(tmp_path)]) == 0
    assert float(metric(tmp_path / "compare_sent_vs_sent.csv", "overlap")) == 1.0


def test_seed_experiment_constant_eval_sd_zero(tmp_path, monkeypatch):
    import seedlex.cli as cli

    monkeypatch.setattr(cli, "logistic_fit_accuracy", lambda *a, **k: type("F", (), {"accuracy": 0.5})())
    assert main(["seed-experiment", "--config", str(DEMO), "--ks", "2,3", "--runs", "2",
                 "--output-dir", str(tmp_path)]) == 0
    summary = rows(tmp_path / "seed_experiment_summary.csv")
    assert [r["k"] for r in summary] == ["2", "3"]
    assert all(float(r["sd"]) == 0.0 and r["runs"] == "2" for r in summary)


def test_inspect(demo_dir, capsys):
    assert main(["inspect", str(GOLDEN_DIR / "demo" / "sentiment.csv"), "-k", "2"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "word,valence,seed,sentiment"
    assert out[1:] == ["fine,1.000,0,Positive", "superb,0.969,0,Positive", "(...)",
                       "blamed,-0.967,0,Negative", "ugly,-1.000,0,Negative"]


# -- demo pipeline and goldens -----------------------------------------------------


def run_demo(out, *extra):
    for cmd in ("build", "score", "eval", "compare", "seed-experiment"):
        assert main([cmd, "--config", str(DEMO), "--output-dir", str(out), *extra]) == 0, cmd


def test_demo_pipeline_matches_goldens(tmp_path):
    run_demo(tmp_path)
    goldens = sorted((GOLDEN_DIR / "demo").glob("*.csv"))
    assert goldens
    for g in goldens:
        assert (tmp_path / g.name).read_bytes() == g.read_bytes(), g.name
        assert (tmp_path / g.name.replace(".csv", ".provenance.json")).exists()


def test_golden_lexicon_agrees_with_oracle():
    words, vecs = oracles.parse_glove(DEMO_DIR / "embeddings.txt")
    cands = [w for w in words[5:] if w.isalpha() and len(w) >= 2]
    seeds = rows(DEMO_DIR / "seeds.csv")
    pos_seeds = [r["word"] for r in seeds if r["pole"] == "Positive"]
    neg_seeds = [r["word"] for r in seeds if r["pole"] == "Negative"]
    pos, neg = oracles.expand(words, vecs, cands, pos_seeds, neg_seeds, 8, 8)

    golden = import_csv(GOLDEN_DIR / "demo" / "sentiment.csv")
    assert [e.word for e in golden.expanded() if e.valence > 0] == [w for w, _, _ in pos]
    assert [e.word for e in golden.expanded() if e.valence < 0] == [w for w, _, _ in reversed(neg)]
    for w, _, v in pos + neg:
        assert golden.lookup[w].valence == pytest.approx(v, abs=1e-12)
    assert {e.word for e in golden.seeds()} == set(pos_seeds) | set(neg_seeds)


def test_rebuild_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert main(["build", "--config", str(DEMO), "--output-dir", str(tmp_path / d)]) == 0
    for name in ("sentiment.csv", "sentiment.provenance.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_provenance_has_no_paths(tmp_path):
    assert main(["build", "--config", str(DEMO), "--output-dir", str(tmp_path)]) == 0
    prov = json.loads((tmp_path / "sentiment.provenance.json").read_text(encoding="utf-8"))
    assert set(prov["inputs"]) == {"embeddings.txt", "seeds.csv"}
    assert str(tmp_path) not in json.dumps(prov)
    assert prov["parameters"]["lexicon"]["dropped_seeds"] == []


def test_env_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("SEEDLEX_OUTPUT_DIR", str(tmp_path / "env"))
    monkeypatch.setenv("SEEDLEX_WORKERS", "2")
    assert main(["build", "--config", str(DEMO)]) == 0
    assert (tmp_path / "env" / "sentiment.csv").exists()
    assert main(["build", "--config", str(DEMO), "--output-dir", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "sentiment.csv").read_bytes() == (tmp_path / "env" / "sentiment.csv").read_bytes()
    monkeypatch.setenv("SEEDLEX_WORKERS", "many")
    assert main(["build", "--config", str(DEMO)]) == 2
