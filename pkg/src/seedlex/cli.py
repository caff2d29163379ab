"""``seedlex`` command line: build, score, eval, compare, seed-experiment, inspect.

Exit codes: 0 success, 1 runtime or data error, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import warnings
from collections.abc import Sequence
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import TASKS, RunConfig, SeedSpec, load_config, require_file, validate
from .embeddings import EmbeddingTable, filter_vocabulary, load_embeddings
from .errors import ConfigError, SeedlexError
from .evaluation import (
    classification_metrics,
    confusion,
    logistic_fit_accuracy,
    ols_fit,
    seed_sensitivity,
)
from .lexicon import (
    Lexicon,
    SeedSet,
    build_lexicon,
    compare_lexicons,
    export_csv,
    format_valence,
    import_csv,
    load_seed_lists,
    load_seeds_csv,
)
from .scoring import (
    attribute_matches,
    predict_frame,
    read_corpus,
    score_corpus,
    write_scores,
)

REPORT_COLUMNS = ("lexicon", "metric", "value", "test")


# -- small output helpers --------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(int(v))
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(float(v))
    return str(v)


def _write_csv(path: Path, header: Sequence[str], rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_provenance(output: Path, command: str, inputs: Sequence[Path], **params) -> None:
    """Sidecar next to ``output`` with input digests and run parameters.

    Only file names are recorded (no absolute paths or timestamps) so reruns
    stay byte-identical.
    """
    record = {
        "command": command,
        "seedlex_version": __version__,
        "output": output.name,
        "output_sha256": _sha256(output),
        "inputs": {Path(p).name: _sha256(p) for p in inputs},
        "parameters": params,
    }
    side = output.with_name(output.stem + ".provenance.json")
    side.write_text(json.dumps(record, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


def _info(msg: str) -> None:
    print(msg, file=sys.stderr)


# -- shared pipeline steps -------------------------------------------------


def _load_table(cfg: RunConfig) -> EmbeddingTable:
    path = require_file(cfg.embeddings_path, "embeddings file")
    table, stats = load_embeddings(path, cfg.embeddings_format, limit=cfg.embeddings_limit)
    _info(
        f"loaded {len(table)} words (D={table.dimension}) from {path.name}: "
        f"{stats.rows_read} rows, {stats.rows_skipped} skipped, {stats.duplicates} duplicates"
    )
    return table


def _seed_sets(cfg: RunConfig) -> list[SeedSet]:
    if not cfg.seeds:
        raise ConfigError("no seeds configured")
    out = []
    for spec in cfg.seeds:
        out.append(_seed_set(spec))
    return out


def _seed_set(spec: SeedSpec) -> SeedSet:
    if spec.path is not None:
        require_file(spec.path, f"seed file for {spec.concept!r}")
        return load_seeds_csv(spec.path, spec.concept, spec.positive_label, spec.negative_label)
    require_file(spec.positive_path, f"positive seed file for {spec.concept!r}")
    require_file(spec.negative_path, f"negative seed file for {spec.concept!r}")
    return load_seed_lists(
        spec.positive_path, spec.negative_path, spec.concept, spec.positive_label, spec.negative_label
    )


def _seed_inputs(spec: SeedSpec) -> list[Path]:
    return [p for p in (spec.path, spec.positive_path, spec.negative_path) if p is not None]


def _read_labels(path: Path, column: str) -> dict[str, str]:
    with open(path, encoding="utf-8-sig", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "doc_id" not in reader.fieldnames or column not in reader.fieldnames:
            raise SeedlexError(f"{path}: needs columns doc_id and {column!r}, got {reader.fieldnames}")
        return {row["doc_id"].strip(): (row[column] or "").strip() for row in reader}


# -- commands --------------------------------------------------------------


def cmd_build(cfg: RunConfig) -> list[Path]:
    require_file(cfg.embeddings_path, "embeddings file")
    seed_sets = _seed_sets(cfg)
    table = _load_table(cfg)
    candidates = filter_vocabulary(table, cfg.filter)
    _info(f"{len(candidates)} candidate words after filtering")
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for spec, seeds in zip(cfg.seeds, seed_sets):
        pos, neg = cfg.size_for(spec)
        lex = build_lexicon(seeds, candidates, table, pos, neg, pole_mean=cfg.pole_mean, workers=cfg.workers)
        out = export_csv(lex, cfg.output_dir / f"{seeds.concept}.csv")
        _write_provenance(
            out,
            "build",
            [cfg.embeddings_path, *_seed_inputs(spec)],
            embedding_format=cfg.embeddings_format,
            lexicon=dict(lex.provenance),
        )
        _info(f"wrote {out} ({len(lex)} entries)")
        written.append(out)
    return written


def cmd_score(cfg: RunConfig) -> list[Path]:
    corpus_path = require_file(cfg.corpus_path, "corpus")
    lex_paths = [require_file(p, "lexicon") for p in cfg.lexicon_paths()]
    if not lex_paths:
        raise ConfigError("no lexicons to score with")
    lexicons = [import_csv(p) for p in lex_paths]
    docs = read_corpus(corpus_path)
    per_lex = [score_corpus(docs, lex, cfg.mode, cfg.normalize, cfg.workers) for lex in lexicons]
    rows = [per_lex[j][i] for i in range(len(docs)) for j in range(len(lexicons))]

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    out = cfg.output_dir / "scores.csv"
    write_scores(rows, out)
    params = {"mode": cfg.mode, "normalize": cfg.normalize}
    _write_provenance(out, "score", [corpus_path, *lex_paths], **params)
    written = [out]

    if len(lexicons) > 1:
        frames = {lex.concept: lex for lex in lexicons}
        names = list(frames)
        preds = [predict_frame(d, frames) for d in docs]
        fout = _write_csv(
            cfg.output_dir / "frames.csv",
            ["doc_id", "predicted_frame", "tie", *names],
            ([p.doc_id, p.predicted_frame, p.tie, *(p.sums[n] for n in names)] for p in preds),
        )
        _write_provenance(fout, "score", [corpus_path, *lex_paths])
        written.append(fout)

    if cfg.top_words:
        arows = []
        for d in docs:
            for lex in lexicons:
                for a in attribute_matches(d, lex, cfg.top_words, cfg.mode):
                    arows.append([d.doc_id, lex.concept, a.word, format_valence(a.valence), a.count, a.contribution])
        aout = _write_csv(
            cfg.output_dir / "attributions.csv",
            ["doc_id", "concept", "word", "valence", "count", "contribution"],
            arows,
        )
        _write_provenance(aout, "score", [corpus_path, *lex_paths], top_words=cfg.top_words, **params)
        written.append(aout)
    _info(f"scored {len(docs)} documents with {len(lexicons)} lexicon(s)")
    return written


def _eval_pairs(cfg: RunConfig, pred_path: Path, pred_col: str):
    """Yield ``(group, [(doc_id, truth, prediction)], n_dropped)`` per lexicon."""
    labels = _read_labels(cfg.labels_path, cfg.truth_column) if cfg.labels_path else None
    groups: dict[str, list] = {}
    dropped: dict[str, int] = {}
    seen: dict[str, set] = {}
    with open(pred_path, encoding="utf-8-sig", newline="") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if "doc_id" not in fields or pred_col not in fields:
            raise SeedlexError(f"{pred_path}: needs columns doc_id and {pred_col!r}, got {fields}")
        if labels is None and cfg.truth_column not in fields:
            raise SeedlexError(f"{pred_path}: no truth column {cfg.truth_column!r} and no labels file")
        default_group = cfg.test_name or pred_path.stem if "concept" not in fields else None
        for row in reader:
            group = row["concept"] if default_group is None else default_group
            doc_id = row["doc_id"].strip()
            truth = labels.get(doc_id, "") if labels is not None else (row[cfg.truth_column] or "").strip()
            pred = (row[pred_col] or "").strip()
            groups.setdefault(group, [])
            seen.setdefault(group, set()).add(doc_id)
            if truth == "" or pred == "":
                dropped[group] = dropped.get(group, 0) + 1
                continue
            groups[group].append((doc_id, truth, pred))
    for group, pairs in groups.items():
        extra = sum(1 for d in labels if d not in seen[group]) if labels is not None else 0
        yield group, pairs, dropped.get(group, 0) + extra


def _as_float(value: str, what: str, doc_id: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise SeedlexError(f"doc {doc_id}: {what} {value!r} is not numeric") from None


def cmd_eval(cfg: RunConfig) -> list[Path]:
    task = cfg.task
    if task is None:
        raise ConfigError(f"no evaluation task given; expected one of {TASKS}")
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}; expected one of {TASKS}")
    if cfg.labels_path is not None:
        require_file(cfg.labels_path, "labels file")
    default_pred = cfg.output_dir / ("frames.csv" if task == "frames" else "scores.csv")
    pred_path = require_file(cfg.predictions_path or default_pred, "predictions file")
    pred_col = cfg.prediction_column or ("predicted_frame" if task == "frames" else "score")
    test = cfg.test_name or task

    rows = []
    cm_rows = []
    for group, pairs, n_dropped in _eval_pairs(cfg, pred_path, pred_col):
        ids = [p[0] for p in pairs]
        if task == "regression":
            x = [_as_float(p[2], "prediction", p[0]) for p in pairs]
            y = [_as_float(p[1], "truth", p[0]) for p in pairs]
            rep = ols_fit(x, y)
            metrics = [
                ("slope", rep.slope), ("intercept", rep.intercept), ("r_squared", rep.r_squared),
                ("adj_r_squared", rep.adj_r_squared), ("rmse", rep.rmse),
                ("n_valid", rep.n_valid), ("n_dropped", n_dropped + rep.n_dropped),
            ]
        else:
            truth = [p[1] for p in pairs]
            if task == "classification":
                x = [_as_float(p[2], "prediction", i) for i, p in zip(ids, pairs)]
                fit = logistic_fit_accuracy(
                    x, truth, cfg.logistic_iterations, cfg.logistic_learning_rate,
                    test_fraction=cfg.test_fraction, rng_seed=cfg.seed,
                )
                if fit.held_out:
                    x = [x[i] for i in fit.held_out]
                    truth = [truth[i] for i in fit.held_out]
                predicted = fit.predict(x)
                extra = [("converged", fit.converged), ("iterations", fit.iterations)]
            else:
                predicted = [p[2] for p in pairs]
                extra = []
            if not truth:
                raise SeedlexError(f"{group}: no documents with both truth and prediction")
            cm = confusion(truth, predicted)
            rep = classification_metrics(cm, cfg.classes)
            metrics = [("accuracy", rep.accuracy), ("macro_f1", rep.macro_f1), ("micro_f1", rep.micro_f1)]
            metrics += [(f"f1:{lab}", rep.f1[lab]) for lab in sorted(rep.f1, key=str)]
            metrics += extra + [("n_valid", rep.n), ("n_dropped", n_dropped)]
            for i, t in enumerate(cm.labels):
                for j, p in enumerate(cm.labels):
                    cm_rows.append([group, t, p, int(cm.counts[i, j])])
        rows += [[group, name, value, test] for name, value in metrics]

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    inputs = [pred_path] + ([cfg.labels_path] if cfg.labels_path else [])
    out = _write_csv(cfg.output_dir / f"eval_{task}.csv", REPORT_COLUMNS, rows)
    _write_provenance(out, "eval", inputs, task=task, truth_column=cfg.truth_column, prediction_column=pred_col)
    written = [out]
    if cm_rows:
        cm_out = _write_csv(cfg.output_dir / f"confusion_{task}.csv", ["lexicon", "truth", "predicted", "count"], cm_rows)
        _write_provenance(cm_out, "eval", inputs, task=task)
        written.append(cm_out)
    for r in rows:
        _info(f"{r[0]:>16}  {r[1]:<16} {_fmt(r[2])}")
    return written


def cmd_compare(cfg: RunConfig) -> list[Path]:
    a_path = cfg.compare_a
    if a_path is None and cfg.seeds:
        a_path = cfg.output_dir / f"{cfg.seeds[0].concept}.csv"
    a_path = require_file(a_path, "lexicon A")
    b_path = require_file(cfg.compare_b, "lexicon B")
    a, b = import_csv(a_path), import_csv(b_path)
    rep = compare_lexicons(a, b, cfg.exclude_seeds)
    name = f"compare_{a.concept}_vs_{b.concept}"
    metrics = [
        ("n_words", rep.n_words), ("n_shared", rep.n_shared), ("overlap", rep.overlap),
        ("agreement", rep.agreement), ("slope", rep.slope), ("intercept", rep.intercept),
        ("r_squared", rep.r_squared),
    ]
    metrics += [(f"n_residual_gt_{t:g}", len(rep.exceeding(t))) for t in rep.thresholds]
    rows = [[a.concept, b.concept, m, "" if v is None else v] for m, v in metrics]
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    out = _write_csv(cfg.output_dir / f"{name}.csv", ["lexicon_a", "lexicon_b", "metric", "value"], rows)
    _write_provenance(out, "compare", [a_path, b_path], exclude_seeds=cfg.exclude_seeds)
    written = [out]
    if rep.residuals:
        res = sorted(rep.residuals.items(), key=lambda kv: (-abs(kv[1]), kv[0]))
        rout = _write_csv(
            cfg.output_dir / f"{name}_residuals.csv",
            ["word", "valence_a", "valence_b", "residual"],
            ([w, a.lookup[w].valence, b.lookup[w].valence, r] for w, r in res),
        )
        _write_provenance(rout, "compare", [a_path, b_path], exclude_seeds=cfg.exclude_seeds)
        written.append(rout)
    for m, v in metrics:
        _info(f"{m:<18} {_fmt('' if v is None else v)}")
    return written


def cmd_seed_experiment(cfg: RunConfig) -> list[Path]:
    task = cfg.task or ("frames" if len(cfg.seeds) > 1 else "classification")
    if task not in ("classification", "frames"):
        raise ConfigError(f"seed experiment needs task classification or frames, got {task!r}")
    require_file(cfg.embeddings_path, "embeddings file")
    corpus_path = require_file(cfg.corpus_path, "corpus")
    labels_path = require_file(cfg.labels_path, "labels file")
    seed_sets = _seed_sets(cfg)
    table = _load_table(cfg)
    candidates = filter_vocabulary(table, cfg.filter)
    docs = read_corpus(corpus_path)
    labels = _read_labels(labels_path, cfg.truth_column)
    labelled = [d for d in docs if labels.get(d.doc_id)]
    truth = [labels[d.doc_id] for d in labelled]
    sizes = {spec.concept: cfg.size_for(spec) for spec in cfg.seeds}

    def build_one(seeds: SeedSet) -> Lexicon:
        pos, neg = sizes[seeds.concept]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return build_lexicon(seeds, candidates, table, pos, neg, pole_mean=cfg.pole_mean)

    if task == "classification":
        full = seed_sets[0]

        def evaluate(lex: Lexicon) -> float:
            x = [s.score for s in score_corpus(labelled, lex, cfg.mode, cfg.normalize)]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                return logistic_fit_accuracy(
                    x, truth, cfg.logistic_iterations, cfg.logistic_learning_rate,
                    test_fraction=cfg.test_fraction, rng_seed=cfg.seed,
                ).accuracy

        build = build_one
    else:
        full = {s.concept: s for s in seed_sets}

        def build(sampled: dict) -> dict:
            return {name: build_one(s) for name, s in sampled.items()}

        def evaluate(frames: dict) -> float:
            pred = [predict_frame(d, frames).predicted_frame for d in labelled]
            return classification_metrics(confusion(truth, pred)).accuracy

    report = seed_sensitivity(full, cfg.ks, cfg.runs_per_k, build, evaluate, cfg.seed)

    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    inputs = [cfg.embeddings_path, corpus_path, labels_path, *(p for s in cfg.seeds for p in _seed_inputs(s))]
    params = {"task": task, "ks": cfg.ks, "runs_per_k": cfg.runs_per_k, "master_seed": cfg.seed}
    out = _write_csv(
        cfg.output_dir / "seed_experiment.csv",
        ["k", "run", "rng_seed", "accuracy", "error"],
        ([r.k, r.run, r.rng_seed, "" if r.accuracy is None else r.accuracy, r.error or ""] for r in report.runs),
    )
    _write_provenance(out, "seed-experiment", inputs, **params)
    summary = _write_csv(
        cfg.output_dir / "seed_experiment_summary.csv",
        ["k", "runs", "mean", "sd"],
        ([k, len(report.accuracies(k)), report.mean(k), report.sd(k)] for k in report.ks),
    )
    _write_provenance(summary, "seed-experiment", inputs, **params)
    for k in report.ks:
        _info(f"k={k:<4} mean={report.mean(k):.4f} sd={report.sd(k):.4f}")
    if report.failures():
        _info(f"{len(report.failures())} run(s) failed; see {out.name}")
    return [out, summary]


def cmd_inspect(path: Path, top: int, include_seeds: bool, out=None) -> None:
    """Print the most extreme words of each pole as a ``word,valence,seed,sentiment`` table."""
    out = out or sys.stdout
    lex = import_csv(require_file(path, "lexicon"))
    entries = [e for e in lex.entries if include_seeds or not e.seed]
    pos = [e for e in entries if e.valence > 0][:top]
    neg = [e for e in entries if e.valence < 0][-top:] if top else []
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["word", "valence", "seed", "sentiment"])
    for e in pos:
        writer.writerow([e.word, f"{e.valence:.3f}", int(e.seed), e.pole])
    out.write("(...)\n")
    for e in neg:
        writer.writerow([e.word, f"{e.valence:.3f}", int(e.seed), e.pole])


# -- argument parsing ------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON run configuration")
    common.add_argument("--output-dir", type=Path)
    common.add_argument("--workers", type=int)
    common.add_argument("--seed", type=int, help="master RNG seed")

    emb = argparse.ArgumentParser(add_help=False)
    emb.add_argument("--embeddings", type=Path, dest="embeddings_path")
    emb.add_argument("--format", choices=("glove-text", "fasttext-vec"), dest="embeddings_format")
    emb.add_argument("--limit", type=int, dest="embeddings_limit", help="read only the N most frequent words")
    emb.add_argument("--drop-top-ranks", type=int)
    emb.add_argument("--positive-size", type=int)
    emb.add_argument("--negative-size", type=int)

    scoring = argparse.ArgumentParser(add_help=False)
    scoring.add_argument("--corpus", type=Path, dest="corpus_path")
    scoring.add_argument("--mode", choices=("polarity", "valence"))
    scoring.add_argument("--normalize", choices=("matched", "tokens"))

    evalp = argparse.ArgumentParser(add_help=False)
    evalp.add_argument("--task", help="regression, classification or frames")
    evalp.add_argument("--labels", type=Path, dest="labels_path")
    evalp.add_argument("--truth-column")
    evalp.add_argument("--ks", type=lambda s: [int(v) for v in s.split(",")])
    evalp.add_argument("--runs", type=int, dest="runs_per_k")

    p = argparse.ArgumentParser(prog="seedlex", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"seedlex {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("build", parents=[common, emb], help="expand seed words into lexicon CSVs")

    s = sub.add_parser("score", parents=[common, scoring], help="score a corpus with lexicons")
    s.add_argument("--lexicon", type=Path, action="append", dest="lexicons")
    s.add_argument("--top-words", type=int, help="also write the N strongest matched words per document")

    e = sub.add_parser("eval", parents=[common, evalp], help="evaluate scores against labels")
    e.add_argument("--predictions", type=Path, dest="predictions_path")
    e.add_argument("--prediction-column")
    e.add_argument("--test", dest="test_name")

    c = sub.add_parser("compare", parents=[common], help="compare two lexicons")
    c.add_argument("a", type=Path, nargs="?")
    c.add_argument("b", type=Path, nargs="?")
    c.add_argument("--include-seeds", action="store_true")

    sub.add_parser(
        "seed-experiment", parents=[common, emb, scoring, evalp],
        help="accuracy spread over random seed subsets",
    )

    i = sub.add_parser("inspect", help="show the extreme words of a lexicon")
    i.add_argument("lexicon", type=Path)
    i.add_argument("-k", "--top", type=int, default=10)
    i.add_argument("--include-seeds", action="store_true")
    return p


_OVERRIDES = (
    "output_dir", "workers", "seed", "embeddings_path", "embeddings_format", "embeddings_limit",
    "positive_size", "negative_size", "corpus_path", "mode", "normalize", "lexicons", "top_words",
    "task", "labels_path", "truth_column", "ks", "runs_per_k", "predictions_path",
    "prediction_column", "test_name",
)


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    for name in _OVERRIDES:
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "drop_top_ranks", None) is not None:
        try:
            cfg.filter = replace(cfg.filter, drop_top_ranks=args.drop_top_ranks)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if getattr(args, "a", None) is not None:
        cfg.compare_a = args.a
    if getattr(args, "b", None) is not None:
        cfg.compare_b = args.b
    if getattr(args, "include_seeds", False):
        cfg.exclude_seeds = False
    validate(cfg)
    return cfg


def _show_warning(message, category, filename, lineno, file=None, line=None):
    print(f"warning: {message}", file=sys.stderr)


COMMANDS = {
    "build": cmd_build,
    "score": cmd_score,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "seed-experiment": cmd_seed_experiment,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    previous = warnings.showwarning
    warnings.showwarning = _show_warning
    try:
        if args.command == "inspect":
            cmd_inspect(args.lexicon, args.top, args.include_seeds)
            return 0
        cfg = _resolve_config(args)
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"seedlex {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (SeedlexError, ValueError, KeyError, OSError) as exc:
        print(f"seedlex {args.command}: error: {exc}", file=sys.stderr)
        return 1
    finally:
        warnings.showwarning = previous
    return 0


if __name__ == "__main__":
    sys.exit(main())
