"""JSON run configuration shared by the CLI subcommands.

Relative paths are resolved against the directory holding the config file.
Two environment variables override the file: ``SEEDLEX_OUTPUT_DIR`` and
``SEEDLEX_WORKERS``. Command-line flags override both.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .embeddings import FORMATS, VocabFilterConfig
from .errors import ConfigError
from .scoring import MODES, NORMALIZATIONS

TASKS = ("regression", "classification", "frames")

ENV_OUTPUT_DIR = "SEEDLEX_OUTPUT_DIR"
ENV_WORKERS = "SEEDLEX_WORKERS"


@dataclass
class SeedSpec:
    concept: str
    positive_label: str = "Positive"
    negative_label: str = "Negative"
    path: Path | None = None
    positive_path: Path | None = None
    negative_path: Path | None = None
    positive_size: int | None = None
    negative_size: int | None = None


@dataclass
class RunConfig:
    embeddings_path: Path | None = None
    embeddings_format: str = "glove-text"
    embeddings_limit: int | None = None
    filter: VocabFilterConfig = field(default_factory=VocabFilterConfig)
    seeds: list[SeedSpec] = field(default_factory=list)
    positive_size: int = 1000
    negative_size: int = 1000
    pole_mean: bool = False
    mode: str = "polarity"
    normalize: str = "matched"
    corpus_path: Path | None = None
    lexicons: list[Path] = field(default_factory=list)
    top_words: int | None = None
    task: str | None = None
    labels_path: Path | None = None
    predictions_path: Path | None = None
    truth_column: str = "truth"
    prediction_column: str | None = None
    test_name: str | None = None
    classes: list[str] | None = None
    logistic_iterations: int = 20_000
    logistic_learning_rate: float = 1.0
    test_fraction: float = 0.0
    compare_a: Path | None = None
    compare_b: Path | None = None
    exclude_seeds: bool = True
    ks: list[int] = field(default_factory=lambda: [5, 10, 25, 50, 75])
    runs_per_k: int = 6
    output_dir: Path = Path("out")
    seed: int = 0
    workers: int = 1

    def size_for(self, spec: SeedSpec) -> tuple[int, int]:
        pos = spec.positive_size if spec.positive_size is not None else self.positive_size
        neg = spec.negative_size if spec.negative_size is not None else self.negative_size
        return pos, neg

    def lexicon_paths(self) -> list[Path]:
        """Explicit lexicons, or the ones ``build`` writes for each seed spec."""
        if self.lexicons:
            return list(self.lexicons)
        return [self.output_dir / f"{s.concept}.csv" for s in self.seeds]


def _path(base: Path, value) -> Path | None:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    return sec


def _known(sec: dict, name: str, allowed: set[str]) -> None:
    extra = set(sec) - allowed
    if extra:
        raise ConfigError(f"unknown key(s) in {name!r}: {', '.join(sorted(extra))}")


def load_config(path: str | Path | None) -> RunConfig:
    """Parse a config file (or return defaults for ``None``) and apply env overrides."""
    cfg = RunConfig()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
        _apply(cfg, raw, path.resolve().parent)
    if os.environ.get(ENV_OUTPUT_DIR):
        cfg.output_dir = Path(os.environ[ENV_OUTPUT_DIR])
    if os.environ.get(ENV_WORKERS):
        try:
            cfg.workers = int(os.environ[ENV_WORKERS])
        except ValueError:
            raise ConfigError(f"{ENV_WORKERS} must be an integer") from None
    return cfg


def _apply(cfg: RunConfig, raw: dict, base: Path) -> None:
    _known(raw, "config", {
        "embeddings", "filter", "seeds", "sizes", "scoring", "evaluation",
        "compare", "seed_experiment", "output_dir", "seed", "workers",
    })
    emb = _section(raw, "embeddings")
    _known(emb, "embeddings", {"path", "format", "limit"})
    cfg.embeddings_path = _path(base, emb.get("path"))
    cfg.embeddings_format = emb.get("format", cfg.embeddings_format)
    cfg.embeddings_limit = emb.get("limit")

    flt = dict(_section(raw, "filter"))
    _known(flt, "filter", {"drop_top_ranks", "min_word_length", "allowlist_path", "blocklist_path", "alpha_only"})
    for key in ("allowlist_path", "blocklist_path"):
        if flt.get(key) is not None:
            flt[key] = str(_path(base, flt[key]))
    try:
        cfg.filter = VocabFilterConfig(**flt)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"filter: {exc}") from None

    seeds = raw.get("seeds", [])
    if isinstance(seeds, dict):
        seeds = [seeds]
    cfg.seeds = []
    for i, s in enumerate(seeds):
        _known(s, f"seeds[{i}]", {
            "concept", "positive_label", "negative_label", "path",
            "positive_path", "negative_path", "positive_size", "negative_size",
        })
        if "concept" not in s:
            raise ConfigError(f"seeds[{i}]: missing 'concept'")
        spec = SeedSpec(
            concept=s["concept"],
            positive_label=s.get("positive_label", "Positive"),
            negative_label=s.get("negative_label", "Negative"),
            path=_path(base, s.get("path")),
            positive_path=_path(base, s.get("positive_path")),
            negative_path=_path(base, s.get("negative_path")),
            positive_size=s.get("positive_size"),
            negative_size=s.get("negative_size"),
        )
        if spec.path is None and (spec.positive_path is None or spec.negative_path is None):
            raise ConfigError(f"seeds[{i}]: give 'path' or both 'positive_path' and 'negative_path'")
        cfg.seeds.append(spec)

    sizes = _section(raw, "sizes")
    _known(sizes, "sizes", {"positive_size", "negative_size", "pole_mean"})
    cfg.positive_size = sizes.get("positive_size", cfg.positive_size)
    cfg.negative_size = sizes.get("negative_size", cfg.negative_size)
    cfg.pole_mean = sizes.get("pole_mean", cfg.pole_mean)

    sc = _section(raw, "scoring")
    _known(sc, "scoring", {"mode", "normalize", "corpus_path", "lexicons", "top_words"})
    cfg.mode = sc.get("mode", cfg.mode)
    cfg.normalize = sc.get("normalize", cfg.normalize)
    cfg.corpus_path = _path(base, sc.get("corpus_path"))
    cfg.lexicons = [_path(base, p) for p in sc.get("lexicons", [])]
    cfg.top_words = sc.get("top_words")

    ev = _section(raw, "evaluation")
    _known(ev, "evaluation", {
        "task", "labels_path", "predictions_path", "truth_column",
        "prediction_column", "test", "classes", "iterations", "learning_rate",
        "test_fraction",
    })
    cfg.task = ev.get("task")
    cfg.labels_path = _path(base, ev.get("labels_path"))
    cfg.predictions_path = _path(base, ev.get("predictions_path"))
    cfg.truth_column = ev.get("truth_column", cfg.truth_column)
    cfg.prediction_column = ev.get("prediction_column")
    cfg.test_name = ev.get("test")
    cfg.classes = ev.get("classes")
    cfg.logistic_iterations = ev.get("iterations", cfg.logistic_iterations)
    cfg.logistic_learning_rate = ev.get("learning_rate", cfg.logistic_learning_rate)
    cfg.test_fraction = ev.get("test_fraction", cfg.test_fraction)

    cmp_ = _section(raw, "compare")
    _known(cmp_, "compare", {"a", "b", "exclude_seeds"})
    cfg.compare_a = _path(base, cmp_.get("a"))
    cfg.compare_b = _path(base, cmp_.get("b"))
    cfg.exclude_seeds = cmp_.get("exclude_seeds", True)

    se = _section(raw, "seed_experiment")
    _known(se, "seed_experiment", {"ks", "runs_per_k"})
    cfg.ks = list(se.get("ks", cfg.ks))
    cfg.runs_per_k = se.get("runs_per_k", cfg.runs_per_k)

    # outputs land relative to the working directory, never beside a bundled config
    cfg.output_dir = Path(raw.get("output_dir", "out"))
    cfg.seed = raw.get("seed", cfg.seed)
    cfg.workers = raw.get("workers", cfg.workers)


def require_file(path: Path | None, what: str) -> Path:
    if path is None:
        raise ConfigError(f"no {what} configured")
    if not Path(path).is_file():
        raise ConfigError(f"{what} not found: {path}")
    return Path(path)


def validate(cfg: RunConfig) -> None:
    """Value checks that do not depend on which command runs."""
    if cfg.embeddings_format not in FORMATS:
        raise ConfigError(f"embeddings.format must be one of {FORMATS}")
    if cfg.mode not in MODES:
        raise ConfigError(f"scoring.mode must be one of {MODES}")
    if cfg.normalize not in NORMALIZATIONS:
        raise ConfigError(f"scoring.normalize must be one of {NORMALIZATIONS}")
    if cfg.task is not None and cfg.task not in TASKS:
        raise ConfigError(f"unknown task {cfg.task!r}; expected one of {TASKS}")
    if cfg.positive_size < 0 or cfg.negative_size < 0:
        raise ConfigError("pole sizes must be >= 0")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.runs_per_k < 2:
        raise ConfigError("seed_experiment.runs_per_k must be >= 2")
    if cfg.logistic_iterations < 1 or cfg.logistic_learning_rate <= 0:
        raise ConfigError("evaluation.iterations must be >= 1 and learning_rate > 0")
    if not 0.0 <= cfg.test_fraction < 1.0:
        raise ConfigError("evaluation.test_fraction must be in [0, 1)")
    if cfg.top_words is not None and cfg.top_words < 1:
        raise ConfigError("top_words must be >= 1")
