"""Classification and regression metrics, logistic accuracy and seed-count experiments."""

from __future__ import annotations

import math
import statistics
import warnings
from collections.abc import Callable, Hashable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .lexicon import SeedSet, sample_seeds


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts indexed ``[truth, predicted]`` over ``labels``."""

    labels: tuple
    counts: NDArray[np.int64]

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def count(self, truth, predicted) -> int:
        return int(self.counts[self.labels.index(truth), self.labels.index(predicted)])


def confusion(truth: Sequence[Hashable], predicted: Sequence[Hashable], labels: Sequence | None = None) -> ConfusionMatrix:
    """Tally (truth, predicted) pairs.

    ``labels`` fixes the row/column order; by default it is the sorted union
    of observed labels. Explicit labels must cover every observed one.
    """
    if len(truth) != len(predicted):
        raise ValueError(f"length mismatch: {len(truth)} truths vs {len(predicted)} predictions")
    if not truth:
        raise ValueError("no observations")
    observed = set(truth) | set(predicted)
    if labels is None:
        labels = sorted(observed, key=str)
    else:
        labels = list(dict.fromkeys(labels))
        missing = observed - set(labels)
        if missing:
            raise ValueError(f"labels missing observed classes: {sorted(missing, key=str)}")
    pos = {lab: i for i, lab in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(truth, predicted):
        counts[pos[t], pos[p]] += 1
    return ConfusionMatrix(tuple(labels), counts)


@dataclass(frozen=True)
class ClassificationReport:
    accuracy: float
    precision: dict
    recall: dict
    f1: dict
    macro_f1: float
    micro_f1: float
    n: int


def _ratio(num: float, den: float) -> float:
    return float(num) / float(den) if den else 0.0


def classification_metrics(cm: ConfusionMatrix, classes: Sequence | None = None) -> ClassificationReport:
    """Accuracy plus per-class precision, recall and F1.

    Zero denominators give 0. ``macro_f1`` is the plain mean of per-class F1
    over ``classes`` (all matrix labels by default); ``micro_f1`` pools counts
    over the same classes.
    """
    if cm.n < 1:
        raise ValueError("empty confusion matrix")
    counts = cm.counts
    tp = np.diag(counts)
    col = counts.sum(axis=0)
    row = counts.sum(axis=1)
    precision, recall, f1 = {}, {}, {}
    for i, lab in enumerate(cm.labels):
        p = _ratio(tp[i], col[i])
        r = _ratio(tp[i], row[i])
        precision[lab] = p
        recall[lab] = r
        f1[lab] = _ratio(2 * p * r, p + r)
    classes = list(cm.labels) if classes is None else list(classes)
    for c in classes:
        f1.setdefault(c, 0.0)
    macro = sum(f1[c] for c in classes) / len(classes)
    idx = [cm.labels.index(c) for c in classes if c in cm.labels]
    tp_sum = int(tp[idx].sum())
    micro_p = _ratio(tp_sum, int(col[idx].sum()))
    micro_r = _ratio(tp_sum, int(row[idx].sum()))
    micro = _ratio(2 * micro_p * micro_r, micro_p + micro_r)
    return ClassificationReport(
        accuracy=int(tp.sum()) / cm.n,
        precision=precision,
        recall=recall,
        f1=f1,
        macro_f1=macro,
        micro_f1=micro,
        n=cm.n,
    )


@dataclass(frozen=True)
class RegressionReport:
    slope: float
    intercept: float
    r_squared: float
    adj_r_squared: float
    rmse: float
    n_valid: int
    n_dropped: int = 0
    residuals: NDArray[np.float64] = field(default=None, repr=False, compare=False)


def _finite_pairs(x, y) -> tuple[NDArray, NDArray, int]:
    x = np.asarray([np.nan if v is None else v for v in x], dtype=np.float64)
    y = np.asarray([np.nan if v is None else v for v in y], dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.shape[0]} vs {y.shape[0]}")
    keep = np.isfinite(x) & np.isfinite(y)
    return x[keep], y[keep], int((~keep).sum())


def ols_fit(x: Sequence[float], y: Sequence[float]) -> RegressionReport:
    """Least-squares line of ``y`` on one predictor ``x``.

    Pairs with a missing (None/NaN) value are dropped and counted. RMSE is
    taken over the fitted values with the valid-case count as divisor;
    adjusted R-squared uses one predictor. R-squared is NaN when ``y`` is
    constant.
    """
    x, y, dropped = _finite_pairs(x, y)
    n = x.shape[0]
    if n < 3:
        raise ValueError(f"need at least 3 valid pairs, got {n}")
    xbar, ybar = x.mean(), y.mean()
    dx = x - xbar
    sxx = float(np.sum(dx * dx))
    if sxx == 0.0:
        raise ValueError("predictor has zero variance")
    slope = float(np.sum(dx * (y - ybar))) / sxx
    intercept = float(ybar - slope * xbar)
    resid = y - (intercept + slope * x)
    ssr = float(np.sum(resid * resid))
    sst = float(np.sum((y - ybar) ** 2))
    r2 = 1.0 - ssr / sst if sst > 0 else float("nan")
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - 2)
    return RegressionReport(slope, intercept, r2, adj, math.sqrt(ssr / n), n, dropped, resid)


# -- multinomial logistic ------------------------------------------------------


@dataclass(frozen=True)
class LogisticFit:
    """Single-feature multinomial logistic model, first class as reference.

    ``intercepts`` and ``slopes`` are on the original ``x`` scale, one per
    class, with the reference class pinned at 0. ``held_out`` lists the
    input positions used for ``accuracy`` when a hold-out split was asked for.
    """

    classes: tuple
    intercepts: NDArray[np.float64]
    slopes: NDArray[np.float64]
    accuracy: float
    converged: bool
    iterations: int
    grad_norm: float
    held_out: tuple[int, ...] = ()

    def predict(self, x: Sequence[float]) -> list:
        eta = self.intercepts[None, :] + np.outer(np.asarray(x, dtype=np.float64), self.slopes)
        return [self.classes[i] for i in np.argmax(eta, axis=1)]


def _softmax(eta: NDArray) -> NDArray:
    eta = eta - eta.max(axis=1, keepdims=True)
    e = np.exp(eta)
    return e / e.sum(axis=1, keepdims=True)


def logistic_mean_loglik(params: NDArray, x: NDArray, y_idx: NDArray) -> float:
    """Mean log-likelihood. ``params`` is ``(K-1, 2)``: intercept, slope per
    non-reference class."""
    params = np.asarray(params, dtype=np.float64).reshape(-1, 2)
    eta = np.zeros((x.shape[0], params.shape[0] + 1))
    eta[:, 1:] = params[:, 0] + np.outer(x, params[:, 1])
    m = eta.max(axis=1, keepdims=True)
    lse = (m + np.log(np.exp(eta - m).sum(axis=1, keepdims=True)))[:, 0]
    return float(np.mean(eta[np.arange(x.shape[0]), y_idx] - lse))


def logistic_gradient(params: NDArray, x: NDArray, y_idx: NDArray) -> NDArray:
    """Analytic gradient of :func:`logistic_mean_loglik`, same shape as ``params``."""
    params = np.asarray(params, dtype=np.float64).reshape(-1, 2)
    n = x.shape[0]
    eta = np.zeros((n, params.shape[0] + 1))
    eta[:, 1:] = params[:, 0] + np.outer(x, params[:, 1])
    resid = -_softmax(eta)
    resid[np.arange(n), y_idx] += 1.0
    resid = resid[:, 1:]
    return np.stack([resid.mean(axis=0), (resid * x[:, None]).mean(axis=0)], axis=1)


def logistic_fit_accuracy(
    x: Sequence[float],
    y: Sequence[Hashable],
    iterations: int = 20_000,
    learning_rate: float = 1.0,
    tol: float = 1e-8,
    *,
    test_fraction: float = 0.0,
    rng_seed: int = 0,
) -> LogisticFit:
    """Fit a one-predictor multinomial logistic model by full-batch gradient
    ascent and report its in-sample accuracy.

    The predictor is standardised while optimising; the stopping rule
    (max-norm of the gradient below ``tol``) and the returned coefficients
    refer to the original scale. Hitting ``iterations`` first emits a
    ``RuntimeWarning`` and sets ``converged=False``; separable data always
    ends this way.

    With ``test_fraction > 0`` a random hold-out (drawn with ``rng_seed``) is
    kept out of the fit and ``accuracy`` is measured on it instead.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != len(y):
        raise ValueError("x must be 1-D and as long as y")
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    classes = tuple(sorted(set(y), key=str))
    k = len(classes)
    if k < 2:
        raise ValueError("need at least two classes")
    if x.shape[0] < 3 * k:
        raise ValueError(f"need at least {3 * k} observations for {k} classes")
    y_idx = np.array([classes.index(v) for v in y])
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError("test_fraction must be in [0, 1)")
    x_eval, y_eval = x, y_idx
    held_out: tuple[int, ...] = ()
    if test_fraction > 0.0:
        order = np.random.default_rng(rng_seed).permutation(x.shape[0])
        n_test = max(1, round(test_fraction * x.shape[0]))
        test, train = np.sort(order[:n_test]), order[n_test:]
        held_out = tuple(int(i) for i in test)
        if train.shape[0] < 3 * k:
            raise ValueError(f"need at least {3 * k} training observations for {k} classes")
        x_eval, y_eval = x[test], y_idx[test]
        x, y_idx = x[train], y_idx[train]

    mu = float(x.mean())
    sd = float(x.std())
    if sd == 0.0:
        sd = 1.0
    z = (x - mu) / sd
    theta = np.zeros((k - 1, 2))

    def to_original(t):
        return np.stack([t[:, 0] - t[:, 1] * mu / sd, t[:, 1] / sd], axis=1)

    design = np.column_stack([np.ones_like(z), z])
    onehot = np.zeros((z.shape[0], k))
    onehot[np.arange(z.shape[0]), y_idx] = 1.0
    onehot = onehot[:, 1:]
    n = z.shape[0]
    eta = np.zeros((n, k))

    converged = False
    it = 0
    grad_norm = math.inf
    for it in range(1, iterations + 1):
        eta[:, 1:] = design @ theta.T
        p = np.exp(eta - eta.max(axis=1, keepdims=True))
        p /= p.sum(axis=1, keepdims=True)
        g = (onehot - p[:, 1:]).T @ design / n
        # chain rule back to the original scale: d/dslope = mu * g_a + sd * g_b
        grad_norm = max(float(np.abs(g[:, 0]).max()), float(np.abs(mu * g[:, 0] + sd * g[:, 1]).max()))
        if grad_norm < tol:
            converged = True
            break
        theta += learning_rate * g
    if not converged:
        warnings.warn(
            f"logistic fit stopped at the iteration cap ({iterations}); gradient max-norm {grad_norm:.3g}",
            RuntimeWarning,
            stacklevel=2,
        )

    orig = to_original(theta)
    intercepts = np.concatenate([[0.0], orig[:, 0]])
    slopes = np.concatenate([[0.0], orig[:, 1]])
    eta = intercepts[None, :] + np.outer(x_eval, slopes)
    accuracy = float(np.mean(np.argmax(eta, axis=1) == y_eval))
    return LogisticFit(classes, intercepts, slopes, accuracy, converged, it, grad_norm, held_out)


# -- seed-count sensitivity ------------------------------------------------


@dataclass(frozen=True)
class SeedRun:
    k: int
    run: int
    rng_seed: int
    accuracy: float | None
    error: str | None = None


@dataclass(frozen=True)
class SeedSensitivityReport:
    runs: tuple[SeedRun, ...]

    @property
    def ks(self) -> list[int]:
        return list(dict.fromkeys(r.k for r in self.runs))

    def accuracies(self, k: int) -> list[float]:
        return [r.accuracy for r in self.runs if r.k == k and r.accuracy is not None]

    def mean(self, k: int) -> float:
        acc = self.accuracies(k)
        return statistics.fmean(acc) if acc else float("nan")

    def sd(self, k: int) -> float:
        """Sample standard deviation (n - 1 divisor); NaN below two runs.

        Computed exactly, so identical accuracies give exactly 0.
        """
        acc = self.accuracies(k)
        return statistics.stdev(acc) if len(acc) >= 2 else float("nan")

    def failures(self) -> list[SeedRun]:
        return [r for r in self.runs if r.error is not None]


def run_seed(master_seed: int, k: int, run: int) -> int:
    """Per-run generator seed derived from the master seed."""
    return int(np.random.SeedSequence([master_seed, k, run]).generate_state(1, np.uint32)[0])


def _sample(full, k: int, rng_seed: int):
    if isinstance(full, SeedSet):
        return sample_seeds(full, k, rng_seed)
    return {name: sample_seeds(s, k, rng_seed + i) for i, (name, s) in enumerate(full.items())}


def seed_sensitivity(
    full_seeds: SeedSet | Mapping[str, SeedSet],
    ks: Sequence[int],
    runs_per_k: int,
    build_fn: Callable,
    eval_fn: Callable[..., float],
    master_seed: int = 0,
    workers: int = 1,
) -> SeedSensitivityReport:
    """Rebuild and evaluate lexicons from random seed subsets of each size in ``ks``.

    ``full_seeds`` may be one seed set or a mapping of them (one per frame), in
    which case every frame is subsampled to ``k`` per pole and ``build_fn``
    receives the mapping. A run whose build or evaluation raises is recorded
    with its error message and excluded from that size's mean and SD.
    """
    if runs_per_k < 2:
        raise ValueError("runs_per_k must be >= 2")
    sets = [full_seeds] if isinstance(full_seeds, SeedSet) else list(full_seeds.values())
    if not sets:
        raise ValueError("no seed sets given")
    limit = min(min(len(s.positive_seeds), len(s.negative_seeds)) for s in sets)
    for k in ks:
        if not 1 <= k <= limit:
            raise ValueError(f"seed count {k} outside 1..{limit}")

    jobs = [(k, r, run_seed(master_seed, k, r)) for k in ks for r in range(runs_per_k)]

    def one(job):
        k, r, s = job
        try:
            acc = float(eval_fn(build_fn(_sample(full_seeds, k, s))))
        except Exception as exc:  # noqa: BLE001 - recorded per run
            return SeedRun(k, r, s, None, f"{type(exc).__name__}: {exc}")
        return SeedRun(k, r, s, acc)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(one, jobs))
    else:
        runs = [one(j) for j in jobs]
    return SeedSensitivityReport(tuple(runs))
