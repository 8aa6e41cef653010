"""Cross-validation benchmark harness: error curves, averages and paired t-tests.

Protocol: stratified 10-fold CV (leave-one-out below 100 samples), feature
selection on the training fold only, k-NN evaluation on the held-out fold
using the top-m ranked features for every m in the feature-count grid.
"""

import csv
import io
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from .baselines import BaselineKind, baseline_select
from .vmi import QDistKind, VmiConfig, select

logger = logging.getLogger(__name__)

DEFAULT_FEATURE_COUNTS = tuple(range(10, 101, 10))
LOO_THRESHOLD = 100
T_CLAMP = sys.float_info.max


class BenchError(ValueError):
    pass


# -- classifier --------------------------------------------------------------

def _distances(train_X, query_X, categorical):
    """Hamming over categorical columns plus squared difference over continuous."""
    d = np.zeros((query_X.shape[0], train_X.shape[0]))
    cat = np.flatnonzero(categorical)
    con = np.flatnonzero(~categorical)
    if cat.size:
        d += (query_X[:, None, cat] != train_X[None, :, cat]).sum(axis=2)
    if con.size:
        diff = query_X[:, None, con] - train_X[None, :, con]
        d += (diff * diff).sum(axis=2)
    return d


def knn_predict(train, query, k=3, features=None, chunk=256):
    """Majority vote of the k nearest training rows.

    ``query`` is an array of rows laid out like ``train`` restricted to
    ``features``.  Distance ties go to the smaller training row index and vote
    ties to the smaller class code.
    """
    if k < 1:
        raise BenchError("k must be >= 1")
    if train.n_samples == 0:
        raise BenchError("empty training set")
    if k > train.n_samples:
        raise BenchError(f"k={k} exceeds the {train.n_samples} training rows")
    features = list(range(train.n_features)) if features is None else list(features)
    categorical = np.array([train.is_categorical(i) for i in features], dtype=bool)
    train_X = train.matrix(features).astype(np.float64)
    query = np.asarray(query, dtype=np.float64)
    if query.ndim == 1:
        query = query[None, :]
    out = np.empty(query.shape[0], dtype=np.int64)
    for a in range(0, query.shape[0], chunk):
        d = _distances(train_X, query[a:a + chunk], categorical)
        nearest = np.argsort(d, axis=1, kind="stable")[:, :k]
        votes = train.labels[nearest]
        for r, v in enumerate(votes):
            out[a + r] = int(np.argmax(np.bincount(v, minlength=train.n_classes)))
    return out


# -- folds -------------------------------------------------------------------

def stratified_folds(labels, n_folds, seed):
    """Fold id per sample: each class shuffled, then dealt round-robin.

    The dealing position carries over between classes so fold sizes stay
    within one sample of each other.
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    folds = np.empty(labels.shape[0], dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        folds[idx] = (offset + np.arange(idx.size)) % n_folds
        offset = (offset + idx.size) % n_folds
    return folds


def n_folds_for(n_samples):
    return 10 if n_samples >= LOO_THRESHOLD else n_samples


def fold_views(ds, folds, f):
    """(train, test) row-restricted datasets for fold ``f``."""
    train_rows = np.flatnonzero(folds != f)
    test_rows = np.flatnonzero(folds == f)
    return ds.subset(train_rows), ds.subset(test_rows)


# -- selectors ---------------------------------------------------------------

VMI_METHODS = {"vmi-naive": QDistKind.NAIVE, "vmi-pairwise": QDistKind.PAIRWISE}
BASELINE_METHODS = {k.value: k for k in BaselineKind}
METHODS = tuple(VMI_METHODS) + tuple(BASELINE_METHODS)


def make_selector(method, alpha=0.1, seed=0):
    """Return ``f(train_ds, T) -> ranked feature indices`` for a method name.

    ``"random"`` is a fixed seeded permutation (the same for every fold).
    """
    if callable(method):
        return method
    if method in VMI_METHODS:
        kind = VMI_METHODS[method]
        cfg = VmiConfig(alpha=alpha)
        return lambda train, T: select(train, kind, T, cfg).ranked
    if method in BASELINE_METHODS:
        kind = BASELINE_METHODS[method]
        return lambda train, T: baseline_select(kind, train, T).ranked
    if method == "random":
        def pick(train, T):
            return [int(i) for i in np.random.default_rng(seed).permutation(train.n_features)[:T]]
        return pick
    raise BenchError(f"unknown method {method!r}")


# -- cross-validation ----------------------------------------------------------

@dataclass
class MethodCurve:
    method: str
    feature_counts: list
    mean_error: list
    std_error: list
    fold_errors: list  # per feature count, one error rate per fold
    average: float


@dataclass
class TTestResult:
    t: float
    p: float
    verdict: str  # "significant" or "tie"
    better: object = None  # "a", "b" or None (lower error is better)


@dataclass
class BenchReport:
    seed: int
    n_folds: int
    k: int
    folds: list
    curves: dict = field(default_factory=dict)
    ttests: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "config": dict(self.config),
            "seed": self.seed,
            "n_folds": self.n_folds,
            "k": self.k,
            "folds": list(self.folds),
            "methods": {name: asdict(c) for name, c in self.curves.items()},
            "ttests": list(self.ttests),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "m", "mean_error", "std"])
        for name, c in self.curves.items():
            for m, e, s in zip(c.feature_counts, c.mean_error, c.std_error):
                w.writerow([name, m, repr(float(e)), repr(float(s))])
        return buf.getvalue()


def _check_folds(ds, folds, n_folds):
    present = np.flatnonzero(np.bincount(ds.labels, minlength=ds.n_classes))
    for f in range(n_folds):
        train_labels = ds.labels[folds != f]
        missing = np.setdiff1d(present, np.unique(train_labels))
        if missing.size:
            raise BenchError(
                f"class(es) {missing.tolist()} absent from training fold {f}; "
                "re-stratify or merge rare classes")


def _resolve_counts(feature_counts, D):
    if feature_counts is None:
        counts = [m for m in DEFAULT_FEATURE_COUNTS if m <= D] or [D]
    else:
        counts = sorted(set(int(m) for m in feature_counts))
    if not counts or counts[0] < 1 or counts[-1] > D:
        raise BenchError(f"feature counts must lie in [1, {D}]")
    return counts


def cross_validate(ds, method, feature_counts=None, seed=0, k=3, workers=1,
                   alpha=0.1, folds=None):
    """Error curve of one method; selection only ever sees training rows."""
    counts = _resolve_counts(feature_counts, ds.n_features)
    n_folds = n_folds_for(ds.n_samples)
    if folds is None:
        folds = stratified_folds(ds.labels, n_folds, seed)
    _check_folds(ds, folds, n_folds)
    selector = make_selector(method, alpha=alpha, seed=seed)
    name = method if isinstance(method, str) else getattr(method, "__name__", "custom")

    def run_fold(f):
        train, test = fold_views(ds, folds, f)
        ranked = list(selector(train, counts[-1]))
        errs = []
        for m in counts:
            top = ranked[:m]
            pred = knn_predict(train, test.matrix(top).astype(np.float64), k, top)
            errs.append(float(np.mean(pred != test.labels)))
        return errs

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_fold = list(pool.map(run_fold, range(n_folds)))
    else:
        per_fold = [run_fold(f) for f in range(n_folds)]
    E = np.array(per_fold)  # folds x counts
    mean = E.mean(axis=0)
    return MethodCurve(name, counts, [float(v) for v in mean],
                       [float(v) for v in E.std(axis=0)],
                       [[float(v) for v in E[:, j]] for j in range(len(counts))],
                       float(mean.mean()))


def paired_t_test(a, b, alpha=0.05):
    """Two-sided paired t-test on equal-length samples.

    Zero variance of the differences gives ``t = 0, p = 1`` when their mean is
    zero and a clamped infinite ``t`` with ``p = 0`` otherwise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise BenchError("paired t-test needs two equal-length samples of size >= 2")
    d = a - b
    n = d.size
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    better = None if mean == 0 else ("a" if mean < 0 else "b")
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, "tie", None)
        return TTestResult(math.copysign(T_CLAMP, mean), 0.0, "significant", better)
    t = mean / (sd / math.sqrt(n))
    p = float(2.0 * special.stdtr(n - 1, -abs(t)))
    verdict = "significant" if p < alpha else "tie"
    return TTestResult(float(t), p, verdict, better if verdict == "significant" else None)


def run_bench(ds, methods, feature_counts=None, seed=0, k=3, workers=1, alpha=0.1):
    """Curves for every method on shared folds plus pairwise t-tests.

    The t-test pairs per-feature-count mean errors; with a single feature
    count it pairs the per-fold errors instead.
    """
    n_folds = n_folds_for(ds.n_samples)
    folds = stratified_folds(ds.labels, n_folds, seed)
    report = BenchReport(seed, n_folds, k, [int(f) for f in folds],
                         config={"alpha": alpha, "k": k, "seed": seed})
    for m in methods:
        curve = cross_validate(ds, m, feature_counts, seed, k, workers, alpha, folds)
        report.curves[curve.method] = curve
    names = list(report.curves)
    for x in range(len(names)):
        for y in range(x + 1, len(names)):
            ca, cb = report.curves[names[x]], report.curves[names[y]]
            if len(ca.mean_error) >= 2:
                a, b, paired_on = ca.mean_error, cb.mean_error, "feature_counts"
            else:
                a, b, paired_on = ca.fold_errors[0], cb.fold_errors[0], "folds"
            res = paired_t_test(a, b)
            report.ttests.append({"a": names[x], "b": names[y], "paired_on": paired_on,
                                  **asdict(res)})
    return report


def leakage_check(ds, method, seed=0, alpha=0.1):
    """Canary self-check: a feature equal to the label on held-out rows only.

    For every fold the canary's rank in the training-fold selection must match
    its rank when the canary is pure noise everywhere.  Returns
    ``(passed, details)``.
    """
    n_folds = n_folds_for(ds.n_samples)
    folds = stratified_folds(ds.labels, n_folds, seed)
    selector = make_selector(method, alpha=alpha, seed=seed)
    rng = np.random.default_rng(seed + 7919)
    noise = rng.integers(0, ds.n_classes, ds.n_samples)
    canary_idx = ds.n_features
    details = []
    for f in range(n_folds):
        leaky = np.where(folds == f, ds.labels, noise)
        ranks = []
        for col in (leaky, noise):
            aug = ds.with_columns([col], [ds.n_classes], ["__canary__"])
            train, _ = fold_views(aug, folds, f)
            ranked = list(selector(train, aug.n_features))
            ranks.append(ranked.index(canary_idx))
        details.append({"fold": f, "rank_leaky": ranks[0], "rank_control": ranks[1]})
    passed = all(d["rank_leaky"] == d["rank_control"] for d in details)
    return passed, details
