import json

import numpy as np
import pytest

from vmifs.bench import (BenchError, cross_validate, fold_views, knn_predict,
                         leakage_check, make_selector, n_folds_for, paired_t_test,
                         run_bench, stratified_folds)
from vmifs.data import Dataset, discretize, gen_tree_synthetic


def test_knn_basics():
    train = Dataset.from_codes([[0, 0], [1, 1], [2, 2]], [0, 1, 1])
    assert knn_predict(train, [[1, 1]], k=1).tolist() == [1]
    train = Dataset.from_codes([[0], [0], [0], [5]], [0, 0, 1, 1], cardinalities=[6])
    assert knn_predict(train, [[0]], k=3).tolist() == [0]
    with pytest.raises(BenchError):
        knn_predict(train, [[0]], k=9)


def test_knn_separated_clusters_loo():
    rng = np.random.default_rng(0)
    a = rng.uniform(0, 1, size=(30, 2))
    b = rng.uniform(0, 1, size=(30, 2)) + 10
    ds = Dataset.from_continuous(np.vstack([a, b]), [0] * 30 + [1] * 30)
    folds = stratified_folds(ds.labels, n_folds_for(ds.n_samples), 0)
    assert n_folds_for(ds.n_samples) == 60
    errs = []
    for f in range(60):
        tr, te = fold_views(ds, folds, f)
        errs.append(np.mean(knn_predict(tr, te.matrix(), 3) != te.labels))
    assert max(errs) == 0


def test_folds_stratified_and_balanced():
    labels = np.repeat([0, 1, 2], [50, 37, 13])
    folds = stratified_folds(labels, 10, 4)
    sizes = np.bincount(folds)
    assert sizes.max() - sizes.min() <= 1
    for c in range(3):
        per = np.bincount(folds[labels == c], minlength=10)
        assert per.max() - per.min() <= 1
    np.testing.assert_array_equal(folds, stratified_folds(labels, 10, 4))


def test_loo_chosen_below_threshold():
    assert n_folds_for(50) == 50 and n_folds_for(100) == 10


def test_perfect_oracle_selector():
    rng = np.random.default_rng(1)
    y = rng.integers(0, 2, 200)
    ds = Dataset.from_codes(np.stack([rng.integers(0, 3, 200), y], axis=1), y)
    curve = cross_validate(ds, lambda train, T: [1, 0], [1, 2], seed=0)
    assert curve.mean_error[0] == 0.0


def test_missing_class_in_training_fold():
    ds = Dataset.from_codes(np.zeros((120, 1), int), [0] * 119 + [1])
    with pytest.raises(BenchError, match="re-stratify"):
        cross_validate(ds, "mim", [1])


def test_vmi_beats_random():
    errs = {"vmi-naive": [], "random": []}
    for seed in range(3):
        ds = discretize(gen_tree_synthetic(600, seed), 10, "equal-frequency")
        for m in errs:
            errs[m].append(cross_validate(ds, m, [3], seed=seed).mean_error[0])
    assert np.mean(errs["vmi-naive"]) < np.mean(errs["random"])


def test_t_test_conventions():
    a = np.linspace(0, 1, 10)
    r = paired_t_test(a, a)
    assert (r.t, r.p, r.verdict) == (0.0, 1.0, "tie")
    r = paired_t_test(a + 0.1, a)
    assert r.p < 0.001 and r.verdict == "significant" and r.better == "b"
    with pytest.raises(BenchError):
        paired_t_test([1.0], [2.0])


def test_t_test_matches_scipy():
    from scipy import stats
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=12), rng.normal(0.3, size=12)
    r = paired_t_test(a, b)
    ref = stats.ttest_rel(a, b)
    assert abs(r.t - ref.statistic) < 1e-10 and abs(r.p - ref.pvalue) < 1e-10


def test_t_test_calibration():
    rng = np.random.default_rng(3)
    hits = sum(paired_t_test(rng.normal(size=10), rng.normal(size=10)).verdict == "significant"
               for _ in range(1000))
    assert abs(hits / 1000 - 0.05) <= 0.02


def test_run_bench_report():
    ds = discretize(gen_tree_synthetic(300, 0), 5, "equal-width")
    rep = run_bench(ds, ["vmi-naive", "mim"], [1, 2, 3], seed=1)
    doc = json.loads(rep.to_json())
    assert set(doc["methods"]) == {"vmi-naive", "mim"}
    assert doc["ttests"][0]["paired_on"] == "feature_counts"
    lines = rep.to_csv().splitlines()
    assert lines[0] == "method,m,mean_error,std" and len(lines) == 7
    single = run_bench(ds, ["vmi-naive", "random"], [3], seed=1)
    assert single.ttests[0]["paired_on"] == "folds"


def test_bench_parallel_matches_serial():
    ds = discretize(gen_tree_synthetic(300, 2), 5, "equal-width")
    a = run_bench(ds, ["vmi-pairwise", "jmi"], [2, 4], seed=3, workers=1).to_json()
    b = run_bench(ds, ["vmi-pairwise", "jmi"], [2, 4], seed=3, workers=3).to_json()
    assert a == b


def test_leakage_check_passes():
    ds = discretize(gen_tree_synthetic(200, 0), 4, "equal-width")
    ok, details = leakage_check(ds, "vmi-naive", seed=0)
    assert ok and len(details) == 10


def test_leakage_check_detects_leak(monkeypatch):
    import vmifs.bench as bench
    ds = discretize(gen_tree_synthetic(200, 0), 4, "equal-width")
    real = bench.fold_views
    # a broken harness that selects on all rows, held-out ones included
    monkeypatch.setattr(bench, "fold_views", lambda d, folds, f: (d, real(d, folds, f)[1]))
    assert not leakage_check(ds, "vmi-naive", seed=0)[0]


def test_unknown_method():
    with pytest.raises(BenchError):
        make_selector("nope")
    with pytest.raises(BenchError):
        cross_validate(discretize(gen_tree_synthetic(120, 0), 3), "mim", [0])
