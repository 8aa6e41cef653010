import math

import numpy as np
import pytest

from vmifs import _backend
from vmifs.data import (Dataset, TreeModelSpec, TreeNode, discretize, enumerate_joint,
                        gen_tree_synthetic, random_tree_spec)
from vmifs.estimators import joint_mi_exact, mi_plugin
from vmifs.verify import (check_bound, check_step1, check_theorem1, check_theorem2,
                          tree_selection_conditions)
from vmifs.vmi import (RESTART, QDistKind, SelectionError, VmiConfig, condition_on,
                       init_state, lb_estimate, score_all, score_candidate, select, step)

from oracles import gaussian_tree_true_mi

EXACT = VmiConfig(alpha=0.0)


def _nb(seed, layer1=4):
    spec = random_tree_spec(np.random.default_rng(seed), layer1=layer1, card_range=(2, 3))
    return spec, enumerate_joint(spec)


def test_init_state_shapes(toy):
    st = init_state(toy)
    assert np.all(st.log_q == 0)
    assert st.log_c.shape == (3, toy.n_samples, 2)
    assert st.selected == [] and lb_estimate(st) == 0.0


def test_init_matches_spec_tables():
    spec, ds = _nb(0)
    st = init_state(ds, QDistKind.NAIVE, EXACT)
    keep = ds.weights > 0
    for i, node in enumerate(spec.nodes):
        x = ds.columns[i][keep]
        expect = node.cpt[:, x].T  # rows x classes
        np.testing.assert_allclose(np.exp(st.log_c[i]), expect, atol=1e-12)


def test_empty_dataset_rejected():
    ds = Dataset.from_codes(np.zeros((0, 2), int), np.zeros(0, int), n_classes=2,
                            cardinalities=[2, 2])
    with pytest.raises(SelectionError):
        init_state(ds)


@pytest.mark.parametrize("kind", list(QDistKind))
def test_single_feature_equals_plugin(kind):
    spec, ds = _nb(1)
    st = init_state(ds, kind, EXACT)
    for i in range(ds.n_features):
        assert abs(score_candidate(st, i) - mi_plugin(ds, i)) < 1e-10
    condition_on(st, [2])
    assert abs(lb_estimate(st) - mi_plugin(ds, 2)) < 1e-10


def test_naive_bound_exact_on_naive_bayes(backend):
    for seed in range(20):
        _, ds = _nb(seed, layer1=3 + seed % 3)
        st = condition_on(init_state(ds, QDistKind.NAIVE, EXACT), range(ds.n_features))
        assert abs(lb_estimate(st) - joint_mi_exact(ds, range(ds.n_features))) < 1e-10


def test_redundant_candidate_never_helps():
    rng = np.random.default_rng(5)
    for _ in range(10):
        spec = random_tree_spec(rng, layer1=3, card_range=(2, 3))
        ds = enumerate_joint(spec)
        ds = ds.with_columns([ds.columns[0]], [ds.cardinalities[0]], ["dup"])
        st = condition_on(init_state(ds, QDistKind.PAIRWISE, EXACT), [0])
        assert score_candidate(st, ds.n_features - 1) <= st.lb_current + 1e-10


def test_label_copy_scores_label_entropy():
    y = np.array([0, 1, 1, 2, 0, 1, 1])
    ds = Dataset.from_codes(np.stack([y, np.zeros(7, int)], axis=1), y)
    st = init_state(ds, QDistKind.NAIVE, EXACT)
    p = np.bincount(y) / 7
    assert abs(score_candidate(st, 0) + (p * np.log(p)).sum()) < 1e-12


@pytest.mark.parametrize("kind", list(QDistKind))
def test_scores_independent_of_workers(kind, tree_100k_binned, backend):
    ds = tree_100k_binned.subset(np.arange(3000))
    a = init_state(ds, kind, VmiConfig(workers=1))
    b = init_state(ds, kind, VmiConfig(workers=4))
    condition_on(a, [0, 3])
    condition_on(b, [0, 3])
    np.testing.assert_array_equal(score_all(a)[1], score_all(b)[1])


def test_kde_first_three(tree_5000):
    res = select(tree_5000, QDistKind.NAIVE, 3)
    assert res.feature_names == ["x1", "x2", "x3"]


def test_restart_after_signal_features(tree_5000):
    st = condition_on(init_state(tree_5000, QDistKind.NAIVE), [0, 1, 2])
    cands, scores = score_all(st)
    assert cands == list(range(3, 9))
    assert np.all(scores < st.lb_current)
    chosen, st = step(st)
    assert chosen is RESTART
    assert st.conditioning == [] and st.restarts == [3]


def test_tie_break_lower_index():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 2, 200)
    x = (y + (rng.random(200) < 0.2)) % 2
    noise = rng.integers(0, 3, 200)
    ds = Dataset.from_codes(np.stack([noise, x, x], axis=1), y)
    for kind in QDistKind:
        chosen, _ = step(init_state(ds, kind))
        assert chosen == 1


def test_naive_candidates_untouched(tree_100k_binned):
    st = init_state(tree_100k_binned.subset(np.arange(2000)), QDistKind.NAIVE)
    before = st.log_c.copy()
    for _ in range(5):
        step(st)
    np.testing.assert_array_equal(before, st.log_c)


def test_naive_invariant_to_code_relabeling():
    rng = np.random.default_rng(2)
    X = rng.integers(0, 4, size=(500, 5))
    y = (X[:, 0] + X[:, 1] + rng.integers(0, 2, 500)) % 3
    ds = Dataset.from_codes(X, y)
    perm = np.array([2, 0, 3, 1])
    Xp = X.copy()
    Xp[:, 0] = perm[X[:, 0]]
    dp = Dataset.from_codes(Xp, y)
    a, b = select(ds, QDistKind.NAIVE), select(dp, QDistKind.NAIVE)
    assert a.ranked == b.ranked
    np.testing.assert_allclose(a.scores, b.scores, atol=1e-12)


def test_kernel_inputs_do_not_grow_with_s(monkeypatch, tree_100k_binned):
    ds = tree_100k_binned.subset(np.arange(1000))
    shapes = []
    real = _backend.kernels().score_candidates

    def spy(logq, logc, cands, *rest):
        shapes.append((logq.shape, logc.shape))
        return real(logq, logc, cands, *rest)

    monkeypatch.setattr(_backend.kernels(), "score_candidates", spy)
    select(ds, QDistKind.NAIVE, 6)
    assert len(set(shapes)) == 1


def test_pairwise_first_update_is_pair_conditional():
    rng = np.random.default_rng(7)
    X = rng.integers(0, 3, size=(300, 3))
    y = (X[:, 0] + rng.integers(0, 2, 300)) % 2
    ds = Dataset.from_codes(X, y)
    st = condition_on(init_state(ds, QDistKind.PAIRWISE, EXACT), [0])
    np.testing.assert_array_equal(st.log_c[1], st.cond.pair(1, 0))
    condition_on(st, [2])
    expect = (st.cond.pair(1, 2) + st.cond.pair(1, 0)) / 2
    np.testing.assert_allclose(st.log_c[1], expect, atol=1e-14)


def test_pairwise_on_naive_bayes_keeps_univariate():
    _, ds = _nb(3)
    st = init_state(ds, QDistKind.PAIRWISE, EXACT)
    base = st.log_c.copy()
    condition_on(st, [0, 1])
    for i in (2, 3):
        np.testing.assert_allclose(st.log_c[i], base[i], atol=1e-10)


def test_pairwise_conditionals_unnormalized():
    spec = random_tree_spec(np.random.default_rng(1), layer1=2, children_per_node=1,
                            card_range=(2, 3), noise=0.3)
    ds = enumerate_joint(spec)
    st = condition_on(init_state(ds, QDistKind.PAIRWISE, EXACT), [0, 1])
    i = 3  # child of x2
    keep = ds.weights > 0
    x = [ds.columns[j][keep] for j in range(4)]
    y = ds.labels[keep]
    sums = {}
    for r in np.flatnonzero(y == 0):  # log_c rows do not depend on the row's label
        key = (x[0][r], x[1][r], x[2][r])
        sums[key] = sums.get(key, 0.0) + np.exp(st.log_c[i][r])
    totals = np.array(list(sums.values()))  # groups x classes
    assert np.max(np.abs(totals - 1)) > 1e-6
    assert lb_estimate(st) <= joint_mi_exact(ds, [0, 1]) + 1e-10


def test_select_all_features():
    spec, ds = _nb(4)
    for kind in QDistKind:
        res = select(ds, kind)
        assert sorted(res.ranked) == list(range(ds.n_features))
    with pytest.raises(SelectionError):
        select(ds, QDistKind.NAIVE, 0)
    assert len(select(ds, QDistKind.NAIVE, 99).ranked) == ds.n_features


def test_small_tree_conditions():
    rng = np.random.default_rng(8)
    for _ in range(5):
        spec = random_tree_spec(rng, layer1=2, children_per_node=2, card_range=(2, 3),
                                noise=0.3)
        ds = enumerate_joint(spec)
        for kind in QDistKind:
            ok, err, detail = tree_selection_conditions(spec, ds, kind)
            assert ok, detail
            res = select(ds, kind, 2, EXACT)
            assert all(spec.layers()[i] == 1 for i in res.ranked)


def test_select_deterministic(tree_100k_binned):
    ds = tree_100k_binned.subset(np.arange(4000))
    a = select(ds, QDistKind.PAIRWISE, 6, VmiConfig(workers=1)).to_dict()
    b = select(ds, QDistKind.PAIRWISE, 6, VmiConfig(workers=3)).to_dict()
    a.pop("config"), b.pop("config")
    assert a == b


def test_result_dict_excludes_timing(tree_100k_binned):
    res = select(tree_100k_binned.subset(np.arange(500)), QDistKind.NAIVE, 2)
    assert "wall_time" not in res.to_dict()
    assert "wall_time" in res.to_dict(timing=True)


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="20-bin plug-in joint MI is biased upward by "
                   "about 0.04 nats at N=100000 (8000 cells); the bound tracks the "
                   "true MI instead")
def test_final_bound_near_binned_joint_mi(tree_5000, tree_100k_binned):
    res = select(tree_5000, QDistKind.NAIVE, 3)
    assert res.ranked == [0, 1, 2]
    assert abs(res.scores[-1] - joint_mi_exact(tree_100k_binned, [0, 1, 2])) < 0.02


@pytest.mark.slow
def test_final_bound_near_true_mi(tree_5000):
    res = select(tree_5000, QDistKind.NAIVE, 3)
    truth = gaussian_tree_true_mi()
    assert abs(res.scores[-1] - truth) < 0.03
    # the bound on the binned large sample also lands near the truth
    ds = discretize(gen_tree_synthetic(100000, 1), 20, "equal-frequency")
    st = condition_on(init_state(ds, QDistKind.NAIVE, EXACT), [0, 1, 2])
    assert abs(lb_estimate(st) - truth) < 0.02


@pytest.mark.parametrize("fn,trials", [(check_theorem1, 30), (check_theorem2, 15),
                                       (check_bound, 50), (check_step1, 50)])
def test_verify_suites(fn, trials):
    rep = fn(trials=trials, seed=3)
    assert rep["passed"], rep["failures"]
    assert rep["max_abs_error"] < 1e-10


def test_pairwise_mixed_column_kinds():
    rng = np.random.default_rng(6)
    y = rng.integers(0, 2, 400)
    cat = (y + (rng.random(400) < 0.25)) % 2
    cont = rng.normal(y + cat, 1.0)
    ds = Dataset((cat, cont, rng.normal(size=400)), (2, None, None), y, 2)
    for order in ([0, 1], [1, 0]):
        st = condition_on(init_state(ds, QDistKind.PAIRWISE), order)
        assert np.all(np.isfinite(st.log_c))
        assert np.isfinite(lb_estimate(st))
    res = select(ds, QDistKind.PAIRWISE)
    assert sorted(res.ranked) == [0, 1, 2]
