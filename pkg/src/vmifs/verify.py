"""Randomized self-checks of the bound against brute-force MI on exact joints."""

import itertools
import time

import numpy as np

from .data import Dataset, enumerate_joint, random_tree_spec
from .estimators import joint_mi_exact, mi_plugin
from .vmi import (QDistKind, RESTART, VmiConfig, condition_on, init_state, lb_estimate,
                  score_all, select, step)

TOL = 1e-10
SUITES = ("theorem1", "theorem2", "bound", "step1")


def _report(suite, trials, seed, failures, max_err, started):
    return {
        "suite": suite,
        "trials": trials,
        "seed": seed,
        "passed": not failures,
        "max_abs_error": max_err,
        "failures": failures[:20],
        "n_failures": len(failures),
        "elapsed": time.perf_counter() - started,
    }


def random_naive_bayes_joint(rng):
    """Binary label, 3-5 features of cardinality 2-3, enumerated exactly."""
    spec = random_tree_spec(rng, layer1=int(rng.integers(3, 6)), card_range=(2, 3))
    return spec, enumerate_joint(spec)


def random_two_layer_tree(rng):
    """2-3 layer-1 nodes with 1-2 children each; child cpts mixed with uniform."""
    layer1 = int(rng.integers(2, 4))
    children = int(rng.integers(1, 3))
    noise = float(rng.uniform(0.2, 0.5))
    spec = random_tree_spec(rng, layer1=layer1, children_per_node=children,
                            card_range=(2, 3), noise=noise)
    return spec, enumerate_joint(spec)


def random_categorical_dataset(rng):
    """Small sampled dataset whose label depends noisily on a few features."""
    n = int(rng.integers(20, 201))
    D = int(rng.integers(2, 6))
    L = int(rng.integers(2, 4))
    cards = rng.integers(2, 5, size=D)
    X = np.stack([rng.integers(0, c, n) for c in cards], axis=1)
    y = (X[:, : max(1, D // 2)].sum(axis=1) + (rng.random(n) < 0.3)) % L
    return Dataset.from_codes(X, y, n_classes=L, cardinalities=[int(c) for c in cards])


def check_theorem1(trials=100, seed=0):
    """Naive bound equals exact MI for every subset of a Naive Bayes joint."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    cfg = VmiConfig(alpha=0.0)
    failures, max_err = [], 0.0
    for trial in range(trials):
        _, ds = random_naive_bayes_joint(rng)
        D = ds.n_features
        subsets = [list(range(D))]
        if trial < 10:
            subsets = [list(s) for r in range(1, D + 1)
                       for s in itertools.combinations(range(D), r)]
        for S in subsets:
            state = condition_on(init_state(ds, QDistKind.NAIVE, cfg), S)
            err = abs(lb_estimate(state) - joint_mi_exact(ds, S))
            max_err = max(max_err, err)
            if err >= TOL:
                failures.append({"trial": trial, "subset": S, "error": err})
    return _report("theorem1", trials, seed, failures, max_err, started)


def tree_selection_conditions(spec, ds, kind):
    """Conditions I-II on one enumerated tree; returns (ok, max_err, detail)."""
    layers = spec.layers()
    res = select(ds, kind, ds.n_features, VmiConfig(alpha=0.0))
    prefix = []
    max_err = 0.0
    for rec in res.trajectory:
        if rec.event == "restart":
            break
        prefix.append(rec.feature)
        err = abs(rec.score - joint_mi_exact(ds, prefix))
        max_err = max(max_err, err)
        if err >= TOL:
            return False, max_err, f"lb != I(x_S;y) at S={prefix}"
        if layers[rec.feature] != 1:
            return False, max_err, f"non layer-1 feature {rec.feature} in {prefix}"
    full = joint_mi_exact(ds, range(ds.n_features))
    gap = abs(res.trajectory[len(prefix) - 1].score - full)
    max_err = max(max_err, gap)
    if gap >= TOL:
        return False, max_err, f"lb {prefix} short of I(x;y) by {gap:.3g}"
    return True, max_err, ""


def check_theorem2(trials=50, seed=0, kinds=(QDistKind.NAIVE, QDistKind.PAIRWISE)):
    """Both conditional families pick only layer-1 nodes until the bound is exact."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    failures, max_err = [], 0.0
    for trial in range(trials):
        spec, ds = random_two_layer_tree(rng)
        for kind in kinds:
            ok, err, detail = tree_selection_conditions(spec, ds, kind)
            max_err = max(max_err, err)
            if not ok:
                failures.append({"trial": trial, "kind": kind.value, "detail": detail})
    return _report("theorem2", trials, seed, failures, max_err, started)


def check_bound(trials=200, seed=0):
    """I_LB(S) <= I(x_S;y) on every state reached by greedy runs, both families."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    cfg = VmiConfig(alpha=0.0)
    failures, max_err = [], 0.0
    for trial in range(trials):
        ds = random_categorical_dataset(rng)
        for kind in QDistKind:
            state = init_state(ds, kind, cfg)
            while len(state.selected) < ds.n_features:
                chosen, state = step(state)
                if chosen is RESTART:
                    continue
                lb = lb_estimate(state)
                excess = lb - joint_mi_exact(ds, state.conditioning)
                max_err = max(max_err, excess)
                if excess > TOL:
                    failures.append({"trial": trial, "kind": kind.value,
                                     "subset": list(state.conditioning), "excess": excess})
    return _report("bound", trials, seed, failures, max_err, started)


def check_step1(trials=200, seed=0):
    """At S = {} every candidate's bound equals its plug-in MI (both families)."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    cfg = VmiConfig(alpha=0.0)
    failures, max_err = [], 0.0
    for trial in range(trials):
        ds = random_categorical_dataset(rng)
        for kind in QDistKind:
            cands, scores = score_all(init_state(ds, kind, cfg))
            for i, s in zip(cands, scores):
                err = abs(s - mi_plugin(ds, i))
                max_err = max(max_err, err)
                if err >= TOL:
                    failures.append({"trial": trial, "kind": kind.value, "feature": i,
                                     "error": err})
    return _report("step1", trials, seed, failures, max_err, started)


def run_suite(name, trials=None, seed=0):
    fn = {"theorem1": check_theorem1, "theorem2": check_theorem2,
          "bound": check_bound, "step1": check_step1}[name]
    if trials is None:
        return fn(seed=seed)
    return fn(trials=trials, seed=seed)
