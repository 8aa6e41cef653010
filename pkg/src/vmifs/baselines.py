"""Classical information-theoretic filter criteria and the exact greedy oracle.

Scores for a candidate i given the selected set S (all plug-in, nats):

    MIM    I(x_i;y)
    mRMR   I(x_i;y) - mean_{j in S} I(x_i;x_j)
    JMI    I(x_i;y) - mean_{j in S} [I(x_i;x_j) - I(x_i;x_j|y)]
    CMIM   min_{j in S} I(x_i;y|x_j)
    CIFE   I(x_i;y) - sum_{j in S} I(x_i;x_j) + sum_{j in S} I(x_i;x_j|y)
    exact  I(x_{S+i};y) by brute force over observed configurations

Empty-set conventions make every criterion equal to MIM at the first step.
"""

import enum
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .estimators import (DEFAULT_JOINT_CAP, cmi_label, cmi_plugin, joint_mi_exact,
                         mi_pair, mi_plugin)
from .vmi import SelectionError, SelectionResult, StepRecord


class BaselineKind(str, enum.Enum):
    MIM = "mim"
    MRMR = "mrmr"
    JMI = "jmi"
    CMIM = "cmim"
    CIFE = "cife"
    EXACT_GREEDY = "exact-greedy"


class MICache:
    """Memoized pairwise plug-in quantities (I(x_i;y), I(x_i;x_j), ...)."""

    def __init__(self, ds, alpha=0.0):
        self.ds = ds
        self.alpha = alpha
        self._store = {}

    def _get(self, key, fn):
        try:
            return self._store[key]
        except KeyError:
            value = self._store[key] = fn()
            return value

    def relevance(self, i):
        return self._get(("rel", i), lambda: mi_plugin(self.ds, i, self.alpha))

    def redundancy(self, i, j):
        a, b = min(i, j), max(i, j)
        return self._get(("red", a, b), lambda: mi_pair(self.ds, a, b, self.alpha))

    def cond_redundancy(self, i, j):
        a, b = min(i, j), max(i, j)
        return self._get(("cred", a, b), lambda: cmi_plugin(self.ds, a, b, self.alpha))

    def relevance_given(self, i, j):
        return self._get(("relg", i, j), lambda: cmi_label(self.ds, i, j, self.alpha))


class _NoCache(MICache):
    def _get(self, key, fn):
        return fn()


def baseline_score(kind, ds, S, i, cache=None, cap=DEFAULT_JOINT_CAP):
    kind = BaselineKind(kind)
    S = list(S)
    if i in S:
        raise SelectionError(f"feature {i} already selected")
    cache = cache if cache is not None else _NoCache(ds)
    if kind is BaselineKind.EXACT_GREEDY:
        return joint_mi_exact(ds, S + [i], cap)
    if kind is BaselineKind.CMIM:
        if not S:
            return cache.relevance(i)
        return min(cache.relevance_given(i, j) for j in S)
    rel = cache.relevance(i)
    if not S or kind is BaselineKind.MIM:
        return rel
    red = sum(cache.redundancy(i, j) for j in S)
    if kind is BaselineKind.MRMR:
        return rel - red / len(S)
    cred = sum(cache.cond_redundancy(i, j) for j in S)
    if kind is BaselineKind.JMI:
        return rel - (red - cred) / len(S)
    return rel - red + cred  # CIFE


def baseline_select(kind, ds, T=None, cache=True, workers=1, cap=DEFAULT_JOINT_CAP):
    """Greedy forward selection under a baseline criterion (smallest-index ties)."""
    kind = BaselineKind(kind)
    if not ds.all_categorical:
        raise SelectionError("baseline criteria require categorical data")
    D = ds.n_features
    T = D if T is None else T
    if T < 1:
        raise SelectionError("T must be >= 1")
    T = min(T, D)
    start = time.perf_counter()
    mic = MICache(ds) if cache else _NoCache(ds)
    if cache and workers > 1:
        # warm the relevance entries in parallel; the cache is read-only afterwards
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(lambda i: mi_plugin(ds, i), range(D)))
        for i, v in enumerate(vals):
            mic._store[("rel", i)] = v
    selected, scores, trajectory = [], [], []
    for it in range(T):
        cands = [i for i in range(D) if i not in set(selected)]
        vals = np.array([baseline_score(kind, ds, selected, i, mic, cap) for i in cands])
        pos = int(np.argmax(vals))
        best = cands[pos]
        trajectory.append(StepRecord(it + 1, "select", best, float(vals[pos]),
                                     scores[-1] if scores else 0.0))
        selected.append(best)
        scores.append(float(vals[pos]))
    return SelectionResult(
        method=kind.value, ranked=selected,
        feature_names=[ds.feature_names[i] for i in selected], scores=scores,
        trajectory=trajectory, wall_time=time.perf_counter() - start,
        config={"kind": kind.value, "T": T})
