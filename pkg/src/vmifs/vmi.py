"""Variational forward feature selection.

The selection objective is the sample-mean variational lower bound

    I_LB(x_S; y) = mean_k [ ln q(x_S^k | y^k) - ln sum_c p(c) q(x_S^k | c) ]

with q(x_S | y) built auto-regressively from per-feature conditionals.  Two
conditional families are supported: ``naive`` (q(x_i | x_S, y) = p(x_i | y))
and ``pairwise`` (geometric mean over selected j of p(x_i | x_j, y)).

Everything is kept in the log domain.  Per-sample state is an N x L matrix
``logQ`` (ln q(x_S^k | c)) and, per candidate, an N x L matrix ``logC``
(ln q(x_i^k | x_S^k, c)); scoring a candidate is a single log-sum-exp pass.
"""

import enum
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import _backend
from .data import Dataset
from .estimators import (DEFAULT_SMOOTHING, DENSITY_FLOOR, EstimatorError, fit_kde,
                         fit_cond_pmf, fit_pairwise_cond_pmf, fit_prior,
                         kde_cond_density, kde_pair_cond_log_density,
                         silverman_bandwidth)

logger = logging.getLogger(__name__)


class QDistKind(str, enum.Enum):
    NAIVE = "naive"
    PAIRWISE = "pairwise"


class SelectionError(ValueError):
    pass


class _Restart:
    def __repr__(self):
        return "RESTART"


RESTART = _Restart()


@dataclass(frozen=True)
class VmiConfig:
    alpha: float = DEFAULT_SMOOTHING
    workers: int = 1
    density_floor: float = DENSITY_FLOOR


@dataclass
class StepRecord:
    step: int
    event: str  # "select" or "restart"
    feature: Optional[int]
    score: float
    lb_before: float


@dataclass
class SelectionResult:
    method: str
    ranked: list
    feature_names: list
    scores: list
    restarts: list = field(default_factory=list)
    trajectory: list = field(default_factory=list)
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)

    def to_dict(self, timing=False):
        out = {
            "method": self.method,
            "ranked": list(self.ranked),
            "features": list(self.feature_names),
            "scores": [float(s) for s in self.scores],
            "restarts": list(self.restarts),
            "trajectory": [asdict(r) for r in self.trajectory],
            "config": dict(self.config),
        }
        if timing:
            out["wall_time"] = self.wall_time
        return out


def _kde_log_density(train, weights, query, data_range, floor, workers):
    h = np.array([silverman_bandwidth(train, weights, data_range)])
    dens = _backend.kernels().gauss_kde(query.reshape(-1, 1),
                                        np.ascontiguousarray(train.reshape(-1, 1)),
                                        np.ascontiguousarray(weights), h, workers)
    return np.log(np.maximum(dens, floor))


class _Conditionals:
    """Evaluates ln q(x_i^k | ., c) at every sample for any column kind.

    Categorical columns use smoothed plug-in tables, continuous columns use
    per-class Gaussian KDEs.
    """

    def __init__(self, ds, alpha, floor, workers):
        self.ds = ds
        self.alpha = alpha
        self.floor = floor
        self.workers = workers

    def base(self, i):
        ds = self.ds
        if ds.is_categorical(i):
            table = fit_cond_pmf(ds, i, self.alpha)
            with np.errstate(divide="ignore"):
                return np.ascontiguousarray(np.log(table.T)[ds.columns[i]])
        model = fit_kde(ds, i, self.floor)
        out = np.empty((ds.n_samples, ds.n_classes))
        for c in range(ds.n_classes):
            out[:, c] = np.log(kde_cond_density(model, ds.columns[i], c, self.workers))
        return out

    def pair(self, i, j):
        """ln q(x_i | x_j, c) for every sample and class."""
        ds = self.ds
        ci, cj = ds.is_categorical(i), ds.is_categorical(j)
        if ci and cj:
            table = fit_pairwise_cond_pmf(ds, i, j, self.alpha)
            with np.errstate(divide="ignore"):
                logt = np.log(table.transpose(1, 2, 0))
            return np.ascontiguousarray(logt[ds.columns[j], ds.columns[i]])
        if not ci and not cj:
            model = fit_kde(ds, (i, j), self.floor)
            out = np.empty((ds.n_samples, ds.n_classes))
            for c in range(ds.n_classes):
                out[:, c] = kde_pair_cond_log_density(model, ds.columns[i], ds.columns[j],
                                                      c, self.workers)
            return out
        if not ci:
            return self._continuous_given_categorical(i, j)
        return self._categorical_given_continuous(i, j)

    def _cell_log_density(self, x, mask, query, fallback):
        w = self.ds.weights[mask]
        if (w > 0).sum() < 2:
            return fallback
        rng = float(x.max() - x.min())
        return _kde_log_density(x[mask], w, query, rng, self.floor, self.workers)

    def _continuous_given_categorical(self, i, j):
        # f(x_i | x_j = u, c) from a KDE fit inside each (u, c) cell
        ds = self.ds
        x, u_codes = ds.columns[i], ds.columns[j]
        base = self.base(i)
        out = base.copy()
        for c in range(ds.n_classes):
            for u in range(ds.cardinalities[j]):
                rows = u_codes == u
                if not rows.any():
                    continue
                mask = rows & (ds.labels == c)
                out[rows, c] = self._cell_log_density(x, mask, x[rows], base[rows, c])
        return out

    def _categorical_given_continuous(self, i, j):
        # p(v | x_j, c) = p(v|c) f(x_j|v,c) / sum_v' p(v'|c) f(x_j|v',c)
        ds = self.ds
        v_codes, x = ds.columns[i], ds.columns[j]
        table = fit_cond_pmf(ds, i, self.alpha)
        fj = self.base(j)
        card = ds.cardinalities[i]
        out = np.empty((ds.n_samples, ds.n_classes))
        for c in range(ds.n_classes):
            logf = np.empty((ds.n_samples, card))
            for v in range(card):
                mask = (v_codes == v) & (ds.labels == c)
                logf[:, v] = self._cell_log_density(x, mask, x, fj[:, c])
            with np.errstate(divide="ignore"):
                logjoint = np.log(table[c])[None, :] + logf
            mx = logjoint.max(axis=1, keepdims=True)
            lse = mx[:, 0] + np.log(np.exp(logjoint - mx).sum(axis=1))
            out[:, c] = logjoint[np.arange(ds.n_samples), v_codes] - lse
        return out


@dataclass
class SelectionState:
    """Mutable selection state; ``step`` commits changes in place."""

    ds: Dataset
    kind: QDistKind
    config: VmiConfig
    log_prior: np.ndarray
    log_q: np.ndarray
    log_c: np.ndarray
    base_log_c: np.ndarray
    labels: np.ndarray
    weights: np.ndarray
    cond: _Conditionals
    selected: list = field(default_factory=list)
    conditioning: list = field(default_factory=list)
    lb_current: float = 0.0
    trajectory: list = field(default_factory=list)
    restarts: list = field(default_factory=list)
    iteration: int = 0

    @property
    def t(self):
        return len(self.conditioning)

    @property
    def candidates(self):
        chosen = set(self.selected)
        return [i for i in range(self.ds.n_features) if i not in chosen]


def init_state(ds, kind=QDistKind.NAIVE, config=None):
    """State at S = {} : logQ = 0 and logC_i = ln p(x_i | y) for every feature."""
    config = config or VmiConfig()
    kind = QDistKind(kind)
    if ds.n_samples == 0:
        raise SelectionError("empty dataset")
    rows = np.flatnonzero(ds.weights > 0)
    if rows.size != ds.n_samples:
        ds = ds.subset(rows)
    prior = fit_prior(ds)
    with np.errstate(divide="ignore"):
        log_prior = np.log(prior)
    cond = _Conditionals(ds, config.alpha, config.density_floor, config.workers)
    N, L, D = ds.n_samples, ds.n_classes, ds.n_features
    base = np.empty((D, N, L))
    for i in range(D):
        base[i] = cond.base(i)
    return SelectionState(
        ds=ds, kind=kind, config=config, log_prior=log_prior,
        log_q=np.zeros((N, L)), log_c=base.copy(), base_log_c=base,
        labels=np.ascontiguousarray(ds.labels, dtype=np.int64),
        weights=ds.weights / ds.weights.sum(), cond=cond)


def _score(state, candidates):
    if not candidates:
        return np.zeros(0)
    return _backend.kernels().score_candidates(
        state.log_q, state.log_c, np.asarray(candidates, dtype=np.int64),
        state.log_prior, state.labels, state.weights, state.config.workers)


def lb_estimate(state):
    """Current lower-bound estimate recomputed from logQ (0 at S = {})."""
    if not state.conditioning:
        return 0.0
    N, L = state.log_q.shape
    zeros = np.zeros((1, N, L))
    return float(_backend.kernels().score_candidates(
        state.log_q, zeros, np.zeros(1, dtype=np.int64), state.log_prior,
        state.labels, state.weights, 1)[0])


def score_candidate(state, i):
    """I_LB(x_{S+i}; y) from the cached Q and C matrices; does not mutate state."""
    if i in state.selected:
        raise SelectionError(f"feature {i} already selected")
    if not 0 <= i < state.ds.n_features:
        raise SelectionError(f"feature {i} out of range")
    return float(_score(state, [i])[0])


def score_all(state):
    """Scores of every remaining candidate, in feature-index order."""
    cands = state.candidates
    return cands, _score(state, cands)


def update_naive(state, chosen):
    # candidate conditionals do not depend on the conditioning set
    return state


def update_pairwise(state, chosen):
    """Fold p(x_i | x_chosen, y) into each candidate's running log geometric mean."""
    t = state.t
    for i in state.candidates:
        fresh = state.cond.pair(i, chosen)
        if t == 1:
            state.log_c[i] = fresh
        else:
            state.log_c[i] = (fresh + (t - 1) * state.log_c[i]) / t
    return state


def _restart(state, best_score):
    state.trajectory.append(StepRecord(state.iteration, "restart", None,
                                       float(best_score), float(state.lb_current)))
    state.restarts.append(len(state.selected))
    state.conditioning = []
    state.log_q[:] = 0.0
    for i in state.candidates:
        state.log_c[i] = state.base_log_c[i]
    state.lb_current = 0.0


def step(state):
    """One iteration: select the argmax candidate or restart.

    A restart clears the conditioning set when the best score does not exceed
    the current bound.  At S = {} the argmax is always taken, so every restart
    is followed by a selection.
    """
    cands, scores = score_all(state)
    if not cands:
        raise SelectionError("no candidates remain")
    pos = int(np.argmax(scores))  # first maximum = smallest feature index
    best, best_score = cands[pos], float(scores[pos])
    if not np.isfinite(best_score):
        raise SelectionError(f"non-finite score for feature {best}")
    state.iteration += 1
    if state.conditioning and best_score <= state.lb_current:
        _restart(state, best_score)
        return RESTART, state
    _commit(state, best, best_score)
    return best, state


def _commit(state, chosen, score):
    state.trajectory.append(StepRecord(state.iteration, "select", chosen, score,
                                       float(state.lb_current)))
    state.selected.append(chosen)
    state.conditioning.append(chosen)
    state.log_q += state.log_c[chosen]
    if state.kind is QDistKind.NAIVE:
        update_naive(state, chosen)
    else:
        update_pairwise(state, chosen)
    state.lb_current = score


def condition_on(state, features):
    """Append ``features`` to the conditioning set in order, bypassing the argmax."""
    for i in features:
        score = score_candidate(state, i)
        state.iteration += 1
        _commit(state, i, score)
    return state


def select(ds, kind=QDistKind.NAIVE, T=None, config=None):
    """Forward selection of ``T`` features (all features when T is None or > D)."""
    kind = QDistKind(kind)
    config = config or VmiConfig()
    D = ds.n_features
    T = D if T is None else T
    if T < 1:
        raise SelectionError("T must be >= 1")
    T = min(T, D)
    start = time.perf_counter()
    state = init_state(ds, kind, config)
    while len(state.selected) < T:
        step(state)
    elapsed = time.perf_counter() - start
    selects = [r for r in state.trajectory if r.event == "select"]
    return SelectionResult(
        method=f"vmi-{kind.value}",
        ranked=list(state.selected),
        feature_names=[ds.feature_names[i] for i in state.selected],
        scores=[r.score for r in selects],
        restarts=list(state.restarts),
        trajectory=list(state.trajectory),
        wall_time=elapsed,
        config={"kind": kind.value, "T": T, "alpha": config.alpha,
                "density_floor": config.density_floor})
