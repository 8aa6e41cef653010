"""Plug-in probability tables, kernel density estimates and MI estimators.

All information quantities are in nats.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .data import DataError

logger = logging.getLogger(__name__)

DEFAULT_SMOOTHING = 0.1
DENSITY_FLOOR = 1e-300
DEFAULT_JOINT_CAP = 10**6


class EstimatorError(ValueError):
    pass


def _require_nonempty(ds):
    if ds.n_samples == 0:
        raise EstimatorError("empty dataset")


def _require_categorical(ds, i):
    if not ds.is_categorical(i):
        raise EstimatorError(
            f"feature {ds.feature_names[i]!r} is continuous; discretize it or use KDE")


def fit_prior(ds):
    """Unsmoothed weighted class frequencies."""
    _require_nonempty(ds)
    counts = np.bincount(ds.labels, weights=ds.weights, minlength=ds.n_classes)
    return counts / counts.sum()


def _normalize_slices(counts, alpha, what):
    """Normalize the last axis of ``counts + alpha``; empty slices become uniform."""
    card = counts.shape[-1]
    smoothed = counts + alpha
    totals = smoothed.sum(axis=-1, keepdims=True)
    empty = totals[..., 0] <= 0
    n_empty = int(empty.sum())
    if n_empty:
        logger.warning("%s: %d empty conditioning cell(s) fall back to uniform",
                       what, n_empty)
    with np.errstate(invalid="ignore", divide="ignore"):
        table = np.where(totals > 0, smoothed / np.where(totals > 0, totals, 1.0),
                         1.0 / card)
    return table


def fit_cond_pmf(ds, i, alpha=DEFAULT_SMOOTHING):
    """Table ``t[c, v] = p(x_i = v | y = c)`` with additive smoothing ``alpha``."""
    _require_nonempty(ds)
    _require_categorical(ds, i)
    card = ds.cardinalities[i]
    L = ds.n_classes
    counts = np.bincount(ds.labels * card + ds.columns[i], weights=ds.weights,
                         minlength=L * card).reshape(L, card)
    return _normalize_slices(counts, alpha, f"p({ds.feature_names[i]}|y)")


def fit_pairwise_cond_pmf(ds, i, j, alpha=DEFAULT_SMOOTHING):
    """Table ``t[c, u, v] = p(x_i = v | x_j = u, y = c)``."""
    _require_nonempty(ds)
    _require_categorical(ds, i)
    _require_categorical(ds, j)
    ci, cj = ds.cardinalities[i], ds.cardinalities[j]
    L = ds.n_classes
    flat = (ds.labels * cj + ds.columns[j]) * ci + ds.columns[i]
    counts = np.bincount(flat, weights=ds.weights, minlength=L * cj * ci)
    return _normalize_slices(counts.reshape(L, cj, ci), alpha,
                             f"p({ds.feature_names[i]}|{ds.feature_names[j]},y)")


@dataclass
class DiscreteTables:
    """Prior over labels plus requested univariate / pairwise conditional PMFs."""

    prior: np.ndarray
    smoothing: float
    univariate: dict = field(default_factory=dict)
    pairwise: dict = field(default_factory=dict)


def fit_tables(ds, features=(), pairs=(), alpha=DEFAULT_SMOOTHING):
    tables = DiscreteTables(fit_prior(ds), alpha)
    for i in features:
        tables.univariate[i] = fit_cond_pmf(ds, i, alpha)
    for i, j in pairs:
        tables.pairwise[i, j] = fit_pairwise_cond_pmf(ds, i, j, alpha)
    return tables


# -- plug-in information measures ------------------------------------------

def _mi_codes(a, na, b, nb, w, alpha=0.0):
    joint = np.bincount(a * nb + b, weights=w, minlength=na * nb).reshape(na, nb)
    if alpha:
        joint = joint + alpha
    p = joint / joint.sum()
    pa = p.sum(axis=1)
    pb = p.sum(axis=0)
    nz = p > 0
    with np.errstate(divide="ignore"):
        terms = p[nz] * (np.log(p[nz]) - np.log(pa[:, None] * pb[None, :])[nz])
    return max(float(terms.sum()), 0.0)


def _cmi_codes(a, na, b, nb, z, nz_, w, alpha=0.0):
    """I(a; b | z) from weighted joint counts."""
    joint = np.bincount((z * na + a) * nb + b, weights=w,
                        minlength=nz_ * na * nb).reshape(nz_, na, nb)
    if alpha:
        joint = joint + alpha
    p = joint / joint.sum()
    pz = p.sum(axis=(1, 2))
    paz = p.sum(axis=2)
    pbz = p.sum(axis=1)
    nz = p > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (p * pz[:, None, None]) / (paz[:, :, None] * pbz[:, None, :])
        terms = p[nz] * np.log(ratio[nz])
    return max(float(terms.sum()), 0.0)


def entropy(ds, i=None, alpha=0.0):
    """Plug-in entropy of feature ``i`` (or of the label when ``i`` is None)."""
    if i is None:
        codes, card = ds.labels, ds.n_classes
    else:
        _require_categorical(ds, i)
        codes, card = ds.columns[i], ds.cardinalities[i]
    counts = np.bincount(codes, weights=ds.weights, minlength=card) + alpha
    p = counts / counts.sum()
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def mi_plugin(ds, i, alpha=0.0):
    """Plug-in I(x_i; y)."""
    _require_categorical(ds, i)
    return _mi_codes(ds.columns[i], ds.cardinalities[i], ds.labels, ds.n_classes,
                     ds.weights, alpha)


def mi_pair(ds, i, j, alpha=0.0):
    """Plug-in I(x_i; x_j)."""
    _require_categorical(ds, i)
    _require_categorical(ds, j)
    return _mi_codes(ds.columns[i], ds.cardinalities[i], ds.columns[j],
                     ds.cardinalities[j], ds.weights, alpha)


def cmi_plugin(ds, i, j, alpha=0.0):
    """Plug-in I(x_i; x_j | y)."""
    _require_categorical(ds, i)
    _require_categorical(ds, j)
    return _cmi_codes(ds.columns[i], ds.cardinalities[i], ds.columns[j],
                      ds.cardinalities[j], ds.labels, ds.n_classes, ds.weights, alpha)


def cmi_label(ds, i, j, alpha=0.0):
    """Plug-in I(x_i; y | x_j)."""
    _require_categorical(ds, i)
    _require_categorical(ds, j)
    return _cmi_codes(ds.columns[i], ds.cardinalities[i], ds.labels, ds.n_classes,
                      ds.columns[j], ds.cardinalities[j], ds.weights, alpha)


def joint_codes(ds, features, cap=DEFAULT_JOINT_CAP):
    """Code each observed configuration of ``features``; returns (codes, n_distinct)."""
    features = list(features)
    for i in features:
        _require_categorical(ds, i)
    if not features:
        return np.zeros(ds.n_samples, dtype=np.int64), 1
    if len(features) == 1:
        i = features[0]
        if ds.cardinalities[i] > cap:
            raise EstimatorError(f"{ds.cardinalities[i]} categories exceed cap {cap}")
        return ds.columns[i], ds.cardinalities[i]
    X = np.stack([ds.columns[i] for i in features], axis=1)
    _, inverse = np.unique(X, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1).astype(np.int64)
    n_distinct = int(inverse.max()) + 1 if inverse.size else 1
    if n_distinct > cap:
        raise EstimatorError(f"{n_distinct} distinct configurations exceed cap {cap}")
    return inverse, n_distinct


def joint_mi_exact(ds, features, cap=DEFAULT_JOINT_CAP):
    """Brute-force I(x_S; y) on the (weighted) empirical joint."""
    _require_nonempty(ds)
    codes, n = joint_codes(ds, features, cap)
    return _mi_codes(codes, n, ds.labels, ds.n_classes, ds.weights)


# -- kernel density estimation ----------------------------------------------

@dataclass(frozen=True)
class KdeModel:
    """Per-class Gaussian product-kernel density over one or two features.

    ``samples[c]`` is ``(m_c, dims)``; ``bandwidths[c]`` has one entry per dim.
    """

    features: tuple
    samples: tuple
    sample_weights: tuple
    bandwidths: tuple
    floor: float = DENSITY_FLOOR

    @property
    def dims(self):
        return len(self.features)

    @property
    def n_classes(self):
        return len(self.samples)


def silverman_bandwidth(x, w, fallback_range):
    """1.06 * sigma * m^(-1/5), floored at 1e-6 * range for degenerate data."""
    wsum = w.sum()
    mean = (w * x).sum() / wsum
    denom = wsum - (w * w).sum() / wsum
    var = (w * (x - mean) ** 2).sum() / denom if denom > 0 else 0.0
    m_eff = wsum * wsum / (w * w).sum()
    h = 1.06 * math.sqrt(max(var, 0.0)) * m_eff ** (-0.2)
    floor = 1e-6 * (fallback_range if fallback_range > 0 else 1.0)
    return max(h, floor)


def fit_kde(ds, features, floor=DENSITY_FLOOR):
    """Fit per-class KDEs on one feature index or a pair of indices."""
    if isinstance(features, (int, np.integer)):
        features = (int(features),)
    features = tuple(features)
    if len(features) not in (1, 2):
        raise EstimatorError("KDE supports one or two features")
    for f in features:
        if ds.is_categorical(f):
            raise EstimatorError(f"feature {ds.feature_names[f]!r} is categorical")
    X = np.stack([ds.columns[f] for f in features], axis=1)
    ranges = X.max(axis=0) - X.min(axis=0) if ds.n_samples else np.zeros(len(features))
    samples, weights, bws = [], [], []
    for c in range(ds.n_classes):
        mask = (ds.labels == c) & (ds.weights > 0)
        if mask.sum() < 2:
            raise EstimatorError(f"class {c} has fewer than 2 samples for KDE")
        xs, ws = X[mask], ds.weights[mask]
        samples.append(np.ascontiguousarray(xs))
        weights.append(np.ascontiguousarray(ws))
        bws.append(np.array([silverman_bandwidth(xs[:, d], ws, ranges[d])
                             for d in range(len(features))]))
    return KdeModel(features, tuple(samples), tuple(weights), tuple(bws), floor)


def kde_cond_density(model, values, c, workers=1):
    """Density of ``values`` (shape (n,) or (n, dims)) under class ``c``, floored."""
    q = np.asarray(values, dtype=np.float64)
    if q.ndim == 0:
        q = q.reshape(1, 1)
    elif q.ndim == 1:
        q = q.reshape(-1, 1) if model.dims == 1 else q.reshape(1, -1)
    if q.shape[1] != model.dims:
        raise EstimatorError(f"expected {model.dims}-dimensional query points")
    dens = _backend.kernels().gauss_kde(np.ascontiguousarray(q), model.samples[c],
                                        model.sample_weights[c], model.bandwidths[c],
                                        workers)
    return np.maximum(dens, model.floor)


def kde_marginal_density(model, values, c, dim, workers=1):
    """Density of one coordinate under the 2D model's own bandwidth (floored)."""
    q = np.ascontiguousarray(np.asarray(values, dtype=np.float64).reshape(-1, 1))
    s = np.ascontiguousarray(model.samples[c][:, dim:dim + 1])
    h = model.bandwidths[c][dim:dim + 1]
    dens = _backend.kernels().gauss_kde(q, s, model.sample_weights[c], h, workers)
    return np.maximum(dens, model.floor)


def kde_pair_cond_log_density(model, xi, xj, c, workers=1):
    """ln q(x_i | x_j, c) = ln joint2D - ln marginal1D, both floored."""
    joint = kde_cond_density(model, np.stack([xi, xj], axis=1), c, workers)
    marg = kde_marginal_density(model, xj, c, 1, workers)
    return np.log(joint) - np.log(marg)
