"""Pure numpy implementations of the hot kernels (fallback backend)."""

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

# elements per temporary block; bounds memory of the broadcast arrays
_BLOCK = 1 << 21

NAME = "python"


def _map(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def gauss_kde(query, samples, weights, bandwidth, workers=1):
    """sum_j w_j prod_d N(q_d - s_jd; h_d) / sum_j w_j for every query row."""
    query = np.asarray(query, dtype=np.float64)
    samples = np.asarray(samples, dtype=np.float64)
    h = np.asarray(bandwidth, dtype=np.float64)
    n, m = query.shape[0], samples.shape[0]
    norm = weights.sum() * float(np.prod(h * math.sqrt(2 * math.pi)))
    qs = query / h
    ss = samples / h
    step = max(1, _BLOCK // max(m, 1))
    blocks = [slice(a, min(a + step, n)) for a in range(0, n, step)]

    def run(sl):
        z = np.zeros((sl.stop - sl.start, m))
        for d in range(query.shape[1]):
            u = qs[sl, d, None] - ss[None, :, d]
            z += u * u
        return (np.exp(-0.5 * z) * weights).sum(axis=1)

    parts = _map(run, blocks, workers)
    out = np.concatenate(parts) if parts else np.zeros(0)
    return out / norm


def score_candidates(logq, logc, candidates, log_prior, labels, weights, workers=1):
    """Weighted mean over rows of ln q(x_S, x_i | y) - ln q(x_S, x_i) per candidate."""
    N, L = logq.shape
    rows = np.arange(N)
    base = logq + log_prior
    num_q = logq[rows, labels]
    candidates = np.asarray(candidates, dtype=np.int64)
    step = max(1, _BLOCK // max(N * L, 1))
    blocks = [candidates[a:a + step] for a in range(0, candidates.size, step)]

    def run(block):
        c = logc[block]
        a = base[None, :, :] + c
        mx = a.max(axis=2)
        lse = mx + np.log(np.exp(a - mx[:, :, None]).sum(axis=2))
        v = num_q[None, :] + c[:, rows, labels] - lse
        return (v * weights[None, :]).sum(axis=1)

    parts = _map(run, blocks, workers)
    return np.concatenate(parts) if parts else np.zeros(0)
