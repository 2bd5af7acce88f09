"""UCB resource manager: score learners and sample the rollout allocation.

Each learner carries a smoothed value statistic v and a cumulative rollout
count y.  The manager min-max normalizes the values across the portfolio,
adds an exploration bonus c * sqrt(ln(H) / y) with H the total rollout
count, and samples the next generation's worker allocation from the
normalized scores.  Pure functions over snapshots; no state here.
"""

import numpy as np

from .errors import ConfigError


def normalized_values(values):
    """Min-max normalize to [0,1]; an all-equal portfolio maps to 0.5."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = v.min(), v.max()
    if hi > lo:
        return (v - lo) / (hi - lo)
    return np.full(v.shape, 0.5)


def ucb_scores(values, counts, ucb_c):
    """Per-learner priority: normalized value plus exploration bonus.

    U_i = vn_i + ucb_c * sqrt(ln(H) / y_i) with H = sum(y).  A learner that
    has never rolled out (y_i = 0) gets infinite priority so it is sampled
    at least once.  ln(H) is clamped to 0 for H < 2 so the radicand stays
    non-negative early on.
    """
    v = np.asarray(values, dtype=np.float64)
    y = np.asarray(counts, dtype=np.float64)
    if v.shape != y.shape or v.ndim != 1 or v.size < 1:
        raise ConfigError(f"values/counts must be equal-length vectors, got {v.shape} vs {y.shape}")
    if (y < 0).any():
        raise ValueError("rollout counts must be non-negative")
    vn = normalized_values(v)
    H = y.sum()
    log_h = np.log(H) if H >= 2 else 0.0
    out = np.full(v.shape, np.inf)
    live = y > 0
    out[live] = vn[live] + ucb_c * np.sqrt(log_h / y[live])
    return out


def allocate(scores, b, rng):
    """Sample a worker allocation proportional to the scores.

    Learners with infinite score are served one worker each first (in index
    order, while budget lasts).  The remaining workers are drawn i.i.d. from
    the categorical distribution over the finite scores, shifted to be
    non-negative first.  If no finite probability mass remains (all-zero
    after the shift, or every learner infinite), the draw falls back to
    uniform over the portfolio.
    """
    s = np.asarray(scores, dtype=np.float64)
    b = int(b)
    if s.ndim != 1 or s.size < 1:
        raise ConfigError(f"scores must be a non-empty vector, got shape {s.shape}")
    if b < 1:
        raise ConfigError(f"budget must be >= 1, got {b}")
    if np.isnan(s).any():
        raise ValueError("NaN score")
    q = s.size
    counts = np.zeros(q, dtype=np.int64)

    remaining = b
    for i in np.flatnonzero(np.isinf(s)):
        if remaining == 0:
            break
        counts[i] += 1
        remaining -= 1
    if remaining == 0:
        return counts

    finite = np.isfinite(s)
    p = np.zeros(q)
    if finite.any():
        sf = s[finite]
        if sf.min() < 0:
            sf = sf - sf.min()
        p[finite] = sf
    total = p.sum()
    if total <= 0:
        p = np.full(q, 1.0 / q)
    else:
        p = p / total
    counts += rng.multinomial(remaining, p)
    return counts


def initial_allocation(q, b):
    """Spread b workers over q learners as evenly as possible.

    Earlier learners receive the remainder; if q > b the first b learners
    get one worker each (round-robin partial coverage).
    """
    q, b = int(q), int(b)
    if q < 1 or b < 1:
        raise ConfigError(f"need q >= 1 and b >= 1, got q={q} b={b}")
    base, rem = divmod(b, q)
    counts = np.full(q, base, dtype=np.int64)
    counts[:rem] += 1
    return counts
