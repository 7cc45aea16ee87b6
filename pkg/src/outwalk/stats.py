"""Statistical verification layer over walk records.

Everything here is pure aggregation: records in, report dataclasses out.
The estimators are the plain Monte Carlo ones; the variance is estimated
from the standardized end-of-horizon values rather than from a boundary
integral, which has no closed form in these settings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_DRIFT_TRIALS = 30
MIN_CLT_TRIALS = 500
KS_SERIES_TERMS = 100


# ---------------------------------------------------------------------------
# observable extraction

def observable_matrix(records, observable):
    """Per-trial checkpoint rows for a named observable.

    Names: "kappa", "sigma:<label>", "loglen:<label>" (outer mode cyclic
    length of the tracked class, unnormalized)."""
    if not records:
        raise ValueError("no records")
    cps = records[0].checkpoints
    if observable == "kappa":
        rows = [r.kappa for r in records]
    elif observable.startswith("sigma:"):
        lab = observable[len("sigma:"):]
        try:
            rows = [r.sigma[lab] for r in records]
        except KeyError:
            raise ValueError("class %r was not tracked" % lab) from None
    elif observable.startswith("loglen:"):
        lab = observable[len("loglen:"):]
        try:
            rows = [tuple(math.log(v) for v in r.lengths[lab]) for r in records]
        except KeyError:
            raise ValueError("class %r has no tracked lengths" % lab) from None
    else:
        raise ValueError("unknown observable %r" % observable)
    return np.asarray(cps, dtype=np.int64), np.asarray(rows, dtype=np.float64)


def class_labels(records):
    return tuple(records[0].sigma.keys())


def verify_sigma_domination(records):
    """Hard invariant: sigma(Phi_n, g) <= kappa(Phi_n) at every checkpoint."""
    for r in records:
        k = np.asarray(r.kappa, dtype=np.float64)
        for lab, vals in r.sigma.items():
            if np.any(np.asarray(vals, dtype=np.float64) > k):
                raise AssertionError(
                    "sigma(%s) exceeds kappa in trial %d" % (lab, r.trial_index))
    return True


# ---------------------------------------------------------------------------
# drift

@dataclass(frozen=True)
class DriftEstimate:
    lambda_hat: float
    std_error: float
    per_class: dict              # label -> (estimate, std_error)
    horizon: int
    trials: int
    flagged: bool                # some pair of classes > 3 combined SE apart
    max_class_spread: float      # (max - min) / |mean| over class estimates


def _end_stats(cps, mat):
    n = int(cps[-1])
    ends = mat[:, -1]
    est = float(ends.mean()) / n
    se = float(ends.std(ddof=1)) / math.sqrt(len(ends)) / n if len(ends) > 1 else 0.0
    return est, se


def _slope_stats(cps, mat):
    # Increment between the checkpoint nearest n/2 and the horizon.  Each
    # class observable carries an O(1) additive constant (alignment of the
    # class with the walk); dividing the endpoint by n leaves a bias of
    # order 1/n, while the increment cancels the constant entirely.
    if len(cps) < 2:
        return _end_stats(cps, mat)
    mid = int(np.argmin(np.abs(cps - cps[-1] / 2.0)))
    if mid == len(cps) - 1:
        mid = len(cps) - 2
    span = int(cps[-1] - cps[mid])
    incs = mat[:, -1] - mat[:, mid]
    est = float(incs.mean()) / span
    se = (float(incs.std(ddof=1)) / math.sqrt(len(incs)) / span
          if len(incs) > 1 else 0.0)
    return est, se


def drift_estimate(records, observable="kappa"):
    """lambda_hat = mean(value at horizon) / horizon, with a per-class table.

    Per-class estimates use the second-half increment of the unnormalized
    functional (log||Phi_n(g)|| in outer mode, the Busemann value in tree
    mode): the endpoint form converges to the same drift but keeps an O(1/n)
    bias that differs per class, which would drown the class comparison at
    practical horizons."""
    if len(records) < MIN_DRIFT_TRIALS:
        raise ValueError("drift needs >= %d trials, got %d"
                         % (MIN_DRIFT_TRIALS, len(records)))
    cps, mat = observable_matrix(records, observable)
    lam, se = _end_stats(cps, mat)
    per_class = {}
    for lab in class_labels(records):
        key = ("loglen:" + lab) if records[0].lengths else ("sigma:" + lab)
        ccps, cmat = observable_matrix(records, key)
        per_class[lab] = _slope_stats(ccps, cmat)
    flagged = False
    labs = list(per_class)
    for i in range(len(labs)):
        ei, si = per_class[labs[i]]
        for j in range(i + 1, len(labs)):
            ej, sj = per_class[labs[j]]
            comb = math.hypot(si, sj)
            if comb > 0 and abs(ei - ej) > 3 * comb:
                flagged = True
    spread = 0.0
    if per_class:
        vals = [e for e, _ in per_class.values()]
        mean = sum(vals) / len(vals)
        if mean != 0:
            spread = (max(vals) - min(vals)) / abs(mean)
    return DriftEstimate(lam, se, per_class, int(cps[-1]), len(records),
                         flagged, spread)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov

def _normal_cdf(x, variance):
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0 * variance)))


def ks_test(samples, variance):
    """One-sample KS against Normal(0, variance).

    Returns (statistic, p_value); the p-value uses the asymptotic
    Kolmogorov series truncated at 100 terms."""
    xs = np.sort(np.asarray(samples, dtype=np.float64))
    m = len(xs)
    if m == 0:
        raise ValueError("empty sample")
    if not variance > 0:
        raise ValueError("variance must be positive")
    cdf = np.array([_normal_cdf(x, variance) for x in xs])
    hi = np.arange(1, m + 1) / m - cdf
    lo = cdf - np.arange(0, m) / m
    stat = float(max(hi.max(), lo.max()))
    t = math.sqrt(m) * stat
    acc = 0.0
    for k in range(1, KS_SERIES_TERMS + 1):
        acc += (-1) ** (k - 1) * math.exp(-2.0 * (k * t) ** 2)
    p = min(1.0, max(0.0, 2.0 * acc))
    return stat, p


# ---------------------------------------------------------------------------
# CLT

@dataclass(frozen=True)
class CltReport:
    observable: str
    horizon: int
    standardized_samples: tuple
    variance_hat: float
    ks_statistic: object         # None when degenerate
    ks_p_value: object
    degenerate: bool


def clt_report(records, lambda_hat, observable="kappa", min_trials=MIN_CLT_TRIALS):
    """Standardize end-of-horizon values as (v - n*lambda)/sqrt(n), estimate
    the CLT variance by their sample variance, and KS-test normality."""
    if len(records) < min_trials:
        raise ValueError("CLT report needs >= %d trials, got %d"
                         % (min_trials, len(records)))
    cps, mat = observable_matrix(records, observable)
    n = int(cps[-1])
    std = (mat[:, -1] - n * lambda_hat) / math.sqrt(n)
    if np.all(std == std[0]):
        return CltReport(observable, n, tuple(std), 0.0, None, None, True)
    var = float(std.var(ddof=1))
    if var == 0.0:
        raise AssertionError("zero variance with non-constant samples")
    stat, p = ks_test(std, var)
    return CltReport(observable, n, tuple(std), var, stat, p, False)


def variance_stabilization(records, lambda_hat, observable="kappa"):
    """Variance estimates from the final and the mid-horizon checkpoints.

    Returns (v_final, v_mid, ratio); the checkpoint nearest to half the
    horizon is used for the mid estimate."""
    cps, mat = observable_matrix(records, observable)
    n = int(cps[-1])
    mid_idx = int(np.argmin(np.abs(cps - n / 2)))
    if mid_idx == len(cps) - 1:
        raise ValueError("no interior checkpoint near half horizon")
    m = int(cps[mid_idx])
    v_final = float(((mat[:, -1] - n * lambda_hat) / math.sqrt(n)).var(ddof=1))
    v_mid = float(((mat[:, mid_idx] - m * lambda_hat) / math.sqrt(m)).var(ddof=1))
    ratio = math.inf if v_mid == 0 else v_final / v_mid
    return v_final, v_mid, ratio


# ---------------------------------------------------------------------------
# deviation curves

@dataclass(frozen=True)
class DeviationCurve:
    epsilon: float
    points: tuple                # ((n, empirical probability), ...)
    decay_rate_fit: float        # fitted per-step geometric rate
    summable: bool


def deviation_curve(records, lambda_hat, epsilon, n_grid, observable="kappa"):
    """Empirical P[|v_n - n*lambda| >= epsilon*n] on a sub-grid of the
    checkpoints, with a log-linear decay fit."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    cps, mat = observable_matrix(records, observable)
    pos = {int(c): i for i, c in enumerate(cps)}
    missing = [n for n in n_grid if int(n) not in pos]
    if missing:
        raise ValueError("grid points %r are not checkpoints" % missing)
    pts = []
    for n in n_grid:
        col = mat[:, pos[int(n)]]
        prob = float((np.abs(col - int(n) * lambda_hat) >= epsilon * int(n)).mean())
        pts.append((int(n), prob))
    xs = np.array([n for n, p in pts if p > 0], dtype=np.float64)
    ys = np.array([math.log(p) for _, p in pts if p > 0], dtype=np.float64)
    if len(xs) >= 2 and np.ptp(xs) > 0:
        slope = float(np.polyfit(xs, ys, 1)[0])
        rate = math.exp(slope)
    else:
        rate = 0.0
    return DeviationCurve(float(epsilon), tuple(pts), rate, rate < 1.0)


# ---------------------------------------------------------------------------
# kappa-sigma gap

@dataclass(frozen=True)
class GapReport:
    label: str
    horizon: int
    half_horizon: int
    sup_gaps: tuple              # per trial, over checkpoints <= horizon
    sup_gaps_half: tuple         # per trial, over checkpoints <= horizon/2
    quantiles: dict              # q -> (value at H, value at H/2)
    median_ratio: float          # median(H) / median(H/2); 1.0 when both 0

GAP_QUANTILES = (0.25, 0.5, 0.75, 0.9)


def kappa_sigma_gap(records, label):
    """Per-path sup over checkpoints of |kappa - sigma(., label)|, compared
    at the full and at the half horizon to diagnose boundedness."""
    if not records:
        raise ValueError("no records")
    if label not in records[0].sigma:
        raise ValueError("class %r was not tracked" % label)
    cps = np.asarray(records[0].checkpoints)
    H = int(cps[-1])
    half_mask = cps <= H // 2
    if not half_mask.any():
        raise ValueError("no checkpoints at or below half horizon")
    sup_full = []
    sup_half = []
    for r in records:
        gap = np.abs(np.asarray(r.kappa, dtype=np.float64)
                     - np.asarray(r.sigma[label], dtype=np.float64))
        sup_full.append(float(gap.max()))
        sup_half.append(float(gap[half_mask].max()))
    sf = np.array(sup_full)
    sh = np.array(sup_half)
    quants = {q: (float(np.quantile(sf, q)), float(np.quantile(sh, q)))
              for q in GAP_QUANTILES}
    mf, mh = quants[0.5]
    ratio = 1.0 if (mf == 0 and mh == 0) else (math.inf if mh == 0 else mf / mh)
    return GapReport(label, H, int(cps[half_mask][-1]), tuple(sup_full),
                     tuple(sup_half), quants, ratio)
