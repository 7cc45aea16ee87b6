"""The Cayley tree of F_N as an exactly-computable hyperbolic model.

Vertices are reduced words, the boundary is the space of infinite reduced
words, and delta = 0: Gromov products are common-prefix lengths, so every
coarse inequality of hyperbolic geometry here is an exact integer identity.
Boundary points come in two flavors: eventually periodic (exact, supports
the group action) and truncated (a certified finite prefix of an otherwise
unknown point, as produced by sampled random walks).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from . import freegroup as fg


class DepthError(ValueError):
    """A truncated boundary point is too shallow to decide the query."""


class _InfiniteProduct:
    """Tagged infinity returned by gromov_product on equal boundary points."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "InfiniteProduct"

    def __bool__(self):
        return True


INFINITE = _InfiniteProduct()


def is_infinite(x):
    return x is INFINITE


class BoundaryPoint:
    """A point of the tree boundary: an infinite reduced letter stream.

    Either eventually periodic (preperiod u then period p repeated forever,
    exact) or truncated (only the first certified_depth letters are known).
    """

    __slots__ = ("preperiod", "period", "prefix", "depth")

    def __init__(self, *, preperiod=None, period=None, prefix=None, depth=None):
        self.preperiod = preperiod
        self.period = period
        self.prefix = prefix
        self.depth = depth

    # -- constructors

    @classmethod
    def periodic(cls, preperiod, period):
        pre = fg.as_word(preperiod)
        per = fg.as_word(period)
        if len(per) == 0:
            raise ValueError("period must be nonempty")
        if not fg.is_reduced(pre) or not fg.is_reduced(per):
            raise ValueError("preperiod and period must be reduced")
        if per[0] == -per[-1]:
            raise ValueError("period must be cyclically reduced")
        if len(pre) and pre[-1] == -per[0]:
            raise ValueError("preperiod does not join the period reducedly")
        return cls(preperiod=pre, period=per)

    @classmethod
    def truncated(cls, prefix, certified_depth=None):
        pre = fg.as_word(prefix)
        if not fg.is_reduced(pre):
            raise ValueError("prefix must be reduced")
        if certified_depth is None:
            certified_depth = len(pre)
        if not 0 <= certified_depth <= len(pre):
            raise ValueError("certified depth must lie in [0, len(prefix)]")
        # only the certified letters are kept; the rest are unreliable
        return cls(prefix=fg.as_word(pre[:certified_depth]),
                   depth=int(certified_depth))

    @property
    def is_periodic(self):
        return self.period is not None

    @property
    def certified_depth(self):
        """Letters known for certain; None means all of them (periodic)."""
        return None if self.is_periodic else self.depth

    def letter(self, k):
        """The k-th letter (0-based) of the stream."""
        if self.is_periodic:
            if k < len(self.preperiod):
                return int(self.preperiod[k])
            return int(self.period[(k - len(self.preperiod)) % len(self.period)])
        if k >= self.depth:
            raise DepthError("letter %d beyond certified depth %d" % (k, self.depth))
        return int(self.prefix[k])

    def letters(self, n):
        """First n letters as an array (n within certified depth)."""
        if self.is_periodic:
            reps = 0 if n <= len(self.preperiod) else (
                (n - len(self.preperiod)) // len(self.period) + 1)
            full = np.concatenate([self.preperiod] + [self.period] * reps) \
                if reps else self.preperiod
            return full[:n]
        if n > self.depth:
            raise DepthError("need %d letters, certified only %d" % (n, self.depth))
        return self.prefix[:n]

    def __repr__(self):
        if self.is_periodic:
            return "<Boundary %s(%s)^inf>" % (fg.format_word(self.preperiod),
                                              fg.format_word(self.period))
        return "<Boundary %s... depth %d>" % (fg.format_word(self.prefix), self.depth)


_BD_PERIODIC = re.compile(r"^\s*(?:pre:(\S*)\s+)?per:(\S+)\s*$")
_BD_TRUNC = re.compile(r"^\s*prefix:(\S+)(?:\s+depth:(\d+))?\s*$")


def parse_boundary(text):
    """Parse "per:ab", "pre:a per:ba", or "prefix:abab depth:4"."""
    m = _BD_PERIODIC.match(text)
    if m:
        pre = fg.parse_word(m.group(1) or "")
        return BoundaryPoint.periodic(pre, fg.parse_word(m.group(2)))
    m = _BD_TRUNC.match(text)
    if m:
        depth = int(m.group(2)) if m.group(2) else None
        return BoundaryPoint.truncated(fg.parse_word(m.group(1)), depth)
    raise ValueError("bad boundary literal %r" % text)


def format_boundary(xi):
    if xi.is_periodic:
        if len(xi.preperiod):
            return "pre:%s per:%s" % (fg.format_word(xi.preperiod),
                                      fg.format_word(xi.period))
        return "per:%s" % fg.format_word(xi.period)
    return "prefix:%s depth:%d" % (fg.format_word(xi.prefix), xi.depth)


# ---------------------------------------------------------------------------
# metric structure

def tree_distance(u, v):
    """d(u, v) = |u| + |v| - 2 * (common prefix length); exact."""
    u = fg.reduce(u)
    v = fg.reduce(v)
    c = fg.common_prefix_len(u, v)
    return len(u) + len(v) - 2 * c


def _stream_prefix_with_word(w, xi):
    """Common prefix length of a finite word with a boundary stream.

    Raises DepthError when xi is truncated and agrees with w up to its whole
    certified depth with w still unfinished."""
    limit = len(w)
    if not xi.is_periodic and xi.depth < limit:
        head = xi.prefix
        c = fg.common_prefix_len(w[:xi.depth], head)
        if c < xi.depth:
            return c
        raise DepthError("match reaches certified depth %d of a truncated "
                         "boundary point" % xi.depth)
    head = xi.letters(limit)
    return fg.common_prefix_len(w, head)


def _stream_prefix_pair(x, y):
    """Common prefix of two boundary streams; INFINITE if equal."""
    if x.is_periodic and y.is_periodic:
        # Fine and Wilf: two streams that are periodic beyond m with periods
        # p, q and agree on m + p + q letters agree everywhere.
        bound = max(len(x.preperiod), len(y.preperiod)) \
            + len(x.period) + len(y.period)
        a = x.letters(bound)
        b = y.letters(bound)
        c = fg.common_prefix_len(a, b)
        return INFINITE if c == bound else c
    dx = x.certified_depth
    dy = y.certified_depth
    bound = min(d for d in (dx, dy) if d is not None)
    a = x.letters(bound)
    b = y.letters(bound)
    c = fg.common_prefix_len(a, b)
    if c == bound:
        raise DepthError("boundary points agree through certified depth %d; "
                         "product undecidable" % bound)
    return c


def gromov_product(x, y):
    """(x|y)_o: common-prefix length; accepts words and boundary points.

    Equal boundary points give the tagged INFINITE, never a number."""
    bx = isinstance(x, BoundaryPoint)
    by = isinstance(y, BoundaryPoint)
    if not bx and not by:
        u = fg.reduce(x)
        v = fg.reduce(y)
        return fg.common_prefix_len(u, v)
    if bx and by:
        return _stream_prefix_pair(x, y)
    if bx:
        return _stream_prefix_with_word(fg.reduce(y), x)
    return _stream_prefix_with_word(fg.reduce(x), y)


def gromov_product_via_distances(u, v):
    """Definition-level product for finite points: (u|v) = ½(|u|+|v|-d(u,v))."""
    u = fg.reduce(u)
    v = fg.reduce(v)
    return _half_int(len(u) + len(v) - tree_distance(u, v))


def _half_int(n):
    # products and residuals in a tree are integers; keep them that way
    if n % 2:
        raise AssertionError("odd doubled quantity in a tree identity")
    return n // 2


def horofunction_value(xi, z):
    """h_xi(z) = |z| - 2 (z|xi): the Busemann horofunction at xi."""
    z = fg.reduce(z)
    return len(z) - 2 * gromov_product(z, xi)


def busemann(g, xi):
    """β(g, xi) = h_xi(g^{-1} o) = |g| - 2 (g^{-1}|xi); exact integer."""
    g = fg.reduce(g)
    return len(g) - 2 * gromov_product(fg.inverse(g), xi)


def gromov_product_via_horofunctions(x, y, *, probe=None):
    """(x|y)_o as -½ inf_z (h_x(z) + h_y(z)).

    The infimum over the whole tree is attained on the geodesic joining x
    and y; we scan z along that geodesic (plus any extra probe points) and
    return both the value and the minimizing z."""
    c = gromov_product(x, y)
    if is_infinite(c):
        raise ValueError("equal boundary points have no finite product")
    xw = x.letters(c) if isinstance(x, BoundaryPoint) else fg.reduce(x)[:c]
    best = None
    best_z = None
    candidates = [xw[:k] for k in range(c + 1)]
    # continue past the branch point toward each end a little
    for side in (x, y):
        try:
            ext = side.letters(c + 2) if isinstance(side, BoundaryPoint) \
                else fg.reduce(side)[:c + 2]
        except DepthError:
            continue
        for k in range(c + 1, len(ext) + 1):
            candidates.append(ext[:k])
    if probe is not None:
        candidates.extend(probe)
    for z in candidates:
        val = horofunction_value(x, z) + horofunction_value(y, z)
        if best is None or val < best:
            best = val
            best_z = z
    return _half_int(-best), best_z


def boundary_action(g, xi):
    """g . xi: prepend g to the stream and reduce the seam exactly."""
    g = fg.reduce(g)
    ginv = fg.inverse(g)
    if xi.is_periodic:
        k = gromov_product(ginv, xi)  # cancellation depth, <= |g|
        head = g[:len(g) - k]
        pre, per = xi.preperiod, xi.period
        if k <= len(pre):
            new_pre = np.concatenate((head, pre[k:]))
            new_per = per
        else:
            j = (k - len(pre)) % len(per)
            new_per = np.concatenate((per[j:], per[:j]))
            new_pre = head
        return BoundaryPoint.periodic(new_pre, new_per)
    k = gromov_product(ginv, xi)  # raises DepthError when undecidable
    head = g[:len(g) - k]
    new_prefix = np.concatenate((head, xi.prefix[k:]))
    return BoundaryPoint.truncated(new_prefix, len(g) - k + xi.depth - k)


def tracking_distance(w, xi):
    """Distance from the vertex w to the ray [o, xi) = |w| - (w|xi)."""
    w = fg.reduce(w)
    return len(w) - gromov_product(w, xi)


# ---------------------------------------------------------------------------
# exact identity checks

@dataclass(frozen=True)
class IdentityReport:
    residual_image: int   # (go|g.xi) - ½(kappa(g) + beta(g, xi))
    residual_base: int    # (go|xi)   - ½(kappa(g) - beta(g^{-1}, xi))

    @property
    def exact(self):
        return self.residual_image == 0 and self.residual_base == 0


def lemma_identities_check(g, xi):
    """Residuals of the two basic horofunction identities; both must be 0
    in a tree (delta = 0)."""
    g = fg.reduce(g)
    kappa = len(g)  # d(g o, o) in the tree
    b_fwd = busemann(g, xi)
    b_bwd = busemann(fg.inverse(g), xi)
    gx = boundary_action(g, xi)
    p_image = gromov_product(g, gx)
    p_base = gromov_product(g, xi)
    r1 = 2 * p_image - (kappa + b_fwd)
    r2 = 2 * p_base - (kappa - b_bwd)
    return IdentityReport(_half_int(r1), _half_int(r2))


def corollary_bound_slack(g, x, y):
    """Slack of max(β(g,x), β(g,y)) ≥ κ(g) - 2 (x|y): nonnegative, and zero
    for some |g| ≤ (x|y) (a prefix of the common part is a witness)."""
    c = gromov_product(x, y)
    if is_infinite(c):
        raise ValueError("x and y must be distinct boundary points")
    g = fg.reduce(g)
    m = max(busemann(g, x), busemann(g, y))
    return m - (len(g) - 2 * c)


def four_point_slack(x, y, z):
    """(x|y) - min((x|z), (y|z)); nonnegative in a tree (delta = 0)."""
    pxy = gromov_product(x, y)
    pxz = gromov_product(x, z)
    pyz = gromov_product(y, z)
    if any(is_infinite(p) for p in (pxy, pxz, pyz)):
        raise ValueError("degenerate triple with coinciding boundary points")
    return pxy - min(pxz, pyz)


# ---------------------------------------------------------------------------
# statistical estimators on the boundary

@dataclass(frozen=True)
class PsiEstimate:
    value: float
    std_error: float
    n_samples: int


def psi_estimate(x, boundary_samples):
    """Monte Carlo ψ(x) = -2 E[(x|y)] over boundary samples y."""
    if not boundary_samples:
        raise ValueError("need at least one boundary sample")
    vals = np.array([float(gromov_product(x, y)) for y in boundary_samples])
    se = 2.0 * vals.std(ddof=1) / math.sqrt(len(vals)) if len(vals) > 1 else 0.0
    return PsiEstimate(-2.0 * float(vals.mean()), se, len(vals))


@dataclass(frozen=True)
class CenteringReport:
    lambda_hat: float
    lambda_se: float
    estimates: dict          # label -> (estimate, std_error)
    max_pair_discrepancy: float
    max_drift_discrepancy_se: float  # max |estimate - lambda_hat| / combined SE


def centering_check(mu, x_points, records, lambda_hat=None, lambda_se=None):
    """Estimate E_mu[β₀(·, x)] = E_mu[β(·,x) + ψ(g.x) - ψ(x)] at each x.

    Boundary samples for ψ are the limit points of the supplied tree-mode
    walk records, which also provide the drift estimate unless one is
    passed in.  For a centerable cocycle every estimate matches the drift.
    """
    if len(mu.atoms) and not isinstance(mu.atoms[0], np.ndarray):
        raise ValueError("centering_check needs a tree-mode (word) measure")
    ys = [r.bnd for r in records if r.bnd is not None and r.bnd.depth > 0]
    if not ys:
        raise ValueError("no usable boundary samples (walks too short?)")
    horizon = int(records[0].checkpoints[-1])
    if lambda_hat is None:
        ends = np.array([float(r.kappa[-1]) for r in records])
        lambda_hat = float(ends.mean()) / horizon
        lambda_se = float(ends.std(ddof=1)) / math.sqrt(len(ends)) / horizon

    labels = []
    results = {}
    max_drift_disc = 0.0
    means = []
    for x in x_points:
        label = format_boundary(x)
        labels.append(label)
        const = 0.0
        per_sample = np.zeros(len(ys))
        for atom, weight in zip(mu.atoms, mu.weights):
            const += weight * busemann(atom, x)
            sx = boundary_action(atom, x)
            per_sample += weight * (-2.0) * np.array(
                [float(gromov_product(sx, y)) for y in ys])
        per_sample += 2.0 * np.array([float(gromov_product(x, y)) for y in ys])
        est = const + float(per_sample.mean())
        se = float(per_sample.std(ddof=1)) / math.sqrt(len(ys))
        results[label] = (est, se)
        means.append(est)
        comb = math.sqrt(se ** 2 + lambda_se ** 2)
        if comb > 0:
            max_drift_disc = max(max_drift_disc, abs(est - lambda_hat) / comb)
    spread = max(means) - min(means) if means else 0.0
    return CenteringReport(lambda_hat, lambda_se, results, spread, max_drift_disc)


@dataclass(frozen=True)
class TailCurve:
    alpha: float
    points: tuple            # ((n, empirical probability), ...)
    decay_rate: float        # fitted geometric rate per unit threshold
    summable: bool


def _product_lower_value(x, y):
    # tail counting needs a number; an equal or undecidable pair still
    # certifies "at least this deep", which is what a tail query consumes
    try:
        p = gromov_product(x, y)
    except DepthError:
        dx = x.certified_depth if isinstance(x, BoundaryPoint) else None
        dy = y.certified_depth if isinstance(y, BoundaryPoint) else None
        return float(min(d for d in (dx, dy) if d is not None))
    return math.inf if is_infinite(p) else float(p)


def h2_tail_estimate(x, boundary_samples, alpha, n_grid):
    """Empirical tail P[(x|y) >= alpha * n] over boundary samples, with a
    fitted geometric decay rate (per unit of product threshold)."""
    prods = np.array([_product_lower_value(x, y) for y in boundary_samples])
    pts = []
    for n in n_grid:
        pts.append((int(n), float((prods >= alpha * n).mean())))
    xs = np.array([n for n, p in pts if p > 0], dtype=float)
    ys = np.array([math.log(p) for _, p in pts if p > 0])
    if len(xs) >= 2:
        slope = float(np.polyfit(xs, ys, 1)[0])
        rate = math.exp(slope / alpha)
    else:
        rate = 0.0
    return TailCurve(float(alpha), tuple(pts), rate, rate < 1.0)
