"""Marked metric roses and the asymmetric Lipschitz metric on them.

A point is a rose (wedge of N circles) with positive edge lengths summing
to one, together with a marking automorphism.  Distances come from White's
formula: d(T,U) = log max ‖c‖_U / ‖c‖_T over the finite candidate set of
T, where ‖.‖ is translation length.  Candidates on a rose are the loops
crossing each edge at most twice: single petals and two-petal figure
eights (barbells need two vertices, so they do not occur here).

Edge lengths are exact rationals end to end; the single floating-point
step in any distance is the final log of an exact ratio maximum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import freegroup as fg
from .freegroup import Automorphism, RankError

ENUMERATION_BOUND = 20_000_000


class ResourceLimitError(RuntimeError):
    """An operation would exceed its configured resource budget."""


def _as_fraction(x):
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        # exact binary value of the float; callers wanting exact decimals
        # should pass strings like "9/10"
        return Fraction(x)
    if isinstance(x, (tuple, list)) and len(x) == 2:
        return Fraction(int(x[0]), int(x[1]))
    raise TypeError("cannot interpret %r as an edge length" % (x,))


@dataclass(frozen=True)
class RosePoint:
    """A marked rose: edge lengths (exact rationals, summing to 1) plus a
    marking automorphism."""

    lengths: tuple
    marking: Automorphism

    def __post_init__(self):
        if len(self.lengths) != self.marking.rank:
            raise RankError("need one edge length per generator")
        if any(l <= 0 for l in self.lengths):
            raise ValueError("edge lengths must be positive")
        total = sum(self.lengths, Fraction(0))
        if total != 1:
            raise ValueError("edge lengths must sum to 1, got %s" % total)

    @property
    def rank(self):
        return self.marking.rank


def rose_point(lengths, marking=None, rank=None):
    """Build a RosePoint, coercing lengths to exact rationals.

    Float inputs are taken at their exact binary value; if the exact sum
    differs from 1 by at most 1e-12 the lengths are renormalized exactly,
    otherwise the input is rejected.
    """
    fracs = [_as_fraction(x) for x in lengths]
    if rank is None:
        rank = len(fracs)
    if marking is None:
        marking = Automorphism.identity(rank)
    total = sum(fracs, Fraction(0))
    if total != 1:
        if abs(float(total) - 1.0) > 1e-12:
            raise ValueError("edge lengths must sum to 1 (got %s)" % float(total))
        fracs = [x / total for x in fracs]
    return RosePoint(tuple(fracs), marking)


def unit_rose(rank, marking=None):
    """The basepoint o: all edges 1/N, identity marking unless given."""
    if marking is None:
        marking = Automorphism.identity(rank)
    return RosePoint(tuple(Fraction(1, rank) for _ in range(rank)), marking)


@lru_cache(maxsize=None)
def base_candidates(rank):
    """Petals a_i and figure eights a_i a_j^{±1} (i<j), as cyclic words."""
    out = [fg.as_word([i]) for i in range(1, rank + 1)]
    for i in range(1, rank + 1):
        for j in range(i + 1, rank + 1):
            out.append(fg.as_word([i, j]))
            out.append(fg.as_word([i, -j]))
    return tuple(out)


def candidate_set(point):
    """Candidates of a marked rose: the marking's image of the base list."""
    return tuple(fg.cyclic_word(point.marking.apply(c))
                 for c in base_candidates(point.rank))


def translation_length(g, point):
    """Exact translation length of the conjugacy class of g on the rose."""
    w = fg.reduce(g)
    fg.check_rank(w, point.rank)
    core, _ = fg.cyclic_reduce(point.marking.apply_inverse(w))
    counts = fg.occurrence_counts(core, point.rank)
    return sum((point.lengths[i] * int(counts[i]) for i in range(point.rank)),
               Fraction(0))


def max_stretch(t, u):
    """Exact max of ‖c‖_U / ‖c‖_T over candidates of T (White's formula)."""
    if t.rank != u.rank:
        raise RankError("points live in different ranks")
    best = None
    for c in candidate_set(t):
        num = translation_length(c, u)
        den = translation_length(c, t)
        r = num / den
        if best is None or r > best:
            best = r
    return best


def lipschitz_distance(t, u):
    """Asymmetric distance d(T,U) = log max_stretch(T,U); exact ratio, one log."""
    return math.log(max_stretch(t, u))


def sym_distance(t, u):
    return lipschitz_distance(t, u) + lipschitz_distance(u, t)


def act(phi, point):
    """Group action Phi.T := T.Phi^{-1} (marking precomposed with Phi^{-1})."""
    return RosePoint(point.lengths, fg.compose(phi, point.marking))


def kappa_stretch(phi):
    """Exact displacement ratio: max over base candidates of ‖Φ(w)‖/‖w‖."""
    best = None
    for w in base_candidates(phi.rank):
        num = fg.cyclic_length(phi.apply(w))
        den = len(w)  # base candidates are already cyclically reduced
        r = Fraction(num, den)
        if best is None or r > best:
            best = r
    return best


def kappa(phi):
    """Displacement of the basepoint: d(Phi.o, o) = log kappa_stretch(Phi)."""
    return math.log(kappa_stretch(phi))


def sigma_ratio(phi, g):
    """Exact length ratio ‖Φ(g)‖ / ‖g‖ for a nontrivial conjugacy class."""
    w = fg.reduce(g)
    den = fg.cyclic_length(w)
    if den == 0:
        raise ValueError("the trivial class has no length cocycle")
    num = fg.cyclic_length(phi.apply(w))
    return Fraction(num, den)


def length_cocycle(phi, g):
    """σ(Φ, g) = log(‖Φ(g)‖ / ‖g‖); satisfies σ(Φ∘Ψ,g) = σ(Φ,Ψg) + σ(Ψ,g)."""
    return math.log(sigma_ratio(phi, g))


# ---------------------------------------------------------------------------
# brute-force oracle: enumerate every conjugacy class up to a length bound
# and take the true supremum of the stretch ratio.  Kept deliberately
# independent of the candidate shortcut so the two can cross-check.


def _enumeration_count(rank, max_len):
    total = 0
    for L in range(1, max_len + 1):
        total += 2 * rank * (2 * rank - 1) ** (L - 1)
    return total


@lru_cache(maxsize=8)
def _necklace_blocks(rank, max_len):
    """Cyclically reduced conjugacy-class representatives, grouped by length.

    Returns a tuple of 2-D int8 arrays, one per word length; each row is the
    canonical rotation of one class.  Conjugates of a cyclically reduced word
    are exactly its rotations, so deduplicating rotations enumerates classes.
    """
    if _enumeration_count(rank, max_len) > ENUMERATION_BOUND:
        raise ResourceLimitError(
            "enumerating %d words exceeds the %d bound"
            % (_enumeration_count(rank, max_len), ENUMERATION_BOUND))
    gens = np.array([v for i in range(1, rank + 1) for v in (i, -i)],
                    dtype=np.int8)
    # next letters allowed after each letter (no immediate inverse)
    succ = {int(v): gens[gens != -v] for v in gens}
    blocks = []
    words = gens.reshape(-1, 1)
    for L in range(1, max_len + 1):
        if L > 1:
            # extend every word by each allowed next letter
            nxt = np.stack([succ[int(v)] for v in gens])  # (2N, 2N-1)
            last = words[:, -1]
            idx = ((np.abs(last).astype(np.intp) - 1) << 1) | (last < 0)
            ext = nxt[idx]  # (M, 2N-1)
            words = np.concatenate(
                [np.repeat(words, 2 * rank - 1, axis=0),
                 ext.reshape(-1, 1)], axis=1)
        cyc = words[words[:, 0] != -words[:, -1]] if L > 1 else words
        blocks.append(_dedup_rotations(cyc))
    return tuple(blocks)


def _dedup_rotations(words):
    """Keep one canonical rotation per row; rows are cyclically reduced."""
    m, L = words.shape
    if m == 0:
        return words
    codes = (((np.abs(words).astype(np.int64) - 1) << 1) | (words < 0))
    # pack each rotation into one integer, 5 bits per letter (L*5 <= 60)
    powers = 1 << (5 * np.arange(L - 1, -1, -1, dtype=np.int64))
    vals = None
    for r in range(L):
        v = codes[:, np.r_[r:L, 0:r]] @ powers
        vals = v if vals is None else np.minimum(vals, v)
    canon = np.unique(vals)
    # unpack the canonical values back into letter rows
    shifts = 5 * np.arange(L - 1, -1, -1, dtype=np.int64)
    c = (canon[:, None] >> shifts[None, :]) & 31
    letters = ((c >> 1) + 1) * np.where(c & 1, -1, 1)
    return letters.astype(np.int8)


def _reduce_with_ids(letters, ids):
    """Freely reduce many concatenated words at once; ids mark word
    membership and cancellation never crosses an id boundary."""
    while len(letters) >= 2:
        m = (letters[:-1] == -letters[1:]) & (ids[:-1] == ids[1:])
        idx = np.flatnonzero(m)
        if idx.size == 0:
            break
        is_start = np.empty(idx.size, dtype=bool)
        is_start[0] = True
        np.greater(idx[1:], idx[:-1] + 1, out=is_start[1:])
        anchor = np.where(is_start, idx, 0)
        np.maximum.accumulate(anchor, out=anchor)
        sel = idx[((idx - anchor) & 1) == 0]
        keep = np.ones(len(letters), dtype=bool)
        keep[sel] = False
        keep[sel + 1] = False
        letters = letters[keep]
        ids = ids[keep]
    return letters, ids


def _batch_weighted_cyclic(theta_inv, block, weights_num):
    """For each row w of block: weighted cyclic length of theta_inv(w).

    weights_num: integer numerators of the edge lengths over a common
    denominator.  Exact: returns an int64 vector of weighted cyclic lengths
    (times the common denominator).
    """
    m, L = block.shape
    flat_img, starts, lens = theta_inv._image_arrays(+1)
    letters_in = block.ravel()
    ids_in = np.repeat(np.arange(m, dtype=np.int64), L)
    codes = ((np.abs(letters_in).astype(np.intp) - 1) << 1) | (letters_in < 0)
    lens_pp = lens[codes]
    total = int(lens_pp.sum())
    ends = np.cumsum(lens_pp)
    pos = np.arange(total, dtype=np.int64)
    pos -= np.repeat(ends - lens_pp, lens_pp)
    pos += np.repeat(starts[codes], lens_pp)
    letters = flat_img[pos]
    ids = np.repeat(ids_in, lens_pp)
    letters, ids = _reduce_with_ids(letters, ids)

    wt = weights_num[np.abs(letters).astype(np.intp) - 1]
    single = np.bincount(ids, weights=wt, minlength=m).astype(np.int64)
    seg_len = np.bincount(ids, minlength=m)
    # double every segment: the reduction of w.w is s(cc)s^-1, so the
    # weighted cyclic part is weight(ww reduced) - weight(w reduced)
    seg_start = np.concatenate(([0], np.cumsum(seg_len)))[:-1]
    lens2 = 2 * seg_len
    total2 = int(lens2.sum())
    ends2 = np.cumsum(lens2)
    p = np.arange(total2, dtype=np.int64) - np.repeat(ends2 - lens2, lens2)
    seg_of = np.repeat(np.arange(m, dtype=np.int64), lens2)
    rel = np.where(p < seg_len[seg_of], p, p - seg_len[seg_of])
    letters2 = letters[seg_start[seg_of] + rel]
    letters2, ids2 = _reduce_with_ids(letters2, seg_of)
    wt2 = weights_num[np.abs(letters2).astype(np.intp) - 1]
    double = np.bincount(ids2, weights=wt2, minlength=m).astype(np.int64)
    return double - single


def brute_force_max_stretch(t, u, max_len):
    """Exact sup of ‖g‖_U/‖g‖_T over nontrivial classes with ‖g‖_T-core
    length ≤ max_len, by full enumeration (no candidate shortcut)."""
    if t.rank != u.rank:
        raise RankError("points live in different ranks")
    rank = t.rank
    blocks = _necklace_blocks(rank, max_len)
    # translate to T having identity marking (the action is by isometries)
    theta = fg.compose(t.marking.inverted(), u.marking)
    theta_inv = theta.inverted()

    den_t = math.lcm(*(l.denominator for l in t.lengths))
    num_t = np.array([int(l * den_t) for l in t.lengths], dtype=np.int64)
    den_u = math.lcm(*(l.denominator for l in u.lengths))
    num_u = np.array([int(l * den_u) for l in u.lengths], dtype=np.int64)

    best = None
    for block in blocks:
        m, L = block.shape
        if m == 0:
            continue
        counts = np.zeros((m, rank), dtype=np.int64)
        for i in range(1, rank + 1):
            counts[:, i - 1] = (np.abs(block) == i).sum(axis=1)
        t_len = counts @ num_t                       # times den_t
        u_len = _batch_weighted_cyclic(theta_inv, block, num_u)  # times den_u
        ratios = (u_len.astype(np.float64) * den_t) / (t_len.astype(np.float64) * den_u)
        top = float(ratios.max())
        near = np.flatnonzero(ratios >= top * (1.0 - 1e-9))
        for i in near:
            r = Fraction(int(u_len[i]) * den_t, int(t_len[i]) * den_u)
            if best is None or r > best:
                best = r
    return best


def brute_force_distance_oracle(t, u, max_len):
    """log of brute_force_max_stretch; an enumeration oracle for White's
    formula, monotone in max_len and equal to lipschitz_distance once
    max_len covers the candidate lengths."""
    return math.log(brute_force_max_stretch(t, u, max_len))
