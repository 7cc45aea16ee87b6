"""Exact algebra in the free group F_N.

Words are 1-D numpy arrays of signed letters: +i encodes the i-th basis
letter, -i its inverse, with 1 <= i <= rank <= 16 (so a letter always fits
in one signed byte).  The string form uses "a".."p" for positive letters
and "A".."P" for their inverses, e.g. "abA" is a * b * a^-1.

Every function that returns a word returns it freely reduced and marked
read-only; words are values, never mutated in place.
"""

from __future__ import annotations

import re

import numpy as np

MAX_RANK = 16
LETTER_DTYPE = np.int8

_EMPTY = np.zeros(0, dtype=LETTER_DTYPE)
_EMPTY.flags.writeable = False

# below this size the plain-Python paths beat numpy call overhead
_SMALL = 64


class RankError(ValueError):
    """A letter falls outside the stated rank, or operand ranks disagree."""


def _freeze(arr):
    arr.flags.writeable = False
    return arr


def as_word(letters):
    """Coerce to a letter array without reducing; validates letter values."""
    w = np.asarray(letters, dtype=LETTER_DTYPE)
    if w.ndim != 1:
        raise ValueError("a word must be one-dimensional")
    if w.size and (np.abs(w) < 1).any():
        raise ValueError("letter 0 is not a generator")
    if w.size and int(np.abs(w).max()) > MAX_RANK:
        raise RankError("letters beyond rank %d are not supported" % MAX_RANK)
    if w.flags.writeable:
        w = w.copy()
    return _freeze(w)


def check_rank(w, rank):
    if not 2 <= rank <= MAX_RANK:
        raise RankError("rank must lie in [2, %d], got %r" % (MAX_RANK, rank))
    if len(w) and int(np.abs(w).max()) > rank:
        raise RankError("word uses letters beyond rank %d" % rank)


def parse_word(text):
    """Parse a word literal like "abA" into a reduced letter array."""
    out = []
    for ch in text:
        if "a" <= ch <= "p":
            out.append(ord(ch) - ord("a") + 1)
        elif "A" <= ch <= "P":
            out.append(-(ord(ch) - ord("A") + 1))
        else:
            raise ValueError("bad letter %r in word literal %r" % (ch, text))
    return reduce(out)


def format_word(w):
    """Inverse of parse_word; the empty word renders as ""."""
    chars = []
    for v in np.asarray(w):
        v = int(v)
        if v > 0:
            chars.append(chr(ord("a") + v - 1))
        else:
            chars.append(chr(ord("A") - v - 1))
    return "".join(chars)


def _reduce_list(letters):
    # classic stack reduction, linear time
    stack = []
    for v in letters:
        if stack and stack[-1] == -v:
            stack.pop()
        else:
            stack.append(v)
    return stack


def _cancel_pass(w):
    # one vectorized round: drop a maximal non-overlapping set of adjacent
    # inverse pairs; repeating to a fixed point yields the reduced word
    # (free reduction is confluent, so the order of cancellations is free).
    m = w[:-1] == -w[1:]
    idx = np.flatnonzero(m)
    if idx.size == 0:
        return w, False
    is_start = np.empty(idx.size, dtype=bool)
    is_start[0] = True
    np.greater(idx[1:], idx[:-1] + 1, out=is_start[1:])
    anchor = np.where(is_start, idx, 0)
    np.maximum.accumulate(anchor, out=anchor)
    sel = idx[((idx - anchor) & 1) == 0]
    keep = np.ones(len(w), dtype=bool)
    keep[sel] = False
    keep[sel + 1] = False
    return w[keep], True


def reduce(letters):
    """Freely reduce a letter sequence."""
    if isinstance(letters, np.ndarray) and letters.dtype == LETTER_DTYPE:
        w = letters
    else:
        w = as_word(letters)
    if len(w) < 2:
        return _freeze(w.copy()) if w.flags.writeable else w
    if len(w) <= _SMALL:
        return _freeze(np.array(_reduce_list(w.tolist()), dtype=LETTER_DTYPE))
    changed = True
    while changed and len(w) >= 2:
        w, changed = _cancel_pass(w)
    return _freeze(w) if w.flags.writeable else _freeze(w.copy())


def is_reduced(w):
    w = np.asarray(w)
    return len(w) < 2 or not (w[:-1] == -w[1:]).any()


def inverse(w):
    return _freeze((-np.asarray(w, dtype=LETTER_DTYPE))[::-1].copy())


def concat(*words):
    """Reduced product of already-reduced words."""
    parts = [np.asarray(w, dtype=LETTER_DTYPE) for w in words if len(w)]
    if not parts:
        return _EMPTY
    return reduce(np.concatenate(parts))


def common_prefix_len(u, v):
    u = np.asarray(u)
    v = np.asarray(v)
    n = min(len(u), len(v))
    if n == 0:
        return 0
    neq = u[:n] != v[:n]
    hit = np.flatnonzero(neq)
    return int(hit[0]) if hit.size else n


def cyclic_reduce(w):
    """Split reduced w as (cyclic part, conjugator): w = s * c * s^-1."""
    w = np.asarray(w, dtype=LETTER_DTYPE)
    half = len(w) // 2
    k = 0
    if half:
        eq = w[:half] == -w[::-1][:half]
        bad = np.flatnonzero(~eq)
        k = int(bad[0]) if bad.size else half
        # a reduced word cannot cancel across its own midpoint
        if 2 * k == len(w):
            raise ValueError("input word is not freely reduced")
    core = w[k:len(w) - k]
    return _freeze(core.copy()), _freeze(w[:k].copy())


def cyclic_length(w):
    """Length of the cyclic reduction; conjugation-invariant."""
    core, _ = cyclic_reduce(w)
    return len(core)


def letter_code(v):
    # total order a1 < a1^-1 < a2 < a2^-1 < ... used for canonical rotations
    return ((abs(v) - 1) << 1) | (v < 0)


def _codes(w):
    w = np.asarray(w, dtype=np.int64)
    return ((np.abs(w) - 1) << 1) | (w < 0)


def _least_rotation(codes):
    # Booth's algorithm; returns the start index of the least rotation
    s = codes + codes
    n2 = len(s)
    f = [-1] * n2
    k = 0
    for j in range(1, n2):
        sj = s[j]
        i = f[j - k - 1]
        while i != -1 and sj != s[k + i + 1]:
            if sj < s[k + i + 1]:
                k = j - i - 1
            i = f[i]
        if sj != s[k + i + 1]:
            if sj < s[k]:
                k = j
            f[j - k] = -1
        else:
            f[j - k] = i + 1
    return k


def canonical_rotation(w):
    """Lexicographically least rotation of a cyclically reduced word."""
    w = np.asarray(w, dtype=LETTER_DTYPE)
    if len(w) < 2:
        return _freeze(w.copy())
    if len(w) and w[0] == -w[-1]:
        raise ValueError("word is not cyclically reduced")
    r = _least_rotation([letter_code(int(v)) for v in w])
    return _freeze(np.concatenate((w[r:], w[:r])))


def cyclic_word(w):
    """Canonical representative of the conjugacy class of w."""
    core, _ = cyclic_reduce(reduce(w))
    return canonical_rotation(core)


def word_key(w):
    """Hashable identity for a word (bytes of its letters)."""
    return np.asarray(w, dtype=LETTER_DTYPE).tobytes()


def occurrence_counts(w, rank):
    """Counts of a_i^{+1} plus a_i^{-1} occurrences, indexed 0..rank-1."""
    w = np.asarray(w)
    return np.bincount(np.abs(w).astype(np.intp), minlength=rank + 1)[1:rank + 1]


def random_reduced_word(rng, rank, length):
    """Uniform reduced word of exactly the given length."""
    if length == 0:
        return _EMPTY
    letters = np.empty(length, dtype=LETTER_DTYPE)
    gens = np.array([g for i in range(1, rank + 1) for g in (i, -i)],
                    dtype=LETTER_DTYPE)
    letters[0] = gens[rng.integers(2 * rank)]
    for k in range(1, length):
        choices = gens[gens != -letters[k - 1]]
        letters[k] = choices[rng.integers(2 * rank - 1)]
    return _freeze(letters)


# ---------------------------------------------------------------------------
# automorphisms

_TRACE_RE = re.compile(r"^(R|L):(\d+):(\d+):([+-])$|^(I):(\d+)$|^(T):(\d+):(\d+)$")


class Automorphism:
    """An automorphism of F_N assembled from elementary moves.

    Instances always carry both directions (forward and inverse images of
    the basis) plus the trace of elementary moves that built them, so
    inversion is free and never requires a decision procedure.
    """

    __slots__ = ("rank", "forward", "inverse", "trace",
                 "_tables", "_inv_tables", "_inverted")

    def __init__(self, rank, forward, inverse, trace=()):
        if not 2 <= rank <= MAX_RANK:
            raise RankError("rank must lie in [2, %d]" % MAX_RANK)
        if len(forward) != rank or len(inverse) != rank:
            raise ValueError("need one image per basis letter")
        self.rank = rank
        self.forward = tuple(as_word(w) for w in forward)
        self.inverse = tuple(as_word(w) for w in inverse)
        self.trace = tuple(trace)
        for w in self.forward + self.inverse:
            check_rank(w, rank)
        self._tables = None
        self._inv_tables = None
        self._inverted = None
        if __debug__:
            self._verify_round_trip()

    # The round trip gathers an inverse image for every letter of every
    # forward image, so its cost is quadratic in image size.  Composites of
    # long random walks reach millions of letters per image; past this work
    # budget the check is skipped and correctness rests on the constructors.
    _VERIFY_BUDGET = 1 << 22

    def _verify_round_trip(self):
        total = sum(len(w) for w in self.forward)
        widest = max(len(w) for w in self.inverse)
        if total * max(widest, 1) > self._VERIFY_BUDGET:
            return
        for i in range(1, self.rank + 1):
            img = _apply_images(self.inverse, self.forward[i - 1])
            if len(img) != 1 or int(img[0]) != i:
                raise ValueError("forward and inverse images do not invert "
                                 "each other at a_%d" % i)

    # -- identity / elementary constructors

    @classmethod
    def identity(cls, rank):
        basis = [np.array([i], dtype=LETTER_DTYPE) for i in range(1, rank + 1)]
        return cls(rank, basis, list(basis), trace=())

    def is_identity(self):
        return all(len(w) == 1 and int(w[0]) == i + 1
                   for i, w in enumerate(self.forward))

    def __repr__(self):
        imgs = "; ".join("%s>%s" % (format_word([i + 1]), format_word(w))
                         for i, w in enumerate(self.forward))
        return "<Automorphism %s>" % imgs

    def literal(self):
        """Display form "a>ab; b>b"."""
        return "; ".join("%s>%s" % (format_word([i + 1]), format_word(w) or "")
                         for i, w in enumerate(self.forward))

    def __eq__(self, other):
        return (isinstance(other, Automorphism)
                and self.rank == other.rank
                and all(np.array_equal(a, b)
                        for a, b in zip(self.forward, other.forward)))

    def __hash__(self):
        return hash((self.rank,) + tuple(word_key(w) for w in self.forward))

    # -- application

    def _image_lists(self, direction):
        images = self.forward if direction > 0 else self.inverse
        table = []
        for i in range(self.rank):
            table.append(images[i].tolist())
            table.append((-images[i][::-1]).tolist())
        return table

    def _image_arrays(self, direction):
        images = self.forward if direction > 0 else self.inverse
        rows = []
        for i in range(self.rank):
            rows.append(images[i])
            rows.append(-images[i][::-1])
        lens = np.array([len(r) for r in rows], dtype=np.int64)
        flat = (np.concatenate(rows) if lens.sum()
                else np.zeros(0, dtype=LETTER_DTYPE))
        starts = np.concatenate(([0], np.cumsum(lens)))[:-1]
        return flat, starts, lens

    def _get_tables(self, direction):
        slot = "_tables" if direction > 0 else "_inv_tables"
        cached = getattr(self, slot)
        if cached is None:
            cached = (self._image_lists(direction),
                      self._image_arrays(direction))
            setattr(self, slot, cached)
        return cached

    def _apply_dir(self, w, direction):
        w = np.asarray(w, dtype=LETTER_DTYPE)
        if len(w) and int(np.abs(w).max()) > self.rank:
            raise RankError("word uses letters beyond rank %d" % self.rank)
        if len(w) == 0:
            return _EMPTY
        lists, (flat, starts, lens) = self._get_tables(direction)
        if len(w) <= _SMALL:
            out = []
            for v in w.tolist():
                out.extend(lists[((v if v > 0 else -v) - 1) * 2 + (v < 0)])
            return _freeze(np.array(_reduce_list(out), dtype=LETTER_DTYPE))
        codes = ((np.abs(w).astype(np.intp) - 1) << 1) | (w < 0)
        lens_pp = lens[codes]
        total = int(lens_pp.sum())
        ends = np.cumsum(lens_pp)
        # ragged gather: out[k] = flat[starts[code of its source letter] + offset]
        pos = np.arange(total, dtype=np.int64)
        pos -= np.repeat(ends - lens_pp, lens_pp)
        pos += np.repeat(starts[codes], lens_pp)
        return reduce(flat[pos])

    def apply(self, w):
        """Image of the word under the automorphism (reduced)."""
        return self._apply_dir(w, +1)

    def apply_inverse(self, w):
        return self._apply_dir(w, -1)

    def __call__(self, w):
        return self.apply(w)

    def inverted(self):
        """The inverse automorphism; trace stays a valid elementary trace."""
        if self._inverted is None:
            inv = Automorphism(self.rank, self.inverse, self.forward,
                               trace=tuple(invert_move(t)
                                           for t in reversed(self.trace)))
            inv._inverted = self
            self._inverted = inv
        return self._inverted


def _apply_images(images, w):
    out = []
    for v in np.asarray(w).tolist():
        img = images[abs(v) - 1]
        if v > 0:
            out.extend(img.tolist())
        else:
            out.extend((-img[::-1]).tolist())
    return np.array(_reduce_list(out), dtype=LETTER_DTYPE)


def elementary(move, rank):
    """Build an elementary automorphism of F_rank from a move id.

    Move ids:
      "R:i:j:+"  a_i -> a_i a_j        "R:i:j:-"  a_i -> a_i a_j^-1
      "L:i:j:+"  a_i -> a_j a_i        "L:i:j:-"  a_i -> a_j^-1 a_i
      "I:i"      a_i -> a_i^-1
      "T:i:j"    swap a_i and a_j
    Indices are 1-based and i != j is required for the multiply kinds.
    """
    m = _TRACE_RE.match(move)
    if not m:
        raise ValueError("bad elementary move id %r" % move)
    basis = [np.array([i], dtype=LETTER_DTYPE) for i in range(1, rank + 1)]
    fwd = list(basis)
    inv = list(basis)

    def _check(i, j=None):
        if not 1 <= i <= rank or (j is not None and not 1 <= j <= rank):
            raise RankError("move %r does not fit rank %d" % (move, rank))

    if m.group(1):  # R or L
        kind, i, j = m.group(1), int(m.group(2)), int(m.group(3))
        sign = 1 if m.group(4) == "+" else -1
        _check(i, j)
        if i == j:
            raise ValueError("multiply moves need i != j, got %r" % move)
        if kind == "R":
            fwd[i - 1] = as_word([i, sign * j])
            inv[i - 1] = as_word([i, -sign * j])
        else:
            fwd[i - 1] = as_word([sign * j, i])
            inv[i - 1] = as_word([-sign * j, i])
    elif m.group(5):  # I
        i = int(m.group(6))
        _check(i)
        fwd[i - 1] = as_word([-i])
        inv[i - 1] = as_word([-i])
    else:  # T
        i, j = int(m.group(8)), int(m.group(9))
        _check(i, j)
        fwd[i - 1], fwd[j - 1] = basis[j - 1], basis[i - 1]
        inv[i - 1], inv[j - 1] = basis[j - 1], basis[i - 1]
    return Automorphism(rank, fwd, inv, trace=(move,))


def invert_move(move):
    m = _TRACE_RE.match(move)
    if not m:
        raise ValueError("bad elementary move id %r" % move)
    if m.group(1):
        flip = {"+": "-", "-": "+"}[m.group(4)]
        return "%s:%s:%s:%s" % (m.group(1), m.group(2), m.group(3), flip)
    return move  # inversions and transpositions are involutions


def compose(phi, psi):
    """The composite phi after psi: (compose(phi, psi))(w) = phi(psi(w))."""
    if phi.rank != psi.rank:
        raise RankError("cannot compose automorphisms of different rank")
    fwd = [phi.apply(w) for w in psi.forward]
    inv = [psi.apply_inverse(w) for w in phi.inverse]
    return Automorphism(phi.rank, fwd, inv, trace=psi.trace + phi.trace)


def invert(phi):
    return phi.inverted()


def from_trace(rank, moves):
    """Compose elementary moves left to right: the last move acts last."""
    phi = Automorphism.identity(rank)
    for mv in moves:
        phi = compose(elementary(mv, rank), phi)
    return phi


def random_automorphism(rng, rank, n_moves):
    """Random composition of elementary moves (for tests and probes)."""
    moves = []
    kinds = ("R", "L", "I", "T")
    for _ in range(n_moves):
        kind = kinds[rng.integers(4)]
        i = int(rng.integers(1, rank + 1))
        if kind in ("R", "L"):
            j = int(rng.integers(1, rank))
            if j >= i:
                j += 1
            sign = "+" if rng.integers(2) else "-"
            moves.append("%s:%d:%d:%s" % (kind, i, j, sign))
        elif kind == "I":
            moves.append("I:%d" % i)
        else:
            j = int(rng.integers(1, rank))
            if j >= i:
                j += 1
            moves.append("T:%d:%d" % (i, j))
    return from_trace(rank, moves)
