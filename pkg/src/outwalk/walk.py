"""Deterministic Monte Carlo driver for left random walks.

Two modes share one engine.  Outer mode walks on the automorphism group,
composing increments on the left (Phi_n = s_n . Phi_{n-1}) and tracking
exact word images of the candidate loops and of user-chosen conjugacy
classes.  Tree mode walks on the free group itself and tracks the walk
position in the Cayley tree together with Busemann values toward tracked
boundary points.

Reproducibility contract: increments for trial t are drawn from a Philox
counter-based stream keyed by (master_seed, t), so every trial is an
independent pure function of (measure, config, trial index).  Records are
therefore identical whatever the worker count or execution order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.random import Philox

from . import freegroup as fg
from . import rose
from . import tree as treemod

DEFAULT_WORD_CAP = 2 ** 24
SPOT_CHECK_RATE = 0.01


class WordCapExceeded(RuntimeError):
    """A tracked word outgrew the configured letter cap."""

    def __init__(self, trial, step, length, cap):
        super().__init__(
            "trial %d step %d: tracked word reached %d letters (cap %d); "
            "lower the horizon or raise max_word_letters" %
            (trial, step, length, cap))
        self.trial = trial
        self.step = step
        self.length = length
        self.cap = cap

    def __reduce__(self):
        # keeps the structured fields across process boundaries
        return (WordCapExceeded, (self.trial, self.step, self.length, self.cap))


class ExperimentError(RuntimeError):
    """One or more trials failed; carries (trial_index, error) pairs."""

    def __init__(self, failures):
        lines = ", ".join("trial %d: %s" % (t, e) for t, e in failures[:5])
        more = "" if len(failures) <= 5 else " (+%d more)" % (len(failures) - 5)
        super().__init__("%d trial(s) failed: %s%s" % (len(failures), lines, more))
        self.failures = failures


class MeasureSpec:
    """A finitely supported step distribution.

    Atoms are Automorphisms (outer mode) or reduced words (tree mode);
    weights are positive and sum to 1 within 1e-12.  Whether the generated
    subgroup is nonelementary is the caller's responsibility.
    """

    __slots__ = ("atoms", "weights", "mode", "_cumulative")

    def __init__(self, atoms, weights):
        atoms = list(atoms)
        weights = [float(w) for w in weights]
        if not atoms or len(atoms) != len(weights):
            raise ValueError("need matching nonempty atoms and weights")
        if any(w <= 0 for w in weights):
            raise ValueError("weights must be positive")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 within 1e-12")
        if isinstance(atoms[0], fg.Automorphism):
            if not all(isinstance(a, fg.Automorphism) for a in atoms):
                raise ValueError("mixed atom kinds")
            ranks = {a.rank for a in atoms}
            if len(ranks) != 1:
                raise ValueError("atoms of mixed rank")
            self.mode = "outer"
            self.atoms = tuple(atoms)
        else:
            words = [fg.reduce(a) for a in atoms]
            self.mode = "tree"
            self.atoms = tuple(words)
        self.weights = tuple(weights)
        cum = np.cumsum(np.asarray(self.weights, dtype=np.float64))
        cum[-1] = 1.0  # guards searchsorted against float summation slack
        self._cumulative = cum

    @property
    def rank(self):
        if self.mode == "outer":
            return self.atoms[0].rank
        return max((int(np.max(np.abs(a))) for a in self.atoms if len(a)),
                   default=1)

    def reflected(self):
        """The measure of the inverse steps: same weights, atoms inverted."""
        if self.mode == "outer":
            inv = [a.inverted() for a in self.atoms]
        else:
            inv = [fg.inverse(a) for a in self.atoms]
        return MeasureSpec(inv, self.weights)

    def draw_indices(self, master_seed, trial, n):
        """Atom indices for steps 1..n of the given trial; pure function."""
        key = (int(master_seed) << 64) + int(trial)
        raw = Philox(key=key).random_raw(n)
        u = (raw >> np.uint64(11)) * 2.0 ** -53
        return np.searchsorted(self._cumulative, u, side="right")


@dataclass(frozen=True)
class WalkConfig:
    horizon: int
    trials: int
    master_seed: int
    checkpoints: tuple
    tracked_classes: tuple = ()
    max_word_letters: int = DEFAULT_WORD_CAP
    spot_check_rate: float = SPOT_CHECK_RATE

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        cps = tuple(int(c) for c in self.checkpoints)
        if not cps:
            raise ValueError("checkpoints must be nonempty")
        if list(cps) != sorted(set(cps)) or cps[0] < 1 or cps[-1] > self.horizon:
            raise ValueError("checkpoints must be strictly increasing in [1, horizon]")
        object.__setattr__(self, "checkpoints", cps)
        object.__setattr__(self, "tracked_classes", tuple(self.tracked_classes))


@dataclass(frozen=True)
class PathRecord:
    trial_index: int
    checkpoints: tuple
    kappa: tuple                 # displacement at each checkpoint
    sigma: dict                  # label -> per-checkpoint cocycle values
    lengths: dict                # outer mode: label -> cyclic word lengths
    peak_letters: int
    spot_checked: tuple          # checkpoints verified from scratch
    bnd: object = None           # tree mode: truncated limit point
    tracking: tuple = None       # tree mode: distance to the limit ray, or None


def _spot_selected(master_seed, trial, ckpt, rate):
    # deterministic, worker-independent selection of ~rate of all pairs
    h = (trial * 1000003 + ckpt) * 2654435761 + (master_seed & 0xFFFFFFFF)
    h ^= h >> 16
    return (h * 0x9E3779B1) % (1 << 32) < int(rate * (1 << 32))


# ---------------------------------------------------------------------------
# outer mode

def _outer_setup(mu, config):
    rank = mu.rank
    storage = []        # start words, cyclically reduced
    keys = {}
    labels = {}         # label -> storage slot

    def slot_for(word, label):
        core, _ = fg.cyclic_reduce(fg.reduce(word))
        if len(core) == 0:
            raise ValueError("tracked class %r is trivial" % label)
        k = fg.word_key(fg.canonical_rotation(core))
        if k not in keys:
            keys[k] = len(storage)
            storage.append(core)
        labels[label] = keys[k]

    cand_slots = []
    for w in rose.base_candidates(rank):
        slot_for(w, "cand:" + fg.format_word(w))
        cand_slots.append(labels["cand:" + fg.format_word(w)])
    for g in config.tracked_classes:
        w = fg.as_word(g)
        slot_for(w, fg.format_word(w))
    return storage, labels, cand_slots


def _outer_trial(mu, config, trial):
    storage, labels, cand_slots = _outer_setup(mu, config)
    start_lens = [fg.cyclic_length(w) for w in storage]
    words = [w.copy() for w in storage]
    idx = mu.draw_indices(config.master_seed, trial, config.horizon)
    cap = config.max_word_letters
    ckpt_set = set(config.checkpoints)

    kappa = []
    sigma = {lab: [] for lab in labels if not lab.startswith("cand:")}
    lengths = {lab: [] for lab in sigma}
    peak = max(len(w) for w in words)
    spots = []

    for step in range(1, config.horizon + 1):
        s = mu.atoms[idx[step - 1]]
        for i, w in enumerate(words):
            w2 = s.apply(w)
            if len(w2) > cap:
                raise WordCapExceeded(trial, step, len(w2), cap)
            words[i] = w2
            if len(w2) > peak:
                peak = len(w2)
        if step in ckpt_set:
            cyc = [fg.cyclic_length(w) for w in words]
            ratios = [Fraction(cyc[i], start_lens[i]) for i in cand_slots]
            top = max(ratios)
            kappa.append(math.log(top))
            for lab, slot in labels.items():
                if lab.startswith("cand:"):
                    continue
                r = Fraction(cyc[slot], start_lens[slot])
                # White's formula: the candidate max dominates every class
                if r > top:
                    raise AssertionError(
                        "trial %d step %d: sigma(%s) exceeded kappa"
                        % (trial, step, lab))
                sigma[lab].append(math.log(r))
                lengths[lab].append(cyc[slot])
            if _spot_selected(config.master_seed, trial, step,
                              config.spot_check_rate) or \
                    (trial == 0 and step == config.checkpoints[-1]):
                _outer_spot_check(mu, idx, step, storage, words, trial)
                spots.append(step)

    return PathRecord(
        trial_index=trial, checkpoints=config.checkpoints,
        kappa=tuple(kappa),
        sigma={k: tuple(v) for k, v in sigma.items()},
        lengths={k: tuple(v) for k, v in lengths.items()},
        peak_letters=peak, spot_checked=tuple(spots))


def _outer_spot_check(mu, idx, step, storage, words, trial):
    # recompose Phi_step from the increment stream and reapply from scratch;
    # catches drift between incremental image maintenance and composition
    phi = mu.atoms[idx[0]]
    for k in range(1, step):
        phi = fg.compose(mu.atoms[idx[k]], phi)
    for w0, w in zip(storage, words):
        fresh = phi.apply(w0)
        if not np.array_equal(fresh, w):
            raise AssertionError(
                "trial %d step %d: incremental image of %r diverged from "
                "recomposed automorphism" % (trial, step, fg.format_word(w0)))


# ---------------------------------------------------------------------------
# tree mode

def _tree_trial(mu, config, trial):
    inv_atoms = [[int(v) for v in fg.inverse(a)] for a in mu.atoms]
    tracked = list(config.tracked_classes)
    for xi in tracked:
        if not isinstance(xi, treemod.BoundaryPoint):
            raise ValueError("tree mode tracks boundary points")
    idx = mu.draw_indices(config.master_seed, trial, config.horizon)
    ckpt_set = set(config.checkpoints)
    cap = config.max_word_letters

    u = []                          # walk position g_n^{-1} as a letter stack
    cps = [0] * len(tracked)        # common prefix of u with each xi
    kappa = []
    sigma = {treemod.format_boundary(xi): [] for xi in tracked}
    snap_words = []
    peak = 0
    spots = []

    for step in range(1, config.horizon + 1):
        for v in inv_atoms[idx[step - 1]]:
            if u and u[-1] == -v:
                u.pop()
                n = len(u)
                for i in range(len(cps)):
                    if cps[i] > n:
                        cps[i] = n
            else:
                n = len(u)
                for i, xi in enumerate(tracked):
                    if cps[i] == n and xi.letter(n) == v:
                        cps[i] += 1
                u.append(v)
        if len(u) > cap:
            raise WordCapExceeded(trial, step, len(u), cap)
        if len(u) > peak:
            peak = len(u)
        if step in ckpt_set:
            kappa.append(len(u))
            for i, xi in enumerate(tracked):
                sigma[treemod.format_boundary(xi)].append(len(u) - 2 * cps[i])
            snap_words.append(np.array(u, dtype=fg.LETTER_DTYPE))
            if _spot_selected(config.master_seed, trial, step,
                              config.spot_check_rate) or \
                    (trial == 0 and step == config.checkpoints[-1]):
                _tree_spot_check(mu, idx, step, u, cps, tracked, trial)
                spots.append(step)

    bnd, tracking = _tree_limit_data(config.checkpoints, snap_words)
    return PathRecord(
        trial_index=trial, checkpoints=config.checkpoints,
        kappa=tuple(kappa),
        sigma={k: tuple(v) for k, v in sigma.items()},
        lengths={}, peak_letters=peak, spot_checked=tuple(spots),
        bnd=bnd, tracking=tracking)


def _tree_spot_check(mu, idx, step, u, cps, tracked, trial):
    flat = []
    for k in range(step):
        flat.extend(int(v) for v in fg.inverse(mu.atoms[idx[k]]))
    fresh = fg.reduce(np.array(flat, dtype=np.int64))
    if list(fresh) != u:
        raise AssertionError("trial %d step %d: position stack diverged from "
                             "from-scratch reduction" % (trial, step))
    for i, xi in enumerate(tracked):
        ref = fg.common_prefix_len(np.array(u, dtype=fg.LETTER_DTYPE),
                                   xi.letters(len(u)))
        if ref != cps[i]:
            raise AssertionError(
                "trial %d step %d: incremental common prefix with %s diverged"
                % (trial, step, treemod.format_boundary(xi)))


def _tree_limit_data(checkpoints, snap_words):
    """Certified limit prefix from the trailing tenth of the checkpoints,
    and exact tracking distances to the ray toward it where decidable."""
    tail = max(2, (len(snap_words) + 9) // 10)
    window = snap_words[-tail:] if len(snap_words) >= 2 else snap_words
    depth = min(len(w) for w in window)
    for w in window[1:]:
        depth = min(depth, fg.common_prefix_len(window[0][:depth], w[:depth]))
    bnd = treemod.BoundaryPoint.truncated(window[0][:depth], depth) \
        if depth > 0 else None
    tracking = []
    for w in snap_words:
        if bnd is None:
            tracking.append(None)
            continue
        c = fg.common_prefix_len(w[:depth], bnd.prefix)
        if c < depth or len(w) <= depth:
            tracking.append(len(w) - c)
        else:
            tracking.append(None)   # ray certified too shallow to decide
    return bnd, tuple(tracking)


# ---------------------------------------------------------------------------
# driver

def sample_path(mu, config, trial):
    """Run one trial; a pure function of (mu, config, trial)."""
    if not 0 <= trial < config.trials:
        raise ValueError("trial index out of range")
    if mu.mode == "outer":
        return _outer_trial(mu, config, trial)
    return _tree_trial(mu, config, trial)


_POOL_STATE = {}


def _pool_init(mu, config):
    _POOL_STATE["mu"] = mu
    _POOL_STATE["config"] = config


def _pool_trial(trial):
    try:
        rec = sample_path(_POOL_STATE["mu"], _POOL_STATE["config"], trial)
        return trial, rec, None
    except Exception as exc:    # aggregated by the parent with the index
        return trial, None, exc


def run_experiment(mu, config, workers=1):
    """All trials, ordered by trial index; identical for any worker count."""
    if workers <= 1:
        records = []
        failures = []
        for trial in range(config.trials):
            try:
                records.append(sample_path(mu, config, trial))
            except Exception as exc:
                failures.append((trial, exc))
        if failures:
            raise ExperimentError(failures)
        return records
    results = {}
    failures = []
    with ProcessPoolExecutor(max_workers=workers, initializer=_pool_init,
                             initargs=(mu, config)) as pool:
        for trial, rec, exc in pool.map(_pool_trial, range(config.trials),
                                        chunksize=max(1, config.trials // (8 * workers))):
            if exc is not None:
                failures.append((trial, exc))
            else:
                results[trial] = rec
    if failures:
        failures.sort(key=lambda p: p[0])
        raise ExperimentError(failures)
    return [results[t] for t in range(config.trials)]
