"""Marked metric roses: translation lengths, stretch, and the candidate
formula checked against full enumeration."""

from fractions import Fraction

import math
import numpy as np
import pytest

from outwalk import freegroup as fg
from outwalk import rose


def random_rose(rng, rank, max_moves=6):
    raw = rng.integers(1, 12, size=rank)
    total = int(raw.sum())
    lengths = [Fraction(int(v), total) for v in raw]
    phi = fg.random_automorphism(rng, rank, int(rng.integers(0, max_moves)))
    return rose.rose_point(lengths, phi)


def test_rose_point_normalizes_and_validates():
    p = rose.rose_point(["1/2", "1/2"])
    assert p.rank == 2
    assert sum(p.lengths) == 1
    with pytest.raises(ValueError):
        rose.rose_point(["1/2", "1/3"])      # volume must be 1
    with pytest.raises(ValueError):
        rose.rose_point(["1", "0"])          # every petal needs positive length


def test_unit_rose_translation_lengths():
    t = rose.unit_rose(2)
    assert rose.translation_length(fg.parse_word("ab"), t) == 1
    assert rose.translation_length(fg.parse_word("aB"), t) == 1
    # conjugation does not move the class
    assert rose.translation_length(fg.parse_word("abA"), t) == \
        rose.translation_length(fg.parse_word("b"), t)
    assert rose.translation_length(fg.parse_word(""), t) == 0


def test_translation_length_uses_the_marking():
    psi = fg.from_trace(2, ["R:1:2:+"])    # marking sends a to ab
    marked = rose.rose_point(["1/2", "1/2"], psi)
    assert rose.translation_length(fg.parse_word("a"), marked) == 1
    assert rose.translation_length(fg.parse_word("b"), marked) == Fraction(1, 2)


def test_max_stretch_asymmetry_between_even_and_skewed_roses():
    t = rose.unit_rose(2)
    u = rose.rose_point(["9/10", "1/10"])
    assert rose.max_stretch(t, u) == Fraction(9, 5)
    assert rose.max_stretch(u, t) == Fraction(5, 1)
    assert rose.lipschitz_distance(t, u) == pytest.approx(math.log(9 / 5))
    assert rose.lipschitz_distance(u, t) == pytest.approx(math.log(5))
    assert rose.sym_distance(t, u) == pytest.approx(math.log(9 / 5) + math.log(5))


def test_distance_vanishes_only_at_equal_points():
    t = rose.unit_rose(2)
    assert rose.lipschitz_distance(t, t) == 0.0
    u = rose.rose_point(["2/3", "1/3"])
    assert rose.lipschitz_distance(t, u) > 0


def test_kappa_of_identity_and_single_move():
    assert rose.kappa(fg.Automorphism.identity(2)) == 0.0
    phi = fg.from_trace(2, ["R:1:2:+"])
    assert rose.kappa_stretch(phi) == 2
    assert rose.kappa(phi) == pytest.approx(math.log(2))


def test_sigma_ratio_exact_values():
    phi = fg.from_trace(2, ["R:1:2:+"])    # a -> ab
    assert rose.sigma_ratio(phi, fg.parse_word("a")) == 2
    assert rose.sigma_ratio(phi, fg.parse_word("b")) == 1
    assert rose.sigma_ratio(phi, fg.parse_word("ab")) == Fraction(3, 2)
    with pytest.raises(ValueError):
        rose.sigma_ratio(phi, fg.parse_word("aA"))  # trivial class has no ratio


def test_length_cocycle_is_exactly_additive():
    rng = np.random.default_rng(11)
    for _ in range(300):
        phi = fg.random_automorphism(rng, 2, int(rng.integers(0, 8)))
        psi = fg.random_automorphism(rng, 2, int(rng.integers(0, 8)))
        g = fg.random_reduced_word(rng, 2, int(rng.integers(1, 14)))
        if fg.cyclic_length(g) == 0:
            continue
        lhs = rose.sigma_ratio(fg.compose(phi, psi), g)
        rhs = rose.sigma_ratio(phi, psi.apply(g)) * rose.sigma_ratio(psi, g)
        assert lhs == rhs


def test_sigma_never_exceeds_kappa():
    rng = np.random.default_rng(23)
    for _ in range(300):
        phi = fg.random_automorphism(rng, 2, int(rng.integers(1, 10)))
        g = fg.random_reduced_word(rng, 2, int(rng.integers(1, 16)))
        if fg.cyclic_length(g) == 0:
            continue
        assert rose.sigma_ratio(phi, g) <= rose.kappa_stretch(phi)


def test_candidate_set_contains_petals_and_stays_short():
    t = rose.unit_rose(2)
    cands = rose.candidate_set(t)
    texts = {fg.format_word(w) for w in cands}
    assert "a" in texts and "b" in texts
    assert all(fg.cyclic_length(w) == len(w) > 0 for w in cands)


def test_candidate_maximum_matches_full_enumeration():
    # the oracle ignores candidates entirely: it enumerates every conjugacy
    # class with a short cyclically reduced representative
    rng = np.random.default_rng(5)
    for _ in range(12):
        t = random_rose(rng, 2)
        u = random_rose(rng, 2)
        assert rose.brute_force_max_stretch(t, u, 8) == rose.max_stretch(t, u)


def test_candidate_maximum_matches_enumeration_in_rank_3():
    rng = np.random.default_rng(6)
    for _ in range(4):
        t = random_rose(rng, 3, max_moves=4)
        u = random_rose(rng, 3, max_moves=4)
        assert rose.brute_force_max_stretch(t, u, 6) == rose.max_stretch(t, u)


def test_brute_force_oracle_monotone_in_word_length_bound():
    rng = np.random.default_rng(9)
    t = random_rose(rng, 2)
    u = random_rose(rng, 2)
    vals = [rose.brute_force_max_stretch(t, u, L) for L in (2, 4, 6, 8)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert vals[-1] == rose.max_stretch(t, u)


def test_triangle_inequality_for_the_asymmetric_distance():
    rng = np.random.default_rng(41)
    for _ in range(40):
        pts = [random_rose(rng, 2) for _ in range(3)]
        d01 = rose.lipschitz_distance(pts[0], pts[1])
        d12 = rose.lipschitz_distance(pts[1], pts[2])
        d02 = rose.lipschitz_distance(pts[0], pts[2])
        assert d02 <= d01 + d12 + 1e-12


def test_act_moves_the_marking_and_is_an_isometry():
    rng = np.random.default_rng(3)
    phi = fg.random_automorphism(rng, 2, 5)
    t = random_rose(rng, 2)
    u = random_rose(rng, 2)
    assert rose.max_stretch(rose.act(phi, t), rose.act(phi, u)) == \
        rose.max_stretch(t, u)


def test_kappa_equals_distance_from_base_to_translate():
    rng = np.random.default_rng(17)
    base = rose.unit_rose(2)
    for _ in range(20):
        phi = fg.random_automorphism(rng, 2, int(rng.integers(0, 8)))
        lhs = rose.kappa_stretch(phi)
        rhs = rose.max_stretch(rose.act(phi, base), base)
        assert lhs == rhs


def test_enumeration_refuses_unreasonable_sizes():
    t = rose.unit_rose(3)
    u = rose.rose_point(["1/2", "1/4", "1/4"])
    with pytest.raises(rose.ResourceLimitError):
        rose.brute_force_max_stretch(t, u, 30)
