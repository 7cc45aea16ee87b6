"""Boundary points of the Cayley tree, Gromov products, Busemann values,
and the identities used by the experiment harness."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from outwalk import freegroup as fg
from outwalk import tree
from outwalk.walk import MeasureSpec, PathRecord


def bp(text):
    return tree.parse_boundary(text)


# -- parsing and formatting

def test_parse_and_format_periodic_points():
    xi = bp("per:ab")
    assert xi.letters(6).tolist() == [1, 2, 1, 2, 1, 2]
    assert tree.format_boundary(xi) == "per:ab"
    eta = bp("pre:a per:ba")
    assert eta.letters(5).tolist() == [1, 2, 1, 2, 1]
    assert tree.format_boundary(eta) == "pre:a per:ba"


def test_parse_truncated_points():
    xi = bp("prefix:abab depth:4")
    assert xi.depth == 4
    assert xi.letters(4).tolist() == [1, 2, 1, 2]
    assert tree.format_boundary(xi) == "prefix:abab depth:4"


def test_parse_rejects_malformed_input():
    for text in ("", "per:", "per:aA", "pre:a", "per:a!", "depth:3"):
        with pytest.raises(ValueError):
            bp(text)


def test_parse_clips_prefix_to_certified_depth():
    xi = bp("prefix:ab depth:1")
    assert xi.depth == 1
    assert tree.format_boundary(xi) == "prefix:a depth:1"


def test_periodic_point_must_be_cyclically_reduced():
    with pytest.raises(ValueError):
        bp("per:abA")     # infinite word ab Aab A... would cancel
    with pytest.raises(ValueError):
        bp("pre:a per:Ab")  # seam a.A cancels


def test_truncated_point_keeps_only_certified_letters():
    xi = tree.BoundaryPoint.truncated(fg.parse_word("abab"), 3)
    assert xi.depth == 3
    assert xi.letters(3).tolist() == [1, 2, 1]
    with pytest.raises(tree.DepthError):
        xi.letter(3)


# -- products and distances

def test_gromov_product_small_cases():
    assert tree.gromov_product(bp("per:a"), bp("per:b")) == 0
    assert tree.gromov_product(bp("per:ab"), bp("pre:a per:b")) == 2
    assert tree.gromov_product(bp("per:ab"), bp("per:aB")) == 1
    # a word against a ray measures their common prefix
    assert tree.gromov_product(fg.parse_word("ab"), bp("per:a")) == 1


def test_gromov_product_of_identical_rays_is_infinite():
    p = tree.gromov_product(bp("per:ab"), bp("pre:ab per:ab"))
    assert tree.is_infinite(p)
    assert not tree.is_infinite(0)


def test_gromov_product_certified_depth_exhaustion():
    with pytest.raises(tree.DepthError):
        tree.gromov_product(bp("prefix:abab depth:4"), bp("per:ab"))
    # a decidable disagreement inside the window is fine
    assert tree.gromov_product(bp("prefix:abab depth:4"), bp("per:aB")) == 1


def test_periodic_pair_decided_within_fine_wilf_window():
    # distinct periodic rays written with different period lengths must be
    # separated without streaming past the combined-period bound
    assert tree.gromov_product(bp("per:ab"), bp("per:abaB")) == 3
    assert tree.is_infinite(tree.gromov_product(bp("per:ab"), bp("per:abab")))


def test_tree_distance_between_words():
    assert tree.tree_distance(fg.parse_word("a"), fg.parse_word("ab")) == 1
    assert tree.tree_distance(fg.parse_word("a"), fg.parse_word("b")) == 2
    assert tree.tree_distance(fg.parse_word(""), fg.parse_word("abab")) == 4


@given(st.text(alphabet="abAB", min_size=0, max_size=16),
       st.text(alphabet="abAB", min_size=0, max_size=16))
def test_product_via_distances_agrees(su, sv):
    u, v = fg.parse_word(su), fg.parse_word(sv)
    assert tree.gromov_product_via_distances(u, v) == \
        fg.common_prefix_len(u, v)


# -- Busemann values

def test_busemann_frozen_values():
    # the value is the horofunction at the point g^-1, so moving the walk
    # toward the ray means feeding it inverse letters
    assert tree.busemann(fg.parse_word("A"), bp("per:a")) == -1
    assert tree.busemann(fg.parse_word("b"), bp("per:a")) == 1
    assert tree.busemann(fg.parse_word("AA"), bp("per:a")) == -2
    assert tree.busemann(fg.parse_word("aa"), bp("per:a")) == 2
    assert tree.busemann(fg.parse_word(""), bp("per:ab")) == 0


def test_horofunction_value_matches_busemann_on_inverses():
    for s, x in (("ab", "per:a"), ("BAb", "per:ba"), ("", "per:b")):
        g = fg.parse_word(s)
        assert tree.horofunction_value(bp(x), g) == \
            tree.busemann(fg.inverse(g), bp(x))


@settings(max_examples=60)
@given(st.text(alphabet="abAB", min_size=0, max_size=12),
       st.text(alphabet="abAB", min_size=0, max_size=12),
       st.sampled_from(["per:a", "per:b", "per:ab", "pre:a per:ba", "per:aB"]))
def test_busemann_cocycle_identity(sg, sh, sx):
    g, h, xi = fg.parse_word(sg), fg.parse_word(sh), bp(sx)
    lhs = tree.busemann(fg.concat(g, h), xi)
    rhs = tree.busemann(g, tree.boundary_action(h, xi)) + tree.busemann(h, xi)
    assert lhs == rhs


def test_busemann_values_are_integers_of_word_parity():
    rng = np.random.default_rng(2)
    xi = bp("per:ab")
    for _ in range(200):
        g = fg.random_reduced_word(rng, 2, int(rng.integers(0, 12)))
        b = tree.busemann(g, xi)
        assert isinstance(b, int)
        assert (b - len(g)) % 2 == 0


# -- boundary action

def test_boundary_action_frozen_cases():
    assert tree.format_boundary(
        tree.boundary_action(fg.parse_word("a"), bp("per:b"))) == "pre:a per:b"
    assert tree.format_boundary(
        tree.boundary_action(fg.parse_word("A"), bp("per:a"))) == "per:a"


def test_boundary_action_on_truncated_point_tracks_depth():
    xi = tree.BoundaryPoint.truncated(fg.parse_word("bbbb"), 4)
    moved = tree.boundary_action(fg.parse_word("a"), xi)
    assert moved.depth == 5
    assert moved.letters(5).tolist() == [1, 2, 2, 2, 2]
    eaten = tree.boundary_action(fg.parse_word("B"), xi)
    assert eaten.depth == 3
    assert eaten.letters(3).tolist() == [2, 2, 2]


@settings(max_examples=60)
@given(st.text(alphabet="abAB", min_size=0, max_size=10),
       st.text(alphabet="abAB", min_size=0, max_size=10),
       st.sampled_from(["per:a", "per:ab", "pre:Ba per:abAB"]))
def test_boundary_action_is_associative(sg, sh, sx):
    g, h, xi = fg.parse_word(sg), fg.parse_word(sh), bp(sx)
    one = tree.boundary_action(fg.concat(g, h), xi)
    two = tree.boundary_action(g, tree.boundary_action(h, xi))
    assert tree.is_infinite(tree.gromov_product(one, two))


def test_tracking_distance_from_ray():
    assert tree.tracking_distance(fg.parse_word("aaa"), bp("per:a")) == 0
    assert tree.tracking_distance(fg.parse_word("b"), bp("per:a")) == 1
    assert tree.tracking_distance(fg.parse_word("aab"), bp("per:a")) == 1


# -- identities behind the experiment checks

@settings(max_examples=120)
@given(st.text(alphabet="abAB", min_size=0, max_size=18),
       st.sampled_from(["per:a", "per:b", "per:ab", "pre:a per:ba",
                        "per:aB", "pre:Ba per:abAB"]))
def test_lemma_identities_have_zero_residual(sg, sx):
    rep = tree.lemma_identities_check(fg.parse_word(sg), bp(sx))
    assert rep.exact
    assert rep.residual_image == 0 and rep.residual_base == 0


def test_four_point_slack_nonnegative_on_boundary_triples():
    pts = [bp(s) for s in ("per:a", "per:b", "per:ab", "pre:a per:ba",
                           "per:aB", "pre:Ba per:abAB")]
    rng = np.random.default_rng(8)
    for _ in range(400):
        x, y, z = (pts[int(k)] for k in rng.integers(len(pts), size=3))
        prods = (tree.gromov_product(x, y), tree.gromov_product(x, z),
                 tree.gromov_product(y, z))
        if any(tree.is_infinite(p) for p in prods):
            continue
        assert tree.four_point_slack(x, y, z) >= 0


def test_corollary_bound_has_an_equality_witness_on_the_ray():
    x, y = bp("per:ab"), bp("pre:a per:b")
    c = tree.gromov_product(x, y)
    slacks = []
    for L in range(int(c) + 1):
        g = fg.inverse(x.letters(L))
        slack = tree.corollary_bound_slack(g, x, y)
        assert slack >= 0
        slacks.append(slack)
    assert 0 in slacks


def test_product_via_horofunctions_agrees_with_streaming():
    pairs = (("per:a", "per:b"), ("per:ab", "pre:a per:b"),
             ("per:aB", "pre:Ba per:abAB"))
    for sx, sy in pairs:
        x, y = bp(sx), bp(sy)
        val, witness = tree.gromov_product_via_horofunctions(x, y)
        assert val == tree.gromov_product(x, y)
        assert len(witness) <= val + 2


# -- estimators on boundary samples

def test_psi_estimate_hand_arithmetic():
    x = bp("per:b")
    samples = [bp("per:a"), bp("pre:b per:a")]   # products 0 and 1
    est = tree.psi_estimate(x, samples)
    assert est.value == -1.0
    assert est.std_error == pytest.approx(1.0)


def test_psi_estimate_needs_samples():
    with pytest.raises(ValueError):
        tree.psi_estimate(bp("per:a"), [])


def test_h2_tail_estimate_geometric_hand_case():
    x = bp("per:b")
    samples = ([bp("per:a")] * 4 + [bp("pre:b per:a")] * 2
               + [bp("pre:bb per:a")] + [bp("pre:bbb per:a")])
    curve = tree.h2_tail_estimate(x, samples, alpha=1.0, n_grid=[1, 2, 3])
    assert [p for _, p in curve.points] == [0.5, 0.25, 0.125]
    assert curve.decay_rate == pytest.approx(0.5)
    assert curve.summable


def test_h2_tail_estimate_handles_infinite_products():
    x = bp("per:b")
    curve = tree.h2_tail_estimate(x, [bp("per:b"), bp("per:a")],
                                  alpha=1.0, n_grid=[1, 2])
    assert [p for _, p in curve.points] == [0.5, 0.5]


def test_centering_check_hand_arithmetic():
    # point mass on the letter a;  beta(a, b^inf) = 1;  the correction terms
    # use the two truncated sample rays below
    mu = MeasureSpec([fg.parse_word("a")], [1.0])
    y1 = tree.BoundaryPoint.truncated(fg.parse_word("aaaa"), 4)
    y2 = tree.BoundaryPoint.truncated(fg.parse_word("ababab"), 6)
    records = [
        PathRecord(trial_index=i, checkpoints=(10,), kappa=(5.0,), sigma={},
                   lengths=None, peak_letters=0, spot_checked=(), bnd=y,
                   tracking=None)
        for i, y in enumerate((y1, y2))]
    rep = tree.centering_check(mu, [bp("per:b")], records)
    assert rep.lambda_hat == pytest.approx(0.5)
    est, se = rep.estimates["per:b"]
    assert est == pytest.approx(-2.0)
    assert se == pytest.approx(1.0)
    assert rep.max_drift_discrepancy_se == pytest.approx(2.5)


def test_centering_check_rejects_outer_measures():
    mu = MeasureSpec([fg.from_trace(2, ["R:1:2:+"])], [1.0])
    with pytest.raises(ValueError):
        tree.centering_check(mu, [bp("per:a")], [])
