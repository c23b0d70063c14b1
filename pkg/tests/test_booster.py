import json
import math
from fractions import Fraction
from itertools import combinations

import pytest
from hypothesis import given, settings, strategies as st

from design_forge.booster import (RootedBooster, base_booster, density_bound, densest_subfamily,
                                  layer_boosters, max_rooted_density, rooted_density,
                                  verify_rooted_booster)
from design_forge.errors import InvalidParameter, ResourceLimit
from design_forge.graph import verify_decomposition


def oracle_max_density(H, R):
    """Plain itertools scan with exact fractions."""
    best = None
    R = set(R)
    for k in range(1, len(H) + 1):
        for sub in combinations(H, k):
            outside = set().union(*map(set, sub)) - R
            d = math.inf if not outside else Fraction(k, len(outside))
            best = d if best is None or d > best else best
    return best


def test_rooted_density_examples():
    assert rooted_density([(3, 4, 5)], {0, 1, 2}) == Fraction(1, 3)
    assert rooted_density([(0, 1, 2)], {0, 1, 2}) == math.inf
    with pytest.raises(InvalidParameter):
        rooted_density([], {0})


def test_max_rooted_density_examples():
    assert max_rooted_density([(0, 1, 2)], {9}) == Fraction(1, 3)
    assert max_rooted_density([(0, 1, 2), (1, 2, 3)], set()) == Fraction(1, 2)


def test_q3_base_booster_density_is_one():
    bb = base_booster(3)
    rest = [c for c in bb.decomp1 if c != bb.S1]
    assert len(rest) == 3
    assert rooted_density(rest, bb.S1) == 1
    assert max_rooted_density(rest, bb.S1, method="brute") == 1
    assert bb.density1() == 1 <= density_bound(3)


def test_base_booster_shapes():
    b3 = base_booster(3)
    assert (b3.graph.n, len(b3.graph.edges), len(b3.decomp1), len(b3.decomp2)) == (6, 12, 4, 4)
    assert len(b3.overlap()) == 2
    assert not set(b3.decomp1) & set(b3.decomp2)
    b4 = base_booster(4)
    assert (b4.graph.n, len(b4.graph.edges), len(b4.decomp1)) == (11, 36, 6)
    with pytest.raises(InvalidParameter):
        base_booster(2)


@pytest.mark.parametrize("q", range(3, 9))
def test_base_booster_is_a_two_clique_booster(q):
    bb = base_booster(q)
    assert verify_decomposition(bb.graph, bb.decomp1, q)
    assert verify_decomposition(bb.graph, bb.decomp2, q)
    assert len(bb.overlap()) == q - 1
    assert bb.satisfies_bounds()


@pytest.mark.parametrize("q", range(3, 9))
def test_layered_booster_verifies(q):
    rb = layer_boosters(q, check=True)
    rep = verify_rooted_booster(rb)
    assert rep.passed, str(rep)
    assert Fraction(2, q) <= rep.values["rooted_density"] <= Fraction(2, q - 2)
    assert not set(rb.root) & set(rb.meta["special_clique"])
    hist = rb.meta["overlap_history"]
    assert all(a > b for a, b in zip(hist, hist[1:])) and hist[-1] == 0


def test_q3_layering_takes_at_most_two_glues():
    assert layer_boosters(3).meta["glue_steps"] <= 2


@pytest.mark.parametrize("q", [3, 4])
def test_on_decomposition_density_with_special_clique(q):
    rb = layer_boosters(q)
    assert max_rooted_density(rb.on, rb.root) <= density_bound(q)


@pytest.mark.parametrize("q", [3, 4])
def test_flow_and_brute_force_agree_on_layered_boosters(q):
    rb = layer_boosters(q)
    for fam in (rb.on, rb.off):
        assert len(fam) <= 24
        brute = max_rooted_density(fam, rb.root, method="brute")
        flow = max_rooted_density(fam, rb.root, method="flow")
        assert brute == flow


def test_brute_force_cap():
    fam = [(i, i + 1, i + 2) for i in range(0, 60, 2)]
    with pytest.raises(ResourceLimit):
        max_rooted_density(fam, set(), cap=10, method="brute")


def test_verify_rejects_root_in_on_decomposition():
    rb = layer_boosters(3)
    bad = RootedBooster(rb.q, rb.graph, rb.on + [rb.root], rb.off, rb.root)
    rep = verify_rooted_booster(bad)
    assert not rep["R not in on-decomposition"].passed


def test_verify_rejects_incomplete_off_decomposition():
    rb = layer_boosters(3)
    bad = RootedBooster(rb.q, rb.graph, rb.on, rb.off[1:], rb.root)
    assert not verify_rooted_booster(bad)["off-decomposition decomposes B"].passed


def test_json_round_trip():
    rb = layer_boosters(4)
    data = json.loads(rb.dumps())
    assert set(data) == {"q", "vertices", "edges", "on_decomp", "off_decomp", "root"}
    back = RootedBooster.from_json(data)
    assert back.graph == rb.graph and sorted(back.on) == sorted(rb.on) and back.root == rb.root
    assert verify_rooted_booster(back).passed


families = st.lists(st.lists(st.integers(0, 7), min_size=3, max_size=3, unique=True).map(
    lambda c: tuple(sorted(c))), min_size=1, max_size=9, unique=True)


@settings(max_examples=150, deadline=None)
@given(families, st.sets(st.integers(0, 7), max_size=4))
def test_density_methods_match_oracle(H, R):
    expected = oracle_max_density(sorted(H), R)
    assert max_rooted_density(H, R, method="brute") == expected
    assert max_rooted_density(H, R, method="flow") == expected
    value, sub = densest_subfamily(H, R)
    assert rooted_density(sub, R) == value
