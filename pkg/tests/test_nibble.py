from functools import lru_cache

import pytest
from hypothesis import given, settings, strategies as st

from design_forge.absorber import brute_force_absorber
from design_forge.errors import InvalidParameter, PreconditionViolation, RetryExhausted
from design_forge.graph import (Graph, Hypergraph, design_hypergraph, packing_edges, verify_packing)
from design_forge.nibble import (FAILED, OK, BipartiteHypergraph, NibbleParams, format_hypergraph,
                                 is_a_perfect, matching_to_packing, nibble_with_reserves,
                                 parse_hypergraph, regularize_design, reserve_hypergraph,
                                 select_reservoir, spread_nibble)

# calibrated fixtures
K13_RESERVOIR_P = 0.8
K15_TOL = 0.35
K15_FLOOR = 0.6


def private_reserves(k):
    """A = {0..k-1}; each a gets its own reserve edge {a, k+2a, k+2a+1}."""
    edges = [frozenset({a, k + 2 * a, k + 2 * a + 1}) for a in range(k)]
    return BipartiteHypergraph(frozenset(range(3 * k)), tuple(edges), A=frozenset(range(k)))


def empty_main(A):
    return Hypergraph(frozenset(A), ())


def test_bipartite_invariant():
    with pytest.raises(InvalidParameter):
        BipartiteHypergraph(frozenset(range(4)), (frozenset({0, 1, 2}),), A=frozenset({0, 1}))
    with pytest.raises(InvalidParameter):
        BipartiteHypergraph(frozenset(range(4)), (frozenset({2, 3}),), A=frozenset({0}))


@pytest.mark.parametrize("kw", [{"gamma": 0}, {"gamma": 1}, {"bite": 0}, {"bite": 1.5},
                                {"reserve_policy": "magic"}])
def test_params_validation(kw):
    with pytest.raises(InvalidParameter):
        NibbleParams(**kw)


def test_reservoir_trivial_cases():
    K = Graph.complete(12)
    assert select_reservoir(K, 3, 1.0, seed=1, eps=0.01) == K
    assert not select_reservoir(K, 3, 0.0, seed=1, eps=0.05).edges


def test_reservoir_acceptance_rate_at_n60():
    K = Graph.complete(60)
    ok = 0
    for seed in range(100):
        try:
            select_reservoir(K, 3, 0.3, seed, eps=0.05)
            ok += 1
        except RetryExhausted:
            pass
    assert ok >= 90


def test_reservoir_exhaustion_reports_statistic():
    with pytest.raises(RetryExhausted) as info:
        select_reservoir(Graph.complete(12), 3, 0.3, seed=0, eps=50, retries=3)
    assert info.value.statistic is not None


def test_regularize_examples():
    D = design_hypergraph(Graph.complete(15), 3)
    assert len(regularize_design(D, 1.0, seed=0).edges) < len(D.edges)
    with pytest.raises(RetryExhausted):
        regularize_design(D, 0.0, seed=0)
    accepted = 0
    for seed in range(20):
        try:
            sub = regularize_design(D, K15_TOL, seed=seed, retries=20)
            accepted += 1
            assert all(abs(d / 13 - 0.5) <= K15_TOL for d in sub.degrees().values())
        except RetryExhausted:
            pass
    assert accepted == 20


def test_private_reserves_complete_an_empty_main_part():
    G2 = private_reserves(5)
    res = nibble_with_reserves(empty_main(G2.A), G2, NibbleParams(), seed=0)
    assert res.ok and res.covered_A == 5 and res.reserve_used == 5
    assert is_a_perfect(res.matching, G2.A)


def test_empty_a_gives_empty_matching():
    G2 = BipartiteHypergraph(frozenset(), (), A=frozenset())
    res = nibble_with_reserves(empty_main(()), G2, NibbleParams(), seed=0)
    assert res.ok and res.matching == []


def test_failure_is_a_value_naming_uncovered_vertices():
    G2 = BipartiteHypergraph(frozenset({0, 1, 2}), (frozenset({0, 2}),), A=frozenset({0, 1}))
    res = nibble_with_reserves(empty_main({0, 1}), G2, NibbleParams(), seed=0)
    assert res.status == FAILED and res.uncovered_A == [1]


def test_vertex_sets_must_meet_in_a():
    G2 = private_reserves(2)
    G1 = Hypergraph(frozenset({0, 1, 3}), ())
    with pytest.raises(PreconditionViolation):
        nibble_with_reserves(G1, G2, NibbleParams(), seed=0)


def test_matching_policy_uses_bipartite_matching():
    # a greedy choice of a0 -> b0 would strand a1; a perfect matching exists
    A = frozenset({0, 1})
    G2 = BipartiteHypergraph(frozenset({0, 1, 2, 3}),
                             (frozenset({0, 2}), frozenset({0, 3}), frozenset({1, 2})), A=A)
    res = nibble_with_reserves(empty_main(A), G2, NibbleParams(reserve_policy="matching"), seed=0)
    assert res.ok and set(res.matching) == {frozenset({0, 3}), frozenset({1, 2})}
    with pytest.raises(InvalidParameter):
        nibble_with_reserves(empty_main({0}), private_reserves(1), NibbleParams(reserve_policy="matching"), 0)


@lru_cache(maxsize=None)
def k13_host():
    oa = brute_force_absorber(Graph(13, [(0, 1), (1, 2), (0, 2)]), 3, 13)
    return Graph.complete(13).minus(oa.A.edges)


def k13_instance(seed):
    host = k13_host()
    X = select_reservoir(host, 3, K13_RESERVOIR_P, seed, eps=0.0)
    J = host.minus(X.edges)
    G1 = regularize_design(design_hypergraph(J, 3), 0.5, seed)
    G2, table = reserve_hypergraph(J, X, 3)
    return host, J, G1, G2, table


def test_k13_nibble_success_rate_and_round_trip():
    ok = 0
    for seed in range(50):
        host, J, G1, G2, table = k13_instance(seed)
        res = nibble_with_reserves(G1, G2, NibbleParams(bite=0.1), seed)
        if res.ok:
            ok += 1
            P = matching_to_packing(res.matching, table)
            assert verify_packing(host, P, 3) and J.edges <= packing_edges(P)
    assert ok >= 30


def test_reserve_hypergraph_structure():
    J = Graph(5, [(0, 1), (2, 3)])
    X = Graph(5, [(0, 2), (1, 2), (0, 4), (1, 4)])
    G2, table = reserve_hypergraph(J, X, 3)
    assert table[:2] == [(0, 1), (2, 3)]
    assert sorted(matching_to_packing(G2.edges, table)) == [(0, 1, 2), (0, 1, 4)]


def test_spread_nibble_with_unit_rate_equals_plain_nibble():
    host, J, G1, G2, table = k13_instance(3)
    params = NibbleParams(floor=1.0, bite=0.1)
    a = spread_nibble(G1, G2, params, seed=9)
    b = nibble_with_reserves(G1, G2, params, seed=9)
    assert a.matching == b.matching and a.status == b.status


def test_a_degree_event_forces_resampling():
    G2 = private_reserves(6)
    params = NibbleParams(D=4, gamma=0.5, floor=0.5)
    resampled = 0
    for seed in range(20):
        res = spread_nibble(empty_main(G2.A), G2, params, seed)
        resampled += res.info["resamples"] > 0
        assert res.ok and set(res.matching) == set(G2.edges) == res.sparsified
    assert resampled > 0


def test_k15_spread_nibble_calibrated():
    host = Graph.complete(15)
    for seed in range(30):
        X = select_reservoir(host, 3, 0.8, seed, eps=0.0)
        J = host.minus(X.edges)
        G2, _ = reserve_hypergraph(J, X, 3)
        res = spread_nibble(design_hypergraph(J, 3), G2, NibbleParams(gamma=0.6, floor=K15_FLOOR), seed)
        assert res.status == OK
        assert set(res.matching) <= res.sparsified


def test_plain_nibble_leave_shrinks_with_n():
    means = []
    for n in (15, 25, 35, 45):
        D = design_hypergraph(Graph.complete(n), 3)
        G2 = BipartiteHypergraph(D.vertices, (), A=D.vertices)
        runs = [nibble_with_reserves(D, G2, NibbleParams(), s).leave_fraction for s in range(20)]
        means.append(sum(runs) / len(runs))
    assert all(a > b for a, b in zip(means, means[1:])), means


def test_hypergraph_format_round_trip():
    G2 = private_reserves(3)
    text = format_hypergraph(G2)
    assert text.splitlines()[0] == "9 3"
    back = parse_hypergraph(text)
    assert back.A == G2.A and set(back.edges) == set(G2.edges) and back.vertices == G2.vertices
    lonely = Hypergraph(frozenset({0, 1, 2, 7}), [(0, 1, 2)])
    assert parse_hypergraph(format_hypergraph(lonely)).vertices == lonely.vertices
    plain = parse_hypergraph("4 1\n0 1 2\n")
    assert not isinstance(plain, BipartiteHypergraph)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.05, 0.95))
def test_matchings_are_disjoint_property(seed, bite):
    host, J, G1, G2, table = k13_instance(seed % 7)
    res = nibble_with_reserves(G1, G2, NibbleParams(bite=bite), seed)
    seen = [v for e in res.matching for v in e]
    assert len(seen) == len(set(seen))
    assert res.ok == is_a_perfect(res.matching, G2.A)
