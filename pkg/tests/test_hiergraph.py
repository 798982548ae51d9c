import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rdelab.errors import BadBracket, DomainError
from rdelab.hiergraph import (CascadeParams, HierGraph, MetricModel, diamond, find_critical_drift,
                              percolation_polynomial, percolation_theta, pushforward, racket,
                              relation_R, simulate_cascade, single_edge, solve_metric,
                              theta_basins_ok, validate_nonpivotal)
from rdelab.measure import INF, Grid, d_weak, dirac, from_cdf_function, mixture, stochastic_leq

G = Grid(-10.0, 10.0, 0.01)
LOG2 = math.log(2.0)


def connected_bfs(graph, open_edges):
    """I-O connectivity through open directed edges, by breadth-first search."""
    adj = {}
    for i in open_edges:
        u, v = graph.edges[i]
        adj.setdefault(u, []).append(v)
    seen, todo = {graph.source}, [graph.source]
    while todo:
        u = todo.pop()
        for v in adj.get(u, []):
            if v not in seen:
                seen.add(v)
                todo.append(v)
    return graph.sink in seen


def theta_bruteforce(graph, p):
    E = graph.n_edges
    tot = 0
    for bits in itertools.product([0, 1], repeat=E):
        if connected_bfs(graph, [e for e in range(E) if bits[e]]):
            j = sum(bits)
            tot += p ** j * (1 - p) ** (E - j)
    return tot


# -- graphs ----------------------------------------------------------------------

@pytest.mark.parametrize("graph, expected", [(diamond(), True), (racket(), False),
                                             (single_edge(), False)])
def test_validate_nonpivotal(graph, expected):
    assert validate_nonpivotal(graph) is expected


def test_diamond_structure():
    g = diamond()
    assert g.n_edges == 4
    assert sorted(map(len, g.io_paths)) == [2, 2]
    assert g.edge_disjoint_paths


def test_dead_edge_rejected():
    with pytest.raises(DomainError):
        HierGraph(4, ((0, 1), (1, 3), (2, 1)), 0, 3)


def test_malformed_graph_dict():
    with pytest.raises(DomainError):
        HierGraph.from_dict({"vertices": 3})


def test_graph_dict_round_trip():
    g = racket()
    assert HierGraph.from_dict(g.to_dict()) == g


# -- percolation -------------------------------------------------------------------

@pytest.mark.parametrize("p", [0.0, 0.1, 0.37, 0.5, 0.9, 1.0])
def test_theta_diamond_closed_form(p):
    assert percolation_theta(diamond(), p) == pytest.approx(1 - (1 - p * p) ** 2, abs=1e-14)


@pytest.mark.parametrize("graph", [diamond(), racket(), single_edge()])
@pytest.mark.parametrize("p", [0.2, 0.6])
def test_theta_matches_bfs_enumeration(graph, p):
    assert percolation_theta(graph, p) == pytest.approx(theta_bruteforce(graph, p), abs=1e-14)


@pytest.mark.parametrize("graph", [diamond(), racket(), single_edge()])
def test_theta_endpoints(graph):
    assert percolation_theta(graph, 0.0) == 0.0
    assert percolation_theta(graph, 1.0) == 1.0


def test_theta_superattracting():
    g, e = diamond(), 1e-5
    assert percolation_theta(g, e) / e < 1e-4
    assert (1 - percolation_theta(g, 1 - e)) / e < 1e-4


@pytest.mark.parametrize("graph", [diamond(), racket()])
def test_theta_exact_rational(graph):
    half = Fraction(1, 2)
    assert percolation_theta(graph, half) == theta_bruteforce(graph, half)
    assert len(percolation_polynomial(graph)) == graph.n_edges + 1


def test_alpha_basins():
    assert theta_basins_ok(diamond(), 0.05)
    assert CascadeParams(0.5, 0.0, 0.05).check_basins(diamond())


# -- relation ---------------------------------------------------------------------------

def test_relation_examples():
    g = diamond()
    assert relation_R(g, [0, 0, 0, 0], 0.0) == pytest.approx(LOG2)
    assert relation_R(g, [0, 0, INF, INF], 0.0) == pytest.approx(LOG2)
    assert relation_R(g, [INF] * 4, 0.0) == INF
    assert relation_R(g, [-INF, -INF, 5.0, 5.0], 0.0) == -INF


finite = st.floats(-20, 20)


@settings(max_examples=100, deadline=None)
@given(st.lists(finite, min_size=4, max_size=4), finite, st.floats(-5, 5))
def test_relation_translation(xs, xi, c):
    g = diamond()
    lhs = relation_R(g, np.array(xs) + c, xi)
    assert lhs == pytest.approx(relation_R(g, xs, xi) + c, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(finite, min_size=5, max_size=5), st.lists(st.floats(0, 3), min_size=5,
                                                          max_size=5), finite)
def test_relation_monotone(xs, bump, xi):
    g = racket()
    assert relation_R(g, np.array(xs) + np.array(bump), xi) >= relation_R(g, xs, xi) - 1e-12


# -- push-forward ---------------------------------------------------------------------------

@pytest.mark.parametrize("method", ["mc", "quadrature"])
def test_deterministic_fixed_point(method):
    m = MetricModel(diamond(), CascadeParams(0.0, -LOG2), G, 1000, method)
    assert d_weak(m.pushforward(dirac(0.0, G)), dirac(0.0, G)) <= G.step


def test_plus_inf_stays():
    m = MetricModel(diamond(), CascadeParams(0.5, 0.0), G, 1000, "mc")
    assert m.pushforward(dirac(INF, G)).atom_pos_inf == 1.0


def blocked_probability(graph, beta):
    """P(every I-O path contains a +inf edge) by enumeration of edge patterns."""
    E = graph.n_edges
    tot = 0.0
    for bits in itertools.product([0, 1], repeat=E):
        if not connected_bfs(graph, [e for e in range(E) if not bits[e]]):
            tot += beta ** sum(bits) * (1 - beta) ** (E - sum(bits))
    return tot


@pytest.mark.parametrize("beta", [0.1, 0.3])
def test_plus_inf_atom_bookkeeping(beta):
    g = diamond()
    mu = mixture([from_cdf_function(lambda x: 1 / (1 + np.exp(-x)), G), dirac(INF, G)],
                 [1 - beta, beta])
    oracle = blocked_probability(g, beta)
    assert oracle == pytest.approx((1 - (1 - beta) ** 2) ** 2)
    quad = MetricModel(g, CascadeParams(0.5, 0.0), G, method="quadrature").pushforward(mu)
    assert quad.atom_pos_inf == pytest.approx(oracle, abs=1e-9)
    mc = pushforward(g, CascadeParams(0.5, 0.0), mu, n_samples=200000, seed=3)
    assert mc.atom_pos_inf == pytest.approx(oracle, abs=4 * math.sqrt(oracle / 200000))


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 2.0), st.integers(0, 2 ** 31))
def test_pushforward_coupled_monotone(shift, seed):
    g = diamond()
    p = CascadeParams(0.5, -0.5)
    mu = from_cdf_function(lambda x: 1 / (1 + np.exp(-x)), G)
    nu = from_cdf_function(lambda x: 1 / (1 + np.exp(-(x - shift))), G)
    assert stochastic_leq(mu, nu)
    a = pushforward(g, p, mu, n_samples=5000, seed=seed)
    b = pushforward(g, p, nu, n_samples=5000, seed=seed)
    assert stochastic_leq(a, b)


def test_pushforward_preserves_admissible_atoms():
    alpha = 0.05
    mu = mixture([from_cdf_function(lambda x: 1 / (1 + np.exp(-x)), G), dirac(INF, G),
                  dirac(-INF, G)], [1 - 2 * alpha, alpha, alpha])
    out = MetricModel(diamond(), CascadeParams(0.5, -0.5), G, method="quadrature").pushforward(mu)
    assert out.atom_pos_inf <= alpha and out.atom_neg_inf <= alpha


def test_pushforward_seed_determinism():
    mu = from_cdf_function(lambda x: 1 / (1 + np.exp(-x)), G)
    p = CascadeParams(0.5, -0.5)
    a = pushforward(diamond(), p, mu, n_samples=10000, seed=7)
    b = pushforward(diamond(), p, mu, n_samples=10000, seed=7)
    assert a.equals(b)


# -- critical drift -------------------------------------------------------------------------

def test_critical_drift_deterministic():
    assert find_critical_drift(diamond(), 0.0, tol_s=1e-3) == pytest.approx(-LOG2, abs=1e-3)


def test_critical_drift_bad_bracket():
    with pytest.raises(BadBracket):
        find_critical_drift(diamond(), 0.0, bracket=(0.0, 0.5))
    with pytest.raises(BadBracket):
        find_critical_drift(diamond(), 0.0, bracket=(0.5, -0.5))


def test_critical_drift_predicate_flips_once():
    s, trace = find_critical_drift(diamond(), 0.0, tol_s=1e-2, return_trace=True)
    pts = sorted(trace)
    flags = [ok for _, ok in pts]
    assert sum(a != b for a, b in zip(flags, flags[1:])) == 1


# frozen regression value: renormalised quadrature iteration, h = 0.01
S_CR_HALF = -0.5259724527724288


def test_critical_drift_sigma_half_regression():
    s_cr, mu, info = solve_metric(diamond(), 0.5)
    assert s_cr == pytest.approx(S_CR_HALF, abs=1e-9)
    assert float(mu.quantile_interp(0.5)) == pytest.approx(0.0, abs=1e-9)


def test_critical_drift_sigma_half_two_routes():
    # Monte Carlo renormalised speed agrees with the quadrature value
    s_mc, _, _ = solve_metric(diamond(), 0.5, method="mc", n_mc=200000, max_iter=40)
    assert s_mc == pytest.approx(S_CR_HALF, abs=5e-3)


# -- cascade ---------------------------------------------------------------------------

def test_cascade_level_zero():
    mu = simulate_cascade(diamond(), CascadeParams(0.5, 0.0), 0, 100, grid=G)
    assert mu.equals(dirac(0.0, G))


@pytest.mark.parametrize("level", [1, 3, 9])
def test_cascade_deterministic(level):
    mu = simulate_cascade(diamond(), CascadeParams(0.0, -LOG2), level, 1000, grid=G)
    assert d_weak(mu, dirac(0.0, G)) <= G.step


def test_cascade_level_recursion():
    p = CascadeParams(0.5, S_CR_HALF)
    n = 200000
    lev3 = simulate_cascade(diamond(), p, 3, n, seed=1, grid=G)
    lev4 = simulate_cascade(diamond(), p, 4, n, seed=2, grid=G)
    pushed = pushforward(diamond(), p, lev3, n_samples=n, seed=3)
    assert d_weak(lev4, pushed) <= 2 * 3 / math.sqrt(n)
