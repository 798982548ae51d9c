import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rdelab.errors import DegenerateCutoff
from rdelab.hiergraph import CascadeParams, MetricModel, critical_model, diamond
from rdelab.measure import INF, Grid, d_weak, dirac, stochastic_leq, translate
from rdelab.rde import (Block, BlockSearchParams, CutoffSchedule, S_a, S_iterate, Subblock,
                        build_block, center, check_assumptions, choose_b1_N, default_center_tol,
                        delta_fn, make_block, n_steps_to, phi, phi_block, phi_cut, resolve_epsilon_0,
                        stationary_cutoff, superexp_check)

G = Grid(-10.0, 10.0, 0.01)
LOG2 = math.log(2.0)


@pytest.fixture(scope="module")
def crit():
    """Diamond at sigma = 0.5 and its critical drift, quadrature engine."""
    return critical_model(diamond(), 0.5)


def det_model(s, n=10 ** 4):
    return MetricModel(diamond(), CascadeParams(0.0, s), G, n, "mc")


def scalar_orbit(s, a, n):
    """x -> min(x + log 2 + s, a) from +inf: the sigma = 0 diamond on equal inputs."""
    x, out = INF, []
    for _ in range(n):
        x = min(x + LOG2 + s, a)
        out.append(x)
    return out


# -- phi and cut-offs ------------------------------------------------------------

def test_phi_deterministic_fixed_point():
    assert phi(det_model(-LOG2), dirac(0.0, G), 1).equals(dirac(0.0, G))


def test_phi_plus_inf():
    assert phi(det_model(0.0), dirac(INF, G), 1).atom_pos_inf == 1.0


def test_phi_requires_positive_iterations():
    with pytest.raises(ValueError):
        phi(det_model(0.0), dirac(0.0, G), 0)


@pytest.mark.parametrize("a", [-2.0, 0.0, 3.5])
def test_phi_cut_of_plus_inf(a):
    assert phi_cut(det_model(0.0), dirac(INF, G), a).equals(dirac(a, G))


def test_phi_cut_below_window():
    with pytest.raises(DegenerateCutoff):
        phi_cut(det_model(0.0), dirac(0.0, G), -11.0)


def test_phi_cut_lowers(crit):
    m, mu = crit
    assert stochastic_leq(phi_cut(m, mu, 0.5), phi(m, mu, 1))


def test_phi_cut_converges_as_a_grows(crit):
    m, mu = crit
    d = [d_weak(phi_cut(m, mu, a), mu) for a in range(2, 21, 2)]
    assert all(x >= y for x, y in zip(d, d[1:]))
    assert d[-1] <= 1e-6


@settings(max_examples=15, deadline=None)
@given(st.floats(-1.0, 3.0), st.floats(0.0, 2.0))
def test_cutoff_monotone_in_a(a, da):
    m = MetricModel(diamond(), CascadeParams(0.5, -0.5), G, method="quadrature")
    mu = translate(dirac(0.0, G), 0.3)
    assert stochastic_leq(phi_cut(m, mu, a), phi_cut(m, mu, a + da), tol=1e-12)


def test_phi_block_equivalences(crit):
    m, mu = crit
    assert phi_block(m, mu, Block([INF])).equals(phi(m, mu, 1))
    assert phi_block(m, mu, Block([0.7])).equals(phi_cut(m, mu, 0.7))
    sub = Block.from_subblocks([Subblock(0.7, 3)])
    assert list(sub.entries) == [INF, INF, INF, 0.7]
    assert phi_block(m, mu, sub).equals(phi(m, phi_cut(m, mu, 0.7), 3))


# -- stationary cut-off limits ------------------------------------------------------

@pytest.mark.parametrize("s, a", [(0.0, 1.0), (0.2, -0.5), (-0.5, 2.0)])
def test_stationary_cutoff_nontrivial_matches_scalar(s, a):
    mu, trace = stationary_cutoff(det_model(s), a, return_trace=True)
    x = scalar_orbit(s, a, len(trace))[-1]
    assert float(mu.quantile(0.5)) == pytest.approx(x, abs=G.step)


def test_stationary_cutoff_trivial_below_critical():
    s, a = -1.0, 1.0
    mu = stationary_cutoff(det_model(s), a, max_iter=200)
    assert mu.atom_neg_inf == 1.0
    orbit = scalar_orbit(s, a, 200)
    assert orbit[-1] < G.grid_min


def test_stationary_cutoff_iterates_decrease(crit):
    m, _ = crit
    mu = dirac(INF, m.grid)
    prev = mu
    for n in range(8):
        mu = phi_cut(m, prev, 1.0, seed=n)
        assert stochastic_leq(mu, prev, tol=1e-12)
        prev = mu


# -- centers and displacement -----------------------------------------------------

def test_center_of_fixed_point(crit):
    m, mu = crit
    assert abs(center(m, mu, mu)) <= mu.step


@pytest.mark.parametrize("c", [-0.4, 0.13, 0.5])
def test_center_equivariance(crit, c):
    m, mu = crit
    assert center(m, translate(mu, c), mu) == pytest.approx(c, abs=mu.step)


@pytest.mark.parametrize("b", [0.5, 1.5])
def test_center_of_dirac_shifts(crit, b):
    m, mu = crit
    c0 = center(m, dirac(0.0, m.grid), mu)
    assert center(m, dirac(b, m.grid), mu) - c0 == pytest.approx(b, abs=2 * mu.step)


@pytest.mark.parametrize("c", [-0.2, 0.0, 0.3])
def test_S_a_displaces_left(crit, c):
    m, mu = crit
    assert S_a(m, mu, c, 0.5) < c


def test_S_a_tends_to_c(crit):
    m, mu = crit
    c = 0.1
    gaps = [c - S_a(m, mu, c, a) for a in (1.0, 2.0, 3.0, 4.0)]
    assert all(g > 0 for g in gaps[:2])
    assert all(x >= y for x, y in zip(gaps, gaps[1:]))
    assert gaps[-1] <= 1e-6


def test_S_a_at_plus_inf(crit):
    m, mu = crit
    assert S_a(m, mu, INF, 0.8) == pytest.approx(center(m, dirac(0.8, m.grid), mu), abs=1e-12)


LATTICE_A = (0.0, 0.5, 1.0, 1.5)
LATTICE_C = (-0.3, -0.1, 0.1, 0.3)


def test_delta_translation_identity(crit):
    m, mu = crit
    tol = default_center_tol(m)
    for a in LATTICE_A:
        for c in LATTICE_C:
            assert delta_fn(m, mu, a, c) == pytest.approx(delta_fn(m, mu, a - c, 0.0),
                                                          abs=2 * tol)


def test_delta_monotone(crit):
    m, mu = crit
    D = np.array([[delta_fn(m, mu, a, c) for c in LATTICE_C] for a in LATTICE_A])
    assert np.all(np.diff(D, axis=1) > 0)
    assert np.all(np.diff(D, axis=0) < 0)


def test_delta_bounded_by_tail(crit):
    # fitted constant L in Delta(a) <= 2 L f(a) stays bounded along the ladder
    m, mu = crit
    a = np.array([0.0, 0.5, 1.0, 1.5])
    f = 1.0 - mu.cdf_at(a)
    ratio = np.array([delta_fn(m, mu, x) for x in a]) / (2 * f)
    assert np.all(np.isfinite(ratio))
    assert ratio[-1] <= ratio[0]


@pytest.mark.parametrize("c, b", [(0.3, 0.5), (0.15, 1.0)])
def test_telescoping_bounds(crit, c, b):
    m, mu = crit
    tol = default_center_tol(m)
    N, orbit = n_steps_to(m, mu, c, b, 0.0, 4000)
    assert N is not None
    for n in range(1, N + 1):
        upper = n * delta_fn(m, mu, b, c)
        lower = n * delta_fn(m, mu, b, orbit[n - 1])
        assert upper + 3 * tol >= c - orbit[n] >= lower - 3 * tol


def test_S_iterate_matches_orbit(crit):
    m, mu = crit
    orbit = S_iterate(m, mu, 0.2, 0.5, 3)
    assert len(orbit) == 4 and all(x > y for x, y in zip(orbit, orbit[1:]))


# -- blocks -------------------------------------------------------------------------

P7 = BlockSearchParams(0.2, 0.05, 0.05)


@pytest.fixture(scope="module")
def block7(crit):
    m, mu = crit
    return build_block(m, mu, P7, return_info=True)


def test_block_params_validation():
    with pytest.raises(ValueError):
        BlockSearchParams(0.1, 0.2, 0.05)
    assert BlockSearchParams(0.2, 0.05, 0.05).delta_dblprime == pytest.approx(0.125)


def test_choose_b1_N_conditions(crit, block7):
    m, mu = crit
    _, _, info = block7
    b1, N, c0 = info["b1"], info["N"], info["c0"]
    assert (b1, N) == choose_b1_N(m, mu, c0, P7)
    eps0 = resolve_epsilon_0(mu, P7)
    end = S_iterate(m, mu, c0, b1, N)[-1]
    assert -eps0 < end <= 0
    low = S_iterate(m, mu, -P7.delta_dblprime, b1, N)[-1]
    assert -P7.delta < low < -P7.delta_dblprime
    assert N <= (c0 + eps0) / delta_fn(m, mu, b1, 0.0) + 1


def test_build_block_properties(crit, block7):
    m, mu = crit
    block, eps_p, info = block7
    assert eps_p > 0
    assert block.size == (info["N"] + 1) * (info["ell"] + 1)
    assert d_weak(phi_block(m, dirac(INF, m.grid), block), mu) <= P7.epsilon
    img = phi_block(m, translate(mu, -P7.delta_prime / 2).with_residual(0.0), block)
    c = center(m, img, mu)
    assert -P7.delta < c < 0
    assert d_weak(img, translate(mu, c)) <= P7.epsilon
    assert block == make_block(info["b0"], info["b1"], info["N"], info["ell"])


def test_schedule_json_round_trip():
    blocks = [Block([INF, 0.5]), Block([INF, INF, 1.0, -0.25])]
    S = CutoffSchedule(blocks, [0.4, 0.2], [0.1, 0.05])
    assert S.partial_sums == [2, 6]
    d = S.to_dict()
    assert set(d) >= {"blocks", "deltas", "epsilons", "partial_sums"}
    assert '"inf"' in S.to_json()
    back = CutoffSchedule.from_json(S.to_json())
    assert back.to_json() == S.to_json()
    assert list(back.entries) == [INF, 0.5, INF, INF, 1.0, -0.25]


# -- assumption checks -------------------------------------------------------------

def test_superexp_check_shapes():
    a = np.arange(6.0)
    ok, _ = superexp_check(a, np.exp(-a ** 2), betas=(1, 2, 4))
    assert ok
    ok, ev = superexp_check(a, np.exp(-2 * a), betas=(1, 2, 4))
    assert not ok and ev["final_slope"] == pytest.approx(-2)


def test_assumptions_diamond(crit):
    m, mu = crit
    rep = check_assumptions(m, mu)
    assert rep.passed, rep.to_dict()
    assert [i["name"] for i in rep.items] == ["A1", "A2", "A4", "A5/A6", "A7"]


# -- determinism --------------------------------------------------------------------

def test_seeded_mc_is_bit_identical():
    m = MetricModel(diamond(), CascadeParams(0.5, -0.5), G, 20000, "mc")
    a = phi(m, dirac(0.0, G), 3, seed=11)
    b = phi(m, dirac(0.0, G), 3, seed=11)
    assert a.equals(b)
    assert not a.equals(phi(m, dirac(0.0, G), 3, seed=12))
