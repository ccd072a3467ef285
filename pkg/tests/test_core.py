"""Core types, overlap satisfaction, support sets, and the utility family."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import ctrules as ct
from helpers import core_example_profile, dirichlet_profile, random_allocation, sp_example_profile

CONSTANT_IAV = [("log", None, 1.0), ("power", 0.5, 0.5), ("power", 0.25, 0.75), ("negpower", 2.0, 3.0), ("negpower", 1.0, 2.0)]


# ---------------------------------------------------------------------------
# Profile / Allocation validation
# ---------------------------------------------------------------------------


def test_profile_rejects_bad_rows():
    with pytest.raises(ValueError):
        ct.Profile([[0.5, 0.4]])
    with pytest.raises(ValueError):
        ct.Profile([[1.2, -0.2]])
    with pytest.raises(ValueError):
        ct.Profile([[1.0]])  # m must be at least 2


def test_allocation_validation():
    with pytest.raises(ValueError):
        ct.Allocation([0.5, 0.6])
    with pytest.raises(ValueError):
        ct.Allocation([-0.1, 1.1])
    assert ct.Allocation.uniform(4).shares.sum() == pytest.approx(1.0)


def test_profile_without():
    p = sp_example_profile()
    reduced = p.without(0)
    assert reduced.n == 1
    assert np.array_equal(reduced.prefs[0], p.prefs[1])
    with pytest.raises(ValueError):
        p.without([0, 1])


# ---------------------------------------------------------------------------
# Satisfaction
# ---------------------------------------------------------------------------


def test_satisfaction_half_half_vs_quarter():
    p = sp_example_profile()
    assert ct.satisfaction(p, ct.Allocation([0.25, 0.75]), 0) == pytest.approx(0.75)


def test_satisfaction_own_ideal_is_one():
    p = dirichlet_profile(0, 4, 3)
    for i in range(p.n):
        assert ct.satisfaction(p, ct.Allocation(p.prefs[i]), i) == pytest.approx(1.0)


def test_satisfaction_single_minded_half():
    p = ct.Profile([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    assert ct.satisfaction(p, ct.Allocation([0.5, 0.0, 0.5]), 0) == pytest.approx(0.5)


def test_satisfaction_index_error():
    p = sp_example_profile()
    with pytest.raises(IndexError):
        ct.satisfaction(p, ct.Allocation([0.5, 0.5]), 2)


def test_satisfaction_vector_uniform_profile_is_constant():
    p = ct.Profile([[0.2, 0.3, 0.5]] * 5)
    vec = ct.satisfaction_vector(p, ct.Allocation([0.5, 0.25, 0.25]))
    assert np.allclose(vec.values, vec.values[0])


def test_satisfaction_vector_core_example():
    p = core_example_profile()
    vec = ct.satisfaction_vector(p, ct.Allocation([0.5, 0.0, 0.5]))
    assert np.allclose(vec.values, 0.5)


def test_satisfaction_vector_matches_per_agent_calls():
    p = dirichlet_profile(7, 6, 4)
    x = random_allocation(8, 4)
    vec = ct.satisfaction_vector(p, x)
    expected = [ct.satisfaction(p, x, i) for i in range(p.n)]
    assert np.allclose(vec.values, expected)


# ---------------------------------------------------------------------------
# Support sets
# ---------------------------------------------------------------------------


def test_support_sets_single_minded_interior():
    p = ct.Profile([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
    s = ct.support_sets(p, ct.Allocation([0.3, 0.7]))
    assert s.up_agents(0) == s.down_agents(0) == frozenset({0})
    assert s.up_agents(1) == s.down_agents(1) == frozenset({1, 2})


def test_support_sets_sp_example_ties():
    s = ct.support_sets(sp_example_profile(), ct.Allocation([0.5, 0.5]))
    assert s.up_agents(0) == frozenset()
    assert s.down_agents(0) == frozenset({0})
    assert s.up_agents(1) == frozenset({1})
    assert s.down_agents(1) == frozenset({0, 1})


def test_support_sets_unanimous_at_ideal():
    p = ct.Profile([[0.4, 0.6]] * 3)
    s = ct.support_sets(p, ct.Allocation([0.4, 0.6]))
    for j in range(2):
        assert s.up_agents(j) == frozenset()
        assert s.down_agents(j) == frozenset({0, 1, 2})


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_support_sets_transposition_invariant(seed):
    p = dirichlet_profile(seed, 5, 3)
    x = random_allocation(seed + 1, 3)
    s = ct.support_sets(p, x)
    for i in range(p.n):
        for j in range(p.m):
            assert (i in s.up_agents(j)) == (j in s.sigma_up(i))
            assert (i in s.down_agents(j)) == (j in s.sigma_down(i))
            assert s.up_agents(j) <= s.down_agents(j)


# ---------------------------------------------------------------------------
# Marginal contributions
# ---------------------------------------------------------------------------


def test_marginal_contribution_empty_support_is_zero():
    p = ct.Profile([[1.0, 0.0], [1.0, 0.0]])
    f = ct.make_utility("log")
    assert ct.marginal_contribution(p, ct.Allocation([0.5, 0.5]), f, 1, "up") == 0.0


def test_marginal_contribution_sp_example_down():
    f = ct.make_utility("log")
    x = ct.Allocation([0.5, 0.5])
    # agent 0 has satisfaction 1.0, agent 1 has 0.5: 1/1 + 1/0.5 = 3
    assert ct.marginal_contribution(sp_example_profile(), x, f, 1, "down") == pytest.approx(3.0)


def test_marginal_contribution_single_minded_groups_equalized():
    p = ct.Profile([[1.0, 0.0]] + [[0.0, 1.0]] * 3)
    f = ct.make_utility("log")
    x = ct.Allocation([0.25, 0.75])
    assert ct.marginal_contribution(p, x, f, 0, "up") == pytest.approx(4.0)
    assert ct.marginal_contribution(p, x, f, 1, "up") == pytest.approx(4.0)


# ---------------------------------------------------------------------------
# Utility family
# ---------------------------------------------------------------------------


def test_make_utility_values():
    assert ct.make_utility("log").value(0.5) == pytest.approx(np.log(0.5))
    pw = ct.make_utility("power", p=0.5)
    assert pw.value(0.25) == pytest.approx(0.5)
    assert pw.deriv(0.25) == pytest.approx(1.0)
    assert ct.make_utility("negpower", p=2.0).value(0.5) == pytest.approx(-4.0)


def test_make_utility_parameter_validation():
    with pytest.raises(ValueError):
        ct.make_utility("power", p=1.5)
    with pytest.raises(ValueError):
        ct.make_utility("negpower", p=-1.0)
    with pytest.raises(ValueError):
        ct.make_utility("power")
    with pytest.raises(ValueError):
        ct.make_utility("log", p=2.0)
    with pytest.raises(ValueError):
        ct.make_utility("log", floor=0.1)
    with pytest.raises(ValueError):
        ct.make_utility("wat")  # type: ignore[arg-type]


def test_floor_applies_below_threshold():
    f = ct.make_utility("log", floor=1e-6)
    assert f.value(0.0) == pytest.approx(np.log(1e-6))
    assert f.deriv(1e-9) == pytest.approx(1e6)


@pytest.mark.parametrize(
    "kind,p",
    [("log", None), ("power", 0.5), ("power", 0.9), ("negpower", 2.0), ("negexppower", 1.0), ("quadratic", None)],
)
def test_derivatives_match_finite_differences(kind, p):
    f = ct.make_utility(kind, p=p)
    h1, h2 = 1e-6, 1e-5
    for t in np.linspace(0.05, 0.95, 13):
        fd1 = (f.value(t + h1) - f.value(t - h1)) / (2 * h1)
        fd2 = (f.value(t + h2) - 2 * f.value(t) + f.value(t - h2)) / h2**2
        assert f.deriv(t) == pytest.approx(fd1, rel=1e-5)
        assert f.second(t) == pytest.approx(fd2, rel=1e-4, abs=1e-6)


@pytest.mark.parametrize(
    "kind,p",
    [("log", None), ("power", 0.5), ("negpower", 2.0), ("negexppower", 1.0), ("quadratic", None)],
)
def test_increasing_and_strictly_concave(kind, p):
    f = ct.make_utility(kind, p=p)
    # quadratic flattens exactly at t=1, so sample just inside
    for t in np.linspace(f.floor, 1.0 - 1e-9, 50):
        assert f.deriv(t) > 0.0
        assert f.second(t) < 0.0


def test_identity_is_not_strictly_concave():
    f = ct.make_utility("identity")
    assert not f.strictly_concave
    assert float(f.second(0.5)) == 0.0


def test_iav_analytic_values():
    for t in np.linspace(0.01, 1.0, 25):
        assert ct.iav(ct.make_utility("log"), t) == pytest.approx(1.0, abs=1e-9)
        assert ct.iav(ct.make_utility("power", p=0.5), t) == pytest.approx(0.5, abs=1e-9)
        assert ct.iav(ct.make_utility("negpower", p=2.0), t) == pytest.approx(3.0, abs=1e-9)


def test_iav_errors():
    f = ct.make_utility("log")
    with pytest.raises(ValueError):
        ct.iav(f, 1e-12)  # below floor
    with pytest.raises(ValueError):
        ct.iav(ct.make_utility("quadratic"), 1.0)  # f'(1) = 0


def test_iav_bound_of_catalog():
    assert ct.iav_bound_of(ct.make_utility("log")) == ct.IavBound(1.0, 1.0)
    assert ct.iav_bound_of(ct.make_utility("power", p=0.25)) == ct.IavBound(0.75, 0.75)
    assert ct.iav_bound_of(ct.make_utility("negpower", p=2.0)) == ct.IavBound(3.0, 3.0)
    b = ct.iav_bound_of(ct.make_utility("negexppower", p=1.0))
    assert b.lower == pytest.approx(2.0) and b.upper is None
    q = ct.iav_bound_of(ct.make_utility("quadratic"))
    assert q.lower is None and q.upper is None
    with pytest.raises(ValueError):
        ct.iav_bound_of(ct.make_utility("identity"))


def test_iav_bound_ordering():
    with pytest.raises(ValueError):
        ct.IavBound(2.0, 1.0)


# ---------------------------------------------------------------------------
# Overlap identities (property tests)
# ---------------------------------------------------------------------------


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), theta=st.floats(0.0, 1.0))
def test_overlap_is_concave_in_the_allocation(seed, theta):
    p = dirichlet_profile(seed, 4, 3)
    x = random_allocation(seed + 1, 3)
    y = random_allocation(seed + 2, 3)
    mix = ct.Allocation(theta * x.shares + (1 - theta) * y.shares)
    for i in range(p.n):
        lhs = ct.satisfaction(p, mix, i)
        rhs = theta * ct.satisfaction(p, x, i) + (1 - theta) * ct.satisfaction(p, y, i)
        assert lhs >= rhs - 1e-9


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_overlap_symmetry_and_l1_identity(seed):
    p = dirichlet_profile(seed, 3, 4)
    x = random_allocation(seed + 3, 4)
    for i in range(p.n):
        pi = ct.satisfaction(p, x, i)
        swapped = float(np.minimum(x.shares, p.prefs[i]).sum())
        assert pi == pytest.approx(swapped)
        assert 1.0 - pi == pytest.approx(0.5 * np.abs(p.prefs[i] - x.shares).sum())


@settings(max_examples=60, deadline=None)
@given(
    t=st.floats(0.01, 1.0),
    alpha_frac=st.floats(0.001, 1.0),
    kind_idx=st.integers(0, len(CONSTANT_IAV) - 1),
)
def test_derivative_ratio_lemma_constant_iav(t, alpha_frac, kind_idx):
    kind, p, lam = CONSTANT_IAV[kind_idx]
    f = ct.make_utility(kind, p=p)
    alpha = 1.0 + alpha_frac * (1.0 / t - 1.0)
    if alpha <= 1.0:
        return
    ratio = float(f.deriv(t) / f.deriv(alpha * t))
    assert ratio == pytest.approx(alpha**lam, rel=1e-9, abs=1e-6)


@settings(max_examples=60, deadline=None)
@given(t=st.floats(0.01, 1.0), alpha_frac=st.floats(0.001, 1.0), p=st.floats(0.5, 2.0))
def test_derivative_ratio_lemma_negexppower_inequality(t, alpha_frac, p):
    f = ct.make_utility("negexppower", p=p)
    alpha = 1.0 + alpha_frac * (1.0 / t - 1.0)
    if alpha <= 1.0:
        return
    ratio = float(f.deriv(t) / f.deriv(alpha * t))
    assert ratio >= alpha ** (1.0 + p) - 1e-9
