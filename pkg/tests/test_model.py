import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ifp import markov
from ifp.errors import DomainError, InvalidParameter, NotIrreducible, UndefinedMoment
from ifp.model import (
    ModelSpec,
    PrimitiveSpec,
    compute_growth_report,
    conditional_power_moment,
    constant,
    discrete,
    inverse_marginal_utility,
    lognormal,
    marginal_utility,
)


def iid_spec(beta=0.95, ret=None, income=None, gamma=2.0, P=None):
    P = np.array([[0.4, 0.6], [0.4, 0.6]]) if P is None else P
    return ModelSpec(
        transition=P,
        beta=constant(beta),
        ret=ret or discrete([[0.95, 1.08]], [[0.5, 0.5]]),
        income=income or discrete([[0.5, 1.5]], [[0.5, 0.5]]),
        gamma=gamma,
    )


# --- moments -----------------------------------------------------------------------


def test_moment_examples():
    assert conditional_power_moment(constant(0.95), 0, 1.0) == 0.95
    assert conditional_power_moment(lognormal(0.0, 1.0), 0, 2.0) == pytest.approx(math.exp(2.0), rel=1e-14)
    d = discrete([[2.0, 0.5]], [[0.5, 0.5]])
    assert conditional_power_moment(d, 0, -0.5) == pytest.approx(1.0606601717798212, rel=1e-14)


def test_zero_atom_conventions():
    d = discrete([[0.0, 2.0]], [[0.25, 0.75]])
    assert conditional_power_moment(d, 0, 0.0) == 1.0
    assert conditional_power_moment(d, 0, 1.0) == 1.5
    with pytest.raises(UndefinedMoment):
        conditional_power_moment(d, 0, -1.0)
    assert conditional_power_moment(constant(0.0), 0, 2.0) == 0.0


def test_lognormal_moment_against_quadrature():
    ln = lognormal([0.1, -0.3], [0.2, 0.5])
    for z in range(2):
        for s in (-1.5, 0.5, 3.0):
            x, w = ln.quadrature(z, 41)
            assert ln.moment(z, s) == pytest.approx(float(w @ x ** s), rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.floats(-2, 2), st.floats(0.01, 1.5), st.floats(-3, 3))
def test_moment_of_order_zero_is_one(m, v, s):
    assert lognormal(m, v).moment(0, 0.0) == 1.0
    # log-convexity in s: E X^s E X^-s >= 1
    ln = lognormal(m, v)
    assert ln.moment(0, s) * ln.moment(0, -s) >= 1.0 - 1e-12


@pytest.mark.parametrize("bad", [
    lambda: lognormal(0.0, 0.0),
    lambda: lognormal([0.0, 1.0], [0.1, 0.2, 0.3]),
    lambda: discrete([[1.0, 2.0]], [[0.5, 0.6]]),
    lambda: discrete([[-1.0, 2.0]], [[0.5, 0.5]]),
    lambda: constant(-1.0),
    lambda: PrimitiveSpec("gamma"),
])
def test_invalid_primitives(bad):
    with pytest.raises(InvalidParameter):
        bad()


def test_primitive_json_round_trip():
    for p in (constant([0.9, 0.95]), lognormal([0.0, 0.1], [0.2, 0.3]), discrete([[1.0, 2.0]], [[0.3, 0.7]])):
        q = PrimitiveSpec.from_json(json.loads(json.dumps(p.to_json())))
        assert q.to_json() == p.to_json()


# --- utility -----------------------------------------------------------------------


def test_marginal_utility_examples():
    assert marginal_utility(1.0, 2.0) == 0.5
    assert marginal_utility(1.5, 1.0) == 1.0
    assert inverse_marginal_utility(2.0, 4.0) == pytest.approx(0.5, rel=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.2, 6.0), st.floats(1e-4, 1e4))
def test_marginal_utility_round_trip(gamma, c):
    assert inverse_marginal_utility(gamma, marginal_utility(gamma, c)) == pytest.approx(c, rel=1e-12)


@pytest.mark.parametrize("x", [0.0, -1.0])
def test_marginal_utility_domain(x):
    with pytest.raises(DomainError):
        marginal_utility(2.0, x)
    with pytest.raises(DomainError):
        inverse_marginal_utility(2.0, x)


# --- specs ---------------------------------------------------------------------------


def test_spec_validation():
    with pytest.raises(NotIrreducible):
        iid_spec(P=np.eye(2))
    with pytest.raises(InvalidParameter):
        iid_spec(income=constant(0.0))
    with pytest.raises(InvalidParameter):
        iid_spec(gamma=0.0)
    with pytest.raises(InvalidParameter):
        ModelSpec(np.eye(1), constant([0.9, 0.9]), constant(1.0), constant(1.0), 2.0)


def test_spec_json_round_trip():
    spec = iid_spec(ret=lognormal([0.0, 0.02], [0.1, 0.2]))
    again = ModelSpec.from_json(json.loads(json.dumps(spec.to_json())))
    assert again.to_json() == spec.to_json()


# --- growth report -------------------------------------------------------------------


def test_benhabib_style_flags():
    rep = compute_growth_report(iid_spec())
    assert rep.flags["discount"] and rep.flags["discounted_return"] and rep.flags["income_moments"]
    assert rep.flags["stability"]
    assert rep.flags["mixing"]
    assert rep.flags["wealth_growth"] is None


def test_beta_one_fails_discount():
    rep = compute_growth_report(iid_spec(beta=1.0))
    assert rep.g_beta == pytest.approx(1.0, abs=1e-12)
    assert not rep.flags["discount"]


def test_persistent_ar1_discount_fails():
    ch = markov.rouwenhorst(15, 0.99, 0.98, 0.02)
    spec = ModelSpec(ch.transition, constant(ch.states), constant(1.0), constant(1.0), 2.0)
    rep = compute_growth_report(spec)
    assert rep.g_beta > 1.0
    assert not rep.flags["discount"]


def test_zero_income_atom_fails_moment_flag():
    rep = compute_growth_report(iid_spec(income=discrete([[0.0, 2.0]], [[0.1, 0.9]])))
    assert rep.e_uprime_y == math.inf
    assert not rep.flags["income_moments"]


def test_log_utility_s_bar_is_max_beta_mean():
    P = np.array([[0.7, 0.3], [0.2, 0.8]])
    spec = ModelSpec(P, lognormal([-0.1, -0.05], [0.01, 0.02]), lognormal(0.0, 0.1), constant(1.0), 1.0)
    rep = compute_growth_report(spec)
    assert rep.s_bar == pytest.approx((P @ spec.beta.means()).max(), rel=1e-14)


@pytest.mark.parametrize("gamma", [1.0, 1.5, 2.0, 4.0])
def test_jensen_chain(gamma):
    ret = discrete([[0.9, 1.02, 1.1]], [[0.2, 0.5, 0.3]])
    spec = iid_spec(beta=0.93, ret=ret, gamma=gamma)
    rep = compute_growth_report(spec)
    x, p = ret.points[0], ret.probs[0]
    assert rep.g_beta_r <= 0.93 * (p @ x ** (1 - gamma)) * (p @ x) ** gamma + 1e-12


def test_stable_property_matches_definition():
    rep = compute_growth_report(iid_spec())
    assert rep.stable == (max(rep.g_beta_r, rep.s_bar, rep.s_bar * rep.g_r) < 1)
    d = rep.to_dict()
    assert d["s_bar_G_R"] == rep.s_bar * rep.g_r


def test_mixing_flag_needs_persistent_state():
    P = np.array([[0.0, 1.0], [1.0, 0.0]])
    spec = ModelSpec(P, constant(0.9), constant(1.0), lognormal(0.0, 0.1), 2.0)
    assert not compute_growth_report(spec).flags["mixing"]
