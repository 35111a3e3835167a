"""Arithmetic bounds, scalar inequalities, and the blow-up replay."""

import math

import numpy as np
import pytest

from foliate import (DiameterBoundInput, InputError, Thm418Params, builtin,
                     diameter_bound, extrinsic_q_ricci, f_delta,
                     ferus_scenario, focal_inequality, nullity_threshold,
                     pinching_inequality, radon_hurwitz, rho_bound_check,
                     thm418_hypothesis)


# ---------------------------------------------------------------------------
# Radon-Hurwitz arithmetic
# ---------------------------------------------------------------------------

RHO_TABLE = {1: 1, 2: 2, 3: 1, 4: 4, 5: 1, 6: 2, 7: 1, 8: 8, 12: 4,
             16: 9, 32: 10, 64: 12, 128: 16, 256: 17, 512: 18, 4096: 25}


def test_radon_hurwitz_table():
    for n, rho in RHO_TABLE.items():
        assert radon_hurwitz(n) == rho, n
    # odd numbers always give 1
    for n in (9, 15, 21, 1001):
        assert radon_hurwitz(n) == 1
    with pytest.raises(InputError):
        radon_hurwitz(0)


def test_rho_log_bound():
    assert rho_bound_check(4096)
    assert rho_bound_check(7)
    assert rho_bound_check(1)
    # the bound is tight exactly at n = 8
    margins = {n: 2.0 * math.log2(n) + 2.0 - radon_hurwitz(n)
               for n in range(2, 4097)}
    assert min(margins.values()) == 0.0
    assert margins[8] == 0.0
    assert all(m >= 0.0 for m in margins.values())


def test_nullity_threshold_values():
    assert nullity_threshold(2) == 0
    assert nullity_threshold(3) == 1
    assert nullity_threshold(9) == 1
    assert nullity_threshold(12) == 4
    assert nullity_threshold(16) == 0
    with pytest.raises(InputError):
        nullity_threshold(1)


# ---------------------------------------------------------------------------
# f(delta) and companions
# ---------------------------------------------------------------------------

def test_f_delta_values_and_monotonicity():
    assert f_delta(1.0) == pytest.approx(2.0, abs=1e-15)
    assert f_delta(0.7) == pytest.approx(0.6459159457043328, abs=1e-15)
    grid = np.linspace(0.34, 1.0, 300)
    vals = [f_delta(d) for d in grid]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    for bad in (1.0 / 3.0, 0.2, -1.0):
        with pytest.raises(InputError):
            f_delta(bad)


def test_pinching_inequality():
    out = pinching_inequality(0.7, 0.5)
    assert out["holds"]
    expect_lhs = 0.3 * (math.pi / 2 + 0.5) * (1.7 / 1.1) ** 2
    assert out["lhs"] == pytest.approx(expect_lhs, rel=1e-14)
    assert out["rhs"] == pytest.approx(math.sqrt(2 * 0.7 * 1.7), rel=1e-14)
    # a long enough focal-free stretch defeats it
    assert not pinching_inequality(0.7, 40.0)["holds"]
    with pytest.raises(InputError):
        pinching_inequality(0.3, 0.5)
    with pytest.raises(InputError):
        pinching_inequality(0.7, -0.1)


def test_focal_inequality_contradicts_pinching():
    # wherever the pinching inequality holds, the focal one must fail at
    # ratio <= 1: the two are strict alternatives by construction
    for d in (0.7, 0.8, 0.95):
        assert pinching_inequality(d, 0.5)["holds"]
        assert not focal_inequality(d, 0.5)["holds"]
    # a large turbulence-to-curvature ratio rescues the focal inequality
    assert focal_inequality(0.7, 0.5, ratio=3.0)["holds"]
    with pytest.raises(InputError):
        focal_inequality(0.7, 0.5, ratio=-1.0)


# ---------------------------------------------------------------------------
# diameter bound
# ---------------------------------------------------------------------------

def test_diameter_bound_cases():
    res = diameter_bound(DiameterBoundInput(c=1.0, q=1, nu=1, n=2))
    assert res["case"] == 1
    assert res["value"] == math.pi / 2.0
    res2 = diameter_bound(DiameterBoundInput(c=2.0, q=2, nu=2, n=2))
    assert res2["case"] == 2
    assert res2["diam_sq_bound"] == pytest.approx(math.pi ** 2 / 8.0)
    res3 = diameter_bound(DiameterBoundInput(c=1.0, q=1, nu=3, n=2))
    assert res3["case"] == 3
    assert res3["diam_sq_bound"] == 0.0


def test_diameter_bound_monotonicity():
    vals_c = [diameter_bound(DiameterBoundInput(c=c, q=1, nu=1, n=2,
                                                h_norm=0.3))["value"]
              for c in (0.5, 1.0, 2.0)]
    assert vals_c[0] > vals_c[1] > vals_c[2]
    vals_h = [diameter_bound(DiameterBoundInput(c=1.0, q=1, nu=1, n=2,
                                                h_norm=h))["value"]
              for h in (0.0, 0.2, 0.5)]
    assert vals_h[0] < vals_h[1] < vals_h[2]
    # the weight component inflates the bound below its critical size
    vals_x = [diameter_bound(DiameterBoundInput(c=1.0, q=1, nu=1, n=2,
                                                x_nor_norm=x))["value"]
              for x in (0.0, 0.5, 0.9)]
    assert vals_x[0] < vals_x[1] < vals_x[2]


def test_diameter_bound_validation():
    with pytest.raises(InputError):
        DiameterBoundInput(c=0.0, q=1, nu=1, n=2)
    with pytest.raises(InputError):
        DiameterBoundInput(c=1.0, q=2, nu=1, n=2)
    with pytest.raises(InputError):
        DiameterBoundInput(c=1.0, q=1.0, nu=1, n=2)  # float q
    with pytest.raises(InputError):
        DiameterBoundInput(c=1.0, q=1, nu=1, n=2, h_norm=-0.1)


# ---------------------------------------------------------------------------
# pinched-curvature hypothesis
# ---------------------------------------------------------------------------

def test_thm418_params_and_hypothesis():
    p = Thm418Params(k1=0.5, k2=1.0)
    assert p.k == 0.75 and p.delta == 0.5
    out = thm418_hypothesis(p)
    assert out["lhs"] == pytest.approx(0.375)
    assert out["rhs"] == pytest.approx(0.225)
    assert not out["holds"]
    # narrow bracket: hypothesis satisfied
    assert thm418_hypothesis(Thm418Params(k1=0.9, k2=1.0))["holds"]
    # the decomposition constant is slightly more forgiving
    loc = thm418_hypothesis(Thm418Params(k1=0.76, k2=1.0), "local")
    dec = thm418_hypothesis(Thm418Params(k1=0.76, k2=1.0), "decomposition")
    assert dec["rhs"] > loc["rhs"]
    assert dec["constant"] == 0.337 and loc["constant"] == 0.3


def test_thm418_validation():
    with pytest.raises(InputError):
        Thm418Params(k1=1.0, k2=0.5)
    with pytest.raises(InputError):
        Thm418Params(k1=0.5, k2=1.0, eps=-0.1)
    with pytest.raises(InputError):
        thm418_hypothesis(Thm418Params(k1=0.5, k2=1.0, eps=0.5))
    with pytest.raises(InputError):
        thm418_hypothesis(Thm418Params(k1=0.5, k2=1.0), variant="global")


# ---------------------------------------------------------------------------
# extrinsic partial Ricci
# ---------------------------------------------------------------------------

def test_extrinsic_q_ricci_small_case():
    h = np.zeros((2, 2, 1))
    h[0, 0, 0], h[0, 1, 0], h[1, 1, 0] = 2.0, 0.5, 3.0
    h[1, 0, 0] = 0.5
    val = extrinsic_q_ricci(h, np.array([1.0, 0.0]), np.array([[0.0, 1.0]]))
    assert val == pytest.approx(2.0 * 3.0 - 0.5 ** 2)
    # a value-slot metric scales everything
    val2 = extrinsic_q_ricci(h, np.array([1.0, 0.0]), np.array([[0.0, 1.0]]),
                             g=np.array([[2.0]]))
    assert val2 == pytest.approx(2.0 * val)


def test_extrinsic_q_ricci_validation():
    h = np.zeros((2, 2, 1))
    with pytest.raises(InputError):
        extrinsic_q_ricci(h, np.array([1.0, 0.0]), np.array([[1.0, 0.0]]))
    with pytest.raises(InputError):
        extrinsic_q_ricci(np.zeros((2, 3, 1)), np.array([1.0, 0.0]),
                          np.array([[0.0, 1.0]]))
    with pytest.raises(InputError):
        extrinsic_q_ricci(h, np.array([1.0, 0.0, 0.0]),
                          np.array([[0.0, 1.0]]))


# ---------------------------------------------------------------------------
# blow-up replay
# ---------------------------------------------------------------------------

def test_ferus_scenario_hopf(hopf_item):
    m = np.array([np.pi / 4, 0.2, 0.4])
    out = ferus_scenario(hopf_item.W, m, k=1.0)
    assert out["all_blow_up"]
    assert out["flags"] == []
    arith = out["arithmetic"]
    assert arith["nu"] == 1 and arith["n"] == 2
    assert arith["rho_n"] == 2 and arith["nu_lt_rho_n"]
    (per,) = out["per_direction"]
    assert per["drift_condition_ok"]
    (branch,) = per["branches"]
    # antisymmetric co-nullity has no real eigenvalue: reference branch
    assert branch["reference_branch"] and branch["lam0"] == 0.0
    assert branch["closed_form"] == pytest.approx(np.pi / 2.0)
    assert branch["blow_up"] == pytest.approx(np.pi / 2.0, abs=1e-3)


def test_ferus_scenario_weighted_killing():
    item = builtin("hopf_s3_weighted", c=0.5)
    k = 1.0 + 0.25 / 4.0
    out = ferus_scenario(item.W, np.array([np.pi / 4, 0.2, 0.4]), k=k)
    assert out["all_blow_up"]
    assert out["flags"] == []
    (per,) = out["per_direction"]
    (branch,) = per["branches"]
    assert "closed_form" not in branch  # no closed form with a weight
    assert branch["blow_up"] < out["T"]
    with pytest.raises(InputError):
        ferus_scenario(item.W, np.array([np.pi / 4, 0.2, 0.4]), k=0.0)
