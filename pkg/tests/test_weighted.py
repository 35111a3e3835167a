"""Weighted partial Ricci curvatures, CD checks, weighted Jacobi operators."""

import math

import numpy as np
import pytest

from foliate import (AdaptedPoint, InputError, VectorFieldSpec, builtin,
                     cd_check, jacobi_operator_bracket, min_partial_ricci,
                     mixed_invariants, mixed_scalar, mixed_sectional_weighted,
                     partial_ricci_q, sphere_directions,
                     weighted_jacobi_operator)


@pytest.fixture(scope="module")
def weighted_conf():
    return builtin("conformal_torus_weighted")


def _unit(rng, r):
    v = rng.normal(size=r)
    return v / np.linalg.norm(v)


def test_synthetic_dimension_shift(rng, weighted_conf):
    # changing the synthetic dimension shifts the partial Ricci by
    # q (r - N) / (r^2 N) g(X, y)^2, exactly
    W = weighted_conf.W
    for p in weighted_conf.sample_points(10, rng):
        ap = AdaptedPoint(W, p)
        E_tan, E_nor = ap.frames
        X, _ = ap.weight
        for side, E_arg, E_y in (("tan", E_tan, E_nor), ("nor", E_nor, E_tan)):
            r = E_arg.shape[1]
            q = int(rng.integers(1, r + 1))
            Q, _ = np.linalg.qr(rng.normal(size=(r, r)))
            basis = E_arg @ Q[:, :q]
            y = E_y @ _unit(rng, E_y.shape[1])
            N = float(rng.uniform(0.4, 2.5))
            gxy = float(X @ ap.g @ y)
            shift = q * (r - N) / (r * r * N) * gxy ** 2
            v_N = partial_ricci_q(W, p, y, basis, side, synth=N, ap=ap)
            v_r = partial_ricci_q(W, p, y, basis, side, synth=float(r), ap=ap)
            assert v_N - v_r == pytest.approx(shift, abs=1e-12)


def test_monotone_in_synthetic_dimension(rng, weighted_conf):
    # for N > N' > 0 the weighted partial Ricci can only decrease in N,
    # strictly when g(X, y) != 0
    W = weighted_conf.W
    p = weighted_conf.sample_points(1, rng)[0]
    ap = AdaptedPoint(W, p)
    E_tan, E_nor = ap.frames
    y = E_nor @ _unit(rng, W.n)
    basis = E_tan
    X, _ = ap.weight
    gxy = float(X @ ap.g @ y)
    assert abs(gxy) > 1e-6
    vals = [partial_ricci_q(W, p, y, basis, "tan", synth=N, ap=ap)
            for N in (0.5, 1.0, 2.0, 8.0)]
    assert vals == sorted(vals, reverse=True)
    assert vals[0] > vals[-1]


def test_q1_equals_weighted_sectional(rng, weighted_conf):
    W = weighted_conf.W
    p = weighted_conf.sample_points(1, rng)[0]
    ap = AdaptedPoint(W, p)
    E_tan, E_nor = ap.frames
    x = E_tan[:, 0]
    y = E_nor @ _unit(rng, W.n)
    a = partial_ricci_q(W, p, y, x[:, None], "tan", ap=ap)
    b = mixed_sectional_weighted(W, p, y, x, "tan", ap=ap)
    assert a == pytest.approx(b, abs=1e-13)


def test_partial_ricci_validation(rng, weighted_conf):
    W = weighted_conf.W
    p = weighted_conf.sample_points(1, rng)[0]
    ap = AdaptedPoint(W, p)
    E_tan, E_nor = ap.frames
    y = E_nor[:, 0]
    with pytest.raises(InputError):
        partial_ricci_q(W, p, 2.0 * y, E_tan, "tan", ap=ap)  # y not unit
    with pytest.raises(InputError):
        partial_ricci_q(W, p, y, np.concatenate([E_tan, E_tan], axis=1),
                        "tan", ap=ap)  # not orthonormal
    with pytest.raises(InputError):
        partial_ricci_q(W, p, y, E_tan, "sideways", ap=ap)
    with pytest.raises(InputError):
        partial_ricci_q(W, p, y, E_tan, "tan", synth=0.0, ap=ap)


def test_min_partial_ricci_constant_curvature(rng, hopf_item):
    # every mixed plane of the round sphere has curvature one, so the
    # minimum is exact and direction-independent
    W = hopf_item.W
    for p in hopf_item.sample_points(3, rng):
        val, y = min_partial_ricci(W, p, 1, side="tan")
        assert val == pytest.approx(1.0, abs=1e-10)
        assert y.shape == (3,)
        val2, _ = min_partial_ricci(W, p, 2, side="nor")
        assert val2 == pytest.approx(2.0, abs=1e-10)


def test_min_partial_ricci_matches_eigen_bound(rng, weighted_conf):
    # the reported minimum must beat direct sampling over random
    # (y, basis) configurations
    W = weighted_conf.W
    p = weighted_conf.sample_points(1, rng)[0]
    ap = AdaptedPoint(W, p)
    E_tan, E_nor = ap.frames
    q = 1
    val, _ = min_partial_ricci(W, p, q, side="tan")
    samples = []
    for _ in range(200):
        y = E_nor @ _unit(rng, W.n)
        samples.append(partial_ricci_q(W, p, y, E_tan[:, :q], "tan", ap=ap))
    assert val <= min(samples) + 1e-9


def test_cd_check_reports(rng, hopf_item):
    W = hopf_item.W
    pts = hopf_item.sample_points(6, rng)
    rep = cd_check(W, pts, 0.9, 1, side="tan")
    assert rep.holds and rep.margin == pytest.approx(0.1, abs=1e-9)
    assert rep.n_points == 6
    assert rep.worst_point.shape == (3,)
    bad = cd_check(W, pts, 1.1, 1, side="tan")
    assert not bad.holds and bad.margin == pytest.approx(-0.1, abs=1e-9)
    with pytest.raises(InputError):
        cd_check(W, pts, 1.0, 5, side="tan")  # q exceeds the rank


def test_cd_margin_monotone_as_synth_decreases(rng, weighted_conf):
    W = weighted_conf.W
    pts = weighted_conf.sample_points(4, rng)
    margins = [cd_check(W, pts, 0.0, 1, side="tan", synth=N).margin
               for N in (4.0, 2.0, 1.0, 0.5)]
    assert all(b >= a - 1e-12 for a, b in zip(margins, margins[1:]))


def test_weighted_jacobi_operator_killing_weight(rng):
    # Killing weight along the fibers: operator is (1 + c^2/4) id on D_nor
    item = builtin("hopf_s3_weighted", c=0.8)
    W = item.W
    expect = 1.0 + 0.8 ** 2 / 4.0
    for p in item.sample_points(5, rng):
        ap = AdaptedPoint(W, p)
        x = ap.frames[0][:, 0]
        A = weighted_jacobi_operator(W, p, x, ap)
        np.testing.assert_allclose(A, expect * np.eye(2), atol=1e-11)
    k1, k2 = jacobi_operator_bracket(W, item.sample_points(5, rng))
    assert k1 == pytest.approx(expect, abs=1e-10)
    assert k2 == pytest.approx(expect, abs=1e-10)


def test_zero_weight_is_bitwise_neutral(rng, conformal_item):
    W0 = conformal_item.W
    Wz = W0.with_weight(VectorFieldSpec.zero(3))
    p = conformal_item.sample_points(1, rng)[0]
    ap0 = AdaptedPoint(W0, p)
    apz = AdaptedPoint(Wz, p)
    x = ap0.frames[0][:, 0]
    np.testing.assert_array_equal(
        weighted_jacobi_operator(W0, p, x, ap0),
        weighted_jacobi_operator(Wz, p, x, apz))
    inv0 = mixed_invariants(W0, p)
    invz = mixed_invariants(Wz, p)
    assert float(invz["s_w"]) == float(inv0["s_mix"])


def test_mixed_scalar_trace_consistency(rng, weighted_conf):
    # half the sum of both full partial-Ricci traces recovers s_w plus the
    # synthetic-dimension corrections
    W = weighted_conf.W
    p = weighted_conf.sample_points(1, rng)[0]
    out = mixed_scalar(W, p)
    inv = mixed_invariants(W, p)
    assert out["s_w"] == pytest.approx(float(inv["s_w"]), abs=1e-12)
    ap = AdaptedPoint(W, p)
    E_tan, E_nor = ap.frames
    tr = 0.0
    for i in range(W.n):
        tr += partial_ricci_q(W, p, E_nor[:, i], E_tan, "tan", ap=ap)
    for a in range(W.nu):
        tr += partial_ricci_q(W, p, E_tan[:, a], E_nor, "nor", ap=ap)
    X, _ = ap.weight
    x_tan2 = float(inv["X_tan2"])
    x_nor2 = float(inv["X_nor2"])
    s_mix = float(inv["s_mix"])
    div_x = float(inv["div_X"])
    expect = (s_mix + 0.5 * div_x + x_tan2 / (2.0 * W.n_synth)
              + x_nor2 / (2.0 * W.nu_synth))
    assert 0.5 * tr == pytest.approx(expect, abs=1e-11)


def test_sphere_directions_are_unit_and_spread():
    dirs = sphere_directions(3, 64)
    np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-12)
    assert dirs.shape == (64, 3)
    # antipodal duplicates are not included
    gram = dirs @ dirs.T
    np.fill_diagonal(gram, 0.0)
    assert np.max(gram) < 1.0 - 1e-8
