"""Gallery items: catalog plumbing and ground-truth facts."""

import math

import numpy as np
import pytest

from foliate import (AdaptedPoint, InputError, builtin, catalog,
                     default_suite_items, eval_jet, jacobi_operator_bracket,
                     mixed_invariants, parse, second_fundamental, turbulence)

ALL_NAMES = {"flat_torus", "conformal_torus", "doubly_twisted_torus",
             "hopf_s3", "conformal_torus_weighted",
             "doubly_twisted_torus_weighted", "hopf_s3_weighted"}


# ---------------------------------------------------------------------------
# catalog plumbing
# ---------------------------------------------------------------------------

def test_catalog_names_and_descriptions():
    cat = catalog()
    assert set(cat) == ALL_NAMES
    assert all(isinstance(v, str) and v for v in cat.values())


def test_builtin_errors():
    with pytest.raises(InputError, match="available:"):
        builtin("klein_bottle")
    with pytest.raises(InputError, match="bad parameters"):
        builtin("flat_torus", twist="nope")


def test_builtin_split_validation():
    with pytest.raises(InputError):
        builtin("flat_torus", d=3, nu=3)
    with pytest.raises(InputError):
        builtin("flat_torus", d=1, nu=0)


def test_default_suite_items():
    items = default_suite_items()
    assert len(items) == 5
    assert [it.name for it in items] == [
        "flat_torus", "conformal_torus", "doubly_twisted_torus",
        "doubly_twisted_torus_weighted", "hopf_s3"]


def test_sample_points_respect_chart(hopf_item, rng):
    pts = hopf_item.sample_points(64, rng)
    assert pts.shape == (64, 3)
    lo, hi = hopf_item.W.manifold.box[0]
    pad = 0.05 * (hi - lo)
    assert np.all(pts[:, 0] >= lo + pad - 1e-12)
    assert np.all(pts[:, 0] <= hi - pad + 1e-12)
    # None rng means a fixed seed: two calls agree
    a = hopf_item.sample_points(5)
    b = hopf_item.sample_points(5)
    np.testing.assert_array_equal(a, b)


def test_warp_cap_rejection():
    with pytest.raises(InputError, match="warping cap"):
        builtin("doubly_twisted_torus", u="exp(3*sin(x0))")
    with pytest.raises(InputError, match="positive"):
        builtin("doubly_twisted_torus", u="sin(x0)")
    with pytest.raises(InputError, match="warping cap"):
        builtin("conformal_torus", phi="2.5*sin(x0)")


# ---------------------------------------------------------------------------
# ground truth per item
# ---------------------------------------------------------------------------

def test_flat_torus_everything_vanishes(flat_item, rng):
    pts = flat_item.sample_points(10, rng)
    inv = mixed_invariants(flat_item.W, pts)
    for key in ("s_mix", "h_tan2", "T_tan2", "h_nor2", "T_nor2",
                "H_tan2", "H_nor2", "s_w"):
        assert float(np.max(np.abs(inv[key]))) == 0.0, key
    assert flat_item.known_facts["extrinsic_zero"]


def test_conformal_torus_is_umbilic(conformal_item, rng):
    # |h|^2 = |H|^2 / rank on both sides, with vanishing twist tensors
    W = conformal_item.W
    for p in conformal_item.sample_points(5, rng):
        inv = mixed_invariants(W, p)
        assert float(inv["T_tan2"]) == pytest.approx(0.0, abs=1e-12)
        assert float(inv["T_nor2"]) == pytest.approx(0.0, abs=1e-12)
        assert float(inv["h_tan2"]) == pytest.approx(
            float(inv["H_tan2"]) / W.nu, abs=1e-11)
        assert float(inv["h_nor2"]) == pytest.approx(
            float(inv["H_nor2"]) / W.n, abs=1e-11)


def test_doubly_twisted_closed_forms(twisted_item, rng):
    # h and H of both distributions against the symbolic twist gradients
    W = twisted_item.W
    nu, n = W.nu, W.n
    log_u = parse(f"log({twisted_item.known_facts['twist_u']})", W.dim)
    log_v = parse(f"log({twisted_item.known_facts['twist_v']})", W.dim)
    for p in twisted_item.sample_points(20, rng):
        ap = AdaptedPoint(W, p)
        pack = second_fundamental(W, p, ap)
        gu = ap.ginv @ eval_jet(log_u, p).grad
        gv = ap.ginv @ eval_jet(log_v, p).grad
        grad_u = ap.proj_tan @ gu
        grad_v = ap.proj_nor @ gv

        def gap(a, b):
            return float(np.sqrt((a - b) @ ap.g @ (a - b)))

        assert gap(pack.H_nor, -n * grad_u) < 1e-9
        assert gap(pack.H_tan, -nu * grad_v) < 1e-9
        for i in range(n):
            for j in range(n):
                expect = -grad_u if i == j else np.zeros(W.dim)
                assert gap(pack.h_nor[i, j], expect) < 1e-9
        for a in range(nu):
            for b in range(nu):
                expect = -grad_v if a == b else np.zeros(W.dim)
                assert gap(pack.h_tan[a, b], expect) < 1e-9


def test_twisted_default_has_minimal_leaves(twisted_item, rng):
    inv = mixed_invariants(twisted_item.W, twisted_item.sample_points(10, rng))
    assert float(np.max(inv["H_tan2"])) < 1e-20


def test_hopf_facts(hopf_item, rng):
    W = hopf_item.W
    facts = hopf_item.known_facts
    assert facts["totally_geodesic"] and facts["fiber_length"] == 2 * math.pi
    pts = hopf_item.sample_points(5, rng)
    inv = mixed_invariants(W, pts)
    np.testing.assert_allclose(inv["s_mix"], facts["s_mix"], atol=1e-11)
    assert float(np.max(inv["h_tan2"])) < 1e-22
    assert float(np.max(inv["h_nor2"])) < 1e-22
    np.testing.assert_allclose(inv["T_nor2"], 2.0, atol=1e-11)
    rep = turbulence(W, pts, n_dirs=4)
    assert rep.value == pytest.approx(facts["turbulence"], abs=1e-10)


def test_hopf_weighted_operator_fact(rng):
    item = builtin("hopf_s3_weighted")  # default c = 0.5
    expect = item.known_facts["weighted_jacobi_const"]
    assert expect == 1.0625
    k1, k2 = jacobi_operator_bracket(item.W, item.sample_points(4, rng))
    assert k1 == pytest.approx(expect, abs=1e-10)
    assert k2 == pytest.approx(expect, abs=1e-10)
    with pytest.raises(InputError):
        builtin("hopf_s3_weighted", c=5.0)


def test_weighted_items_record_weight_facts():
    conf = builtin("conformal_torus_weighted")
    assert "weight_potential" in conf.known_facts
    twi = builtin("doubly_twisted_torus_weighted")
    assert twi.known_facts["weight_tangent"] is True
    off = builtin("doubly_twisted_torus_weighted",
                  weight=("0.1", "0.2", "0"))
    assert off.known_facts["weight_tangent"] is False
