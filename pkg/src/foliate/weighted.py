"""Weighted mixed curvatures and the mixed curvature-dimension condition.

For a unit ``y`` in D_nor and orthonormal ``x_1..x_q`` in D_tan, the weighted
mixed qth Ricci curvature is

    ric_tan(y; W_q) = sum_i K(y, x_i)
                      + (q/2) L_{X/nu} g(y,y) + (q nu / nu_synth) g(X/nu, y)^2

(and dually with the roles of the distributions swapped, using ``n`` and
``n_synth``).  The q=1 case is the weighted mixed sectional curvature; the
full-trace case is the weighted partial Ricci curvature.  CD(c, synth, q)
means ``ric >= c`` over all admissible arguments.

The inner minimum over W_q at fixed ``y`` is a Ky Fan problem: it equals the
sum of the q smallest eigenvalues of the symmetric operator
``x -> (R(x,y)y) projected to D_tan``, which is how :func:`min_partial_ricci`
computes it (brute-force sampling agrees, see tests).  The outer minimum over
unit ``y`` uses deterministic direction sampling plus a few projected-gradient
polish steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .almost_product import AdaptedPoint, WeightedAlmostProduct
from .errors import InputError

__all__ = [
    "weight_term", "mixed_sectional_weighted", "partial_ricci_q",
    "min_partial_ricci", "mixed_scalar", "weighted_jacobi_operator",
    "jacobi_operator_bracket", "cd_check", "CdReport", "sphere_directions",
]


def _home_ranks(W: WeightedAlmostProduct, side: str) -> tuple[int, float]:
    """(rank, synthetic dimension) of the distribution whose weight enters
    on this side: D_tan for side='tan', D_nor for side='nor'."""
    if side == "tan":
        return W.nu, float(W.nu_synth)
    if side == "nor":
        return W.n, float(W.n_synth)
    raise InputError(f"side must be 'tan' or 'nor', got {side!r}")


def weight_term(W: WeightedAlmostProduct, ap: AdaptedPoint, y,
                side: str = "tan", synth: float | None = None) -> float:
    """``(1/2) L_{X/r} g(y,y) + (r/synth) g(X/r, y)^2`` with r the home rank."""
    r, default_synth = _home_ranks(W, side)
    synth = default_synth if synth is None else float(synth)
    if synth == 0.0:
        raise InputError("synthetic dimension must be nonzero")
    y = np.asarray(y, dtype=float)
    X, _ = ap.weight
    lie = float(np.einsum("i,ij,j->", y, ap.weight_lie, y)) / r
    gxy = float(np.einsum("i,ij,j->", X, ap.g, y)) / r
    return 0.5 * lie + (r / synth) * gxy * gxy


def _check_membership(ap: AdaptedPoint, vec, dist: str, tol: float = 1e-8):
    vec = np.asarray(vec, dtype=float)
    P = ap.proj_tan if dist == "tan" else ap.proj_nor
    resid = vec - P @ vec
    scale = max(1.0, float(np.linalg.norm(vec)))
    if float(np.sqrt(resid @ ap.g @ resid)) > tol * scale:
        raise InputError(f"vector is not in D_{dist} (residual above {tol})")
    return vec


def mixed_sectional_weighted(W: WeightedAlmostProduct, p, y, x,
                             side: str = "tan", synth: float | None = None,
                             ap: AdaptedPoint | None = None) -> float:
    """Weighted mixed sectional curvature of the plane (y, x).

    ``side='tan'`` weights the D_nor argument ``y`` with (nu, nu_synth);
    ``side='nor'`` weights the D_tan argument ``x`` with (n, n_synth).  The
    two differ for X != 0 (the printed asymmetry is honored).  Inputs are
    normalized to unit vectors; membership is validated to 1e-8.
    """
    ap = AdaptedPoint(W, p) if ap is None else ap
    y = _check_membership(ap, y, "nor")
    x = _check_membership(ap, x, "tan")
    y = y / np.sqrt(ap.norm2(y))
    x = x / np.sqrt(ap.norm2(x))
    K = float(np.einsum("ijkl,i,j,k,l->", ap.riemann, y, x, x, y))
    weighted_arg = y if side == "tan" else x
    return K + weight_term(W, ap, weighted_arg, side, synth)


def partial_ricci_q(W: WeightedAlmostProduct, p, y, basis,
                    side: str = "tan", synth: float | None = None,
                    ap: AdaptedPoint | None = None) -> float:
    """Weighted mixed qth Ricci curvature ``ric(y; span(basis))``.

    ``basis`` has shape (d, q) with g-orthonormal columns in the distribution
    complementary to ``y``'s.  Depends only on span(basis) (tested).
    """
    ap = AdaptedPoint(W, p) if ap is None else ap
    basis = np.atleast_2d(np.asarray(basis, dtype=float))
    if basis.ndim == 2 and basis.shape[0] != W.dim:
        raise InputError("basis must be a (d, q) column matrix")
    y_dist = "nor" if side == "tan" else "tan"
    x_dist = "tan" if side == "tan" else "nor"
    y = _check_membership(ap, y, y_dist)
    if abs(ap.norm2(y) - 1.0) > 1e-8:
        raise InputError("y must be a unit vector")
    q = basis.shape[1]
    gram = np.einsum("ia,ij,jb->ab", basis, ap.g, basis)
    if not np.allclose(gram, np.eye(q), atol=1e-8):
        raise InputError("basis columns must be g-orthonormal")
    for a in range(q):
        _check_membership(ap, basis[:, a], x_dist)
    Ksum = float(np.einsum("ijkl,ja,i,l,ka->", ap.riemann, basis, y, y, basis))
    return Ksum + q * weight_term(W, ap, y, side, synth)


def sphere_directions(rank: int, count: int) -> np.ndarray:
    """Deterministic unit directions in R^rank (rows).

    rank 1: both signs; rank 2: uniform angles; rank 3: Fibonacci sphere;
    higher: seeded normalized Gaussians (reproducible).
    """
    if rank == 1:
        return np.array([[1.0], [-1.0]])
    if rank == 2:
        t = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    if rank == 3:
        k = np.arange(count, dtype=float)
        golden = np.pi * (3.0 - np.sqrt(5.0))
        z = 1.0 - 2.0 * (k + 0.5) / count
        r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
        return np.stack([r * np.cos(golden * k), r * np.sin(golden * k), z], axis=1)
    rng = np.random.default_rng(12345)
    v = rng.standard_normal((count, rank))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _default_count(rank: int) -> int:
    return 512 if rank <= 3 else 4096


def min_partial_ricci(W: WeightedAlmostProduct, p, q: int, side: str = "tan",
                      synth: float | None = None, n_dirs: int | None = None,
                      refine_steps: int = 20,
                      ap: AdaptedPoint | None = None) -> tuple[float, np.ndarray]:
    """Minimize ric_side(y; W_q) over unit ``y`` and orthonormal ``W_q``.

    Returns ``(value, argmin_y_coords)``.  The W_q minimum is exact per
    direction (Ky Fan); the y minimum is sampled + polished.
    """
    ap = AdaptedPoint(W, p) if ap is None else ap
    E_tan, E_nor = ap.frames
    if side == "tan":
        E_arg, E_y = E_tan, E_nor
    else:
        E_arg, E_y = E_nor, E_tan
    r_arg, r_y = E_arg.shape[1], E_y.shape[1]
    if not 1 <= q <= r_arg:
        raise InputError(f"q must be in [1, {r_arg}]")

    # frame components of the curvature block Rm(E_a, y, y, E_b)
    T = np.einsum("ijkl,ia,jm,kp,lb->ampb", ap.riemann, E_arg, E_y, E_y, E_arg,
                  optimize=True)
    T = 0.5 * (T + np.einsum("ampb->bpma", T))
    # weight quadratic form in y-frame components
    r_home, synth_val = _home_ranks(W, side)
    synth_val = synth_val if synth is None else float(synth)
    X, _ = ap.weight
    lie_frame = np.einsum("im,ij,jp->mp", E_y, ap.weight_lie, E_y) / r_home
    gx_frame = np.einsum("i,ij,jm->m", X, ap.g, E_y) / r_home
    Wq_form = 0.5 * lie_frame + (r_home / synth_val) * np.outer(gx_frame, gx_frame)

    def ky_fan(svec: np.ndarray) -> np.ndarray:
        M = np.einsum("ampb,...m,...p->...ab", T, svec, svec)
        lam = np.linalg.eigvalsh(M)
        base = np.sum(lam[..., :q], axis=-1)
        w = np.einsum("...m,mp,...p->...", svec, Wq_form, svec)
        return base + q * w

    dirs = sphere_directions(r_y, _default_count(r_y) if n_dirs is None else n_dirs)
    vals = ky_fan(dirs)
    best = int(np.argmin(vals))
    s = dirs[best].copy()
    fbest = float(vals[best])

    # projected-gradient polish (finite-difference gradient, step 1e-4)
    h = 1e-4
    for _ in range(refine_steps):
        grad = np.empty(r_y)
        for m in range(r_y):
            e = np.zeros(r_y)
            e[m] = h
            grad[m] = (ky_fan((s + e) / np.linalg.norm(s + e))
                       - ky_fan((s - e) / np.linalg.norm(s - e))) / (2 * h)
        grad -= (grad @ s) * s
        step = 0.1
        improved = False
        for _ in range(12):
            cand = s - step * grad
            cand /= np.linalg.norm(cand)
            fc = float(ky_fan(cand))
            if fc < fbest:
                s, fbest, improved = cand, fc, True
                break
            step *= 0.5
        if not improved:
            break
    return fbest, E_y @ s


def mixed_scalar(W: WeightedAlmostProduct, p, ap: AdaptedPoint | None = None) -> dict:
    """Mixed scalar curvature and its weighted version at ``p``.

    Returns dict with ``s_mix`` (two frame-trace routes, asserted equal),
    ``s_w`` and the invariants entering it.
    """
    from .almost_product import mixed_invariants
    ap = AdaptedPoint(W, p) if ap is None else ap
    E_tan, E_nor = ap.frames
    # trace route 1: sum over tangent frame of partial Ricci of D_nor side
    k_pairs = np.einsum("ijkl,ia,jm,km,la->", ap.riemann, E_tan, E_nor, E_nor, E_tan,
                        optimize=True)
    inv = mixed_invariants(W, ap.p, ap=ap)
    return {
        "s_mix": float(inv["s_mix"]),
        "s_mix_frame": float(k_pairs),
        "s_w": float(inv["s_w"]),
        "div_X": float(inv["div_X"]),
        "X_tan2": float(inv["X_tan2"]),
        "X_nor2": float(inv["X_nor2"]),
    }


def weighted_jacobi_operator(W: WeightedAlmostProduct, p, x,
                             ap: AdaptedPoint | None = None) -> np.ndarray:
    """Weighted Jacobi operator on D_nor for unit ``x in D_tan``, as a
    symmetric matrix in the adapted normal frame:

        R_nor_X(x) = R_nor(x) + (1/2 L_{X/n} g(x,x) + g(X/n, x)^2) id,

    where ``R_nor(x) y = (R(y,x)x)`` projected to D_nor and n is the rank of
    D_nor (the operator's home distribution).  Its trace equals the weighted
    partial Ricci of the dual side (tested)."""
    ap = AdaptedPoint(W, p) if ap is None else ap
    x = _check_membership(ap, x, "tan")
    if abs(ap.norm2(x) - 1.0) > 1e-8:
        raise InputError("x must be a unit vector")
    M = _jacobi_matrix(ap, x)
    X, _ = ap.weight
    lie = float(np.einsum("i,ij,j->", x, ap.weight_lie, x)) / W.n
    gxx = float(np.einsum("i,ij,j->", X, ap.g, x)) / W.n
    return M + (0.5 * lie + gxx * gxx) * np.eye(W.n)


def jacobi_operator_bracket(W: WeightedAlmostProduct, points, directions=None,
                            weighted: bool = True) -> tuple[float, float]:
    """Eigenvalue bracket (k1, k2) of the (weighted) normal Jacobi operator
    over sampled points and unit tangent directions."""
    k1, k2 = np.inf, -np.inf
    for p in np.atleast_2d(points):
        ap = AdaptedPoint(W, p)
        E_tan, _ = ap.frames
        dirs = directions
        if dirs is None:
            s = sphere_directions(W.nu, 64 if W.nu > 1 else 1)
            dirs = s @ E_tan.T
        for x in np.atleast_2d(dirs):
            R = weighted_jacobi_operator(W, p, x, ap=ap) if weighted else \
                _jacobi_matrix(ap, x)
            lam = np.linalg.eigvalsh(R)
            k1 = min(k1, float(lam[0]))
            k2 = max(k2, float(lam[-1]))
    return k1, k2


def _jacobi_matrix(ap: AdaptedPoint, x) -> np.ndarray:
    """Unweighted normal Jacobi operator matrix in the adapted normal frame:
    ``M[i, j] = g(R(E_nor_j, x) x, E_nor_i)``."""
    _, E_nor = ap.frames
    x = np.asarray(x, dtype=float)
    M = np.einsum("abcd,aj,b,c,di->ij", ap.riemann, E_nor, x, x, E_nor,
                  optimize=True)
    return 0.5 * (M + M.T)


@dataclass
class CdReport:
    holds: bool
    margin: float
    c: float
    q: int
    side: str
    synth: float
    worst_value: float
    worst_point: np.ndarray
    worst_direction: np.ndarray
    n_points: int


def cd_check(W: WeightedAlmostProduct, points, c: float, q: int,
             side: str = "tan", synth: float | None = None,
             n_dirs: int | None = None) -> CdReport:
    """Check CD_side(c, synth, q): ric >= c over sampled points/directions.

    ``margin = min(ric) - c``; the condition holds when margin >= 0.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    worst = np.inf
    worst_p = points[0]
    worst_y = None
    synth_val = synth
    for p in points:
        val, y = min_partial_ricci(W, p, q, side=side, synth=synth_val,
                                   n_dirs=n_dirs)
        if val < worst:
            worst, worst_p, worst_y = val, p, y
    r, default_synth = _home_ranks(W, side)
    return CdReport(
        holds=bool(worst - c >= 0.0), margin=float(worst - c), c=float(c),
        q=q, side=side, synth=float(default_synth if synth is None else synth),
        worst_value=float(worst), worst_point=worst_p,
        worst_direction=worst_y, n_points=len(points))
