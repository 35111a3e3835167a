"""Arithmetic bounds and scalar inequality evaluators.

Small exact computations that the geometric machinery is compared against:
the Radon-Hurwitz counts and the nullity threshold built from them, the
foliation diameter bound, the pinched-curvature hypothesis constants, the
``f(delta)`` monotone minorant with its two companion scalar inequalities,
the extrinsic partial Ricci form, and a driver that replays the
constant-curvature blow-up mechanism on a concrete example.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .almost_product import (AdaptedPoint, WeightedAlmostProduct,
                             co_nullity_weighted, mixed_invariants)
from .errors import InputError
from .geodesics import integrate_geodesic, riccati_ode, scalar_blowup_time, \
    tangent_weight_series
from .weighted import weighted_jacobi_operator

__all__ = [
    "radon_hurwitz", "rho_bound_check", "nullity_threshold",
    "DiameterBoundInput", "diameter_bound", "Thm418Params",
    "thm418_hypothesis", "f_delta", "pinching_inequality",
    "focal_inequality", "extrinsic_q_ricci", "ferus_scenario",
]


# -- Radon-Hurwitz arithmetic -------------------------------------------------

def radon_hurwitz(n: int) -> int:
    """Radon-Hurwitz number: with ``n = odd * 2**(4b + c)``, ``0 <= c <= 3``,
    the value is ``8b + 2**c`` (the maximal count of pointwise independent
    vector fields on the sphere ``S^{n-1}`` is this minus one)."""
    n = int(n)
    if n < 1:
        raise InputError(f"radon_hurwitz needs n >= 1, got {n}")
    m = (n & -n).bit_length() - 1
    b, c = divmod(m, 4)
    return 8 * b + 2 ** c


def rho_bound_check(n_max: int) -> bool:
    """Exhaustively verify ``rho(n) <= 2 log2(n) + 2`` for ``1 <= n <= n_max``.

    The comparison of the logarithmic bound against ``n`` itself only becomes
    true at ``n = 8`` (with equality there), so that second link of the chain
    is checked from 8 on and is vacuous below.  ``rho(1) = 1 <= 2`` covers
    the smallest case.
    """
    n_max = int(n_max)
    if n_max < 1:
        raise InputError(f"rho_bound_check needs n_max >= 1, got {n_max}")
    for n in range(1, n_max + 1):
        cap = 2.0 * math.log2(n) + 2.0
        if radon_hurwitz(n) > cap:
            return False
        if n >= 8 and cap > n:
            return False
    return True


def nullity_threshold(n: int) -> int:
    """Largest ``t`` with ``t < rho(n - t)`` (0 when no ``t`` qualifies)."""
    n = int(n)
    if n < 2:
        raise InputError(f"nullity_threshold needs n >= 2, got {n}")
    hits = [t for t in range(1, n) if t < radon_hurwitz(n - t)]
    return max(hits) if hits else 0


# -- diameter bound -----------------------------------------------------------

@dataclass(frozen=True)
class DiameterBoundInput:
    """Data feeding the foliation diameter bound.

    ``c`` is the positive lower bound on the weighted partial Ricci
    curvature, ``q`` the number of Ricci directions (``1 <= q <= nu``),
    ``nu`` and ``n`` the two distribution ranks, ``x_nor_norm`` the sup of
    the normal weight component, ``h_norm`` the sup norm of the leafwise
    second fundamental form.
    """

    c: float
    q: int
    nu: int
    n: int
    x_nor_norm: float = 0.0
    h_norm: float = 0.0

    def __post_init__(self):
        if self.c <= 0.0:
            raise InputError(f"c must be positive, got {self.c}")
        if not (isinstance(self.q, int) and isinstance(self.nu, int)
                and isinstance(self.n, int)):
            raise InputError("q, nu, n must be integers")
        if self.nu < 1 or self.n < 1:
            raise InputError("nu and n must be positive")
        if not 1 <= self.q <= self.nu:
            raise InputError(f"q must lie in 1..nu = 1..{self.nu}, got {self.q}")
        if self.x_nor_norm < 0.0 or self.h_norm < 0.0:
            raise InputError("norm bounds must be nonnegative")
        if self.c + self.q * self.x_nor_norm ** 2 <= 0.0:
            raise InputError("c + q |X_nor|^2 must be positive")


def diameter_bound(inp: DiameterBoundInput) -> dict:
    """Squared-diameter bound for the leaf space, by rank case.

    The bound is ``2q|X_nor| / (c + q|X_nor|^2)`` plus a case term::

        case 1 (nu <= n - 1):          2q/c |h| + pi^2/4
        case 2 (n - 1 < nu < n + q-1): 2q/c |h| + (q - nu + n - 1) pi^2/(4c)
        case 3 (nu >= n + q - 1):      2q/c |h|

    The first case's ``pi^2/4`` carries no ``1/c`` factor while the second
    case's analogous term does; the asymmetry is reproduced as stated (see
    ``docs/conventions.md``).  Returns ``{"case", "diam_sq_bound", "value"}``
    with ``value`` the square root of the bound.
    """
    c, q = float(inp.c), float(inp.q)
    xn, h = float(inp.x_nor_norm), float(inp.h_norm)
    weight_term = 2.0 * q * xn / (c + q * xn * xn)
    if inp.nu <= inp.n - 1:
        case = 1
        extra = 2.0 * q / c * h + (math.pi / 2.0) ** 2
    elif inp.nu < inp.n + inp.q - 1:
        case = 2
        extra = (2.0 * q / c * h
                 + (inp.q - inp.nu + inp.n - 1) * math.pi ** 2 / (4.0 * c))
    else:
        case = 3
        extra = 2.0 * q / c * h
    diam_sq = weight_term + extra
    return {"case": case, "diam_sq_bound": diam_sq,
            "value": math.sqrt(diam_sq)}


# -- pinched-curvature hypothesis ---------------------------------------------

@dataclass(frozen=True)
class Thm418Params:
    """Curvature bracket ``0 <= k1 <= k2``, drift bound ``eps``, turbulence
    bound ``a``; derives ``k = (k1 + k2)/2`` and ``delta = (k1-eps)/(k2+eps)``."""

    k1: float
    k2: float
    eps: float = 0.0
    a: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.k1 <= self.k2:
            raise InputError(f"need 0 <= k1 <= k2, got k1={self.k1}, k2={self.k2}")
        if self.eps < 0.0:
            raise InputError(f"eps must be nonnegative, got {self.eps}")
        if self.a < 0.0:
            raise InputError(f"a must be nonnegative, got {self.a}")

    @property
    def k(self) -> float:
        return 0.5 * (self.k1 + self.k2)

    @property
    def delta(self) -> float:
        return (self.k1 - self.eps) / (self.k2 + self.eps)


def thm418_hypothesis(p: Thm418Params, variant: str = "local") -> dict:
    """Evaluate the pinching hypothesis inequality

        (k2 - k1 + 2 eps) * max(a^2, k)  <=  C * k * (k2 + eps)

    with ``C = 0.3`` (``variant="local"``) or ``C = 0.337``
    (``variant="decomposition"``).  Requires ``eps < k1``; the local variant
    additionally needs ``k1 > 0``.
    """
    if variant not in ("local", "decomposition"):
        raise InputError(f"variant must be 'local' or 'decomposition', "
                         f"got {variant!r}")
    if p.eps >= p.k1:
        raise InputError(f"eps must be strictly below k1 "
                         f"(eps={p.eps}, k1={p.k1})")
    if variant == "local" and p.k1 <= 0.0:
        raise InputError("local variant needs k1 > 0")
    const = 0.3 if variant == "local" else 0.337
    lhs = (p.k2 - p.k1 + 2.0 * p.eps) * max(p.a ** 2, p.k)
    rhs = const * p.k * (p.k2 + p.eps)
    return {"lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs),
            "constant": const, "variant": variant}


# -- f(delta) and the companion scalar inequalities ---------------------------

def _check_delta(delta: float) -> float:
    delta = float(delta)
    if delta <= 1.0 / 3.0:
        raise InputError(f"delta must exceed 1/3, got {delta}")
    return delta


def f_delta(delta: float) -> float:
    """The monotone minorant ``f(delta) = ((3d-1)/(1+d))^2 sqrt(2d(1+d))``."""
    d = _check_delta(delta)
    return ((3.0 * d - 1.0) / (1.0 + d)) ** 2 * math.sqrt(2.0 * d * (1.0 + d))


def pinching_inequality(delta: float, tau: float) -> dict:
    """Check ``0.3 (pi/2 + tau) ((1+d)/(3d-1))^2 < sqrt(2d(1+d))``.

    Equivalent to ``0.3 (pi/2 + tau) < f(delta)``; this is the inequality
    that rules out a long focal-free stretch under the pinching hypothesis.
    """
    d = _check_delta(delta)
    tau = float(tau)
    if tau < 0.0:
        raise InputError(f"tau must be nonnegative, got {tau}")
    lhs = 0.3 * (math.pi / 2.0 + tau) * ((1.0 + d) / (3.0 * d - 1.0)) ** 2
    rhs = math.sqrt(2.0 * d * (1.0 + d))
    return {"lhs": lhs, "rhs": rhs, "holds": bool(lhs < rhs)}


def focal_inequality(delta: float, tau: float, ratio: float = 1.0) -> dict:
    """Check ``(pi/2 + tau)(1-d)((1+d)/(3d-1))^2 max(ratio, 1) >= sqrt(2d(1+d))``.

    ``ratio`` stands for ``a^2 / k`` (squared turbulence over mean
    curvature constant).  A focal-free interval of the relevant length
    forces this inequality, which the pinching inequality contradicts.
    """
    d = _check_delta(delta)
    tau = float(tau)
    if tau < 0.0:
        raise InputError(f"tau must be nonnegative, got {tau}")
    if ratio < 0.0:
        raise InputError(f"ratio must be nonnegative, got {ratio}")
    lhs = ((math.pi / 2.0 + tau) * (1.0 - d)
           * ((1.0 + d) / (3.0 * d - 1.0)) ** 2 * max(ratio, 1.0))
    rhs = math.sqrt(2.0 * d * (1.0 + d))
    return {"lhs": lhs, "rhs": rhs, "holds": bool(lhs >= rhs)}


# -- extrinsic partial Ricci --------------------------------------------------

def extrinsic_q_ricci(h, x0, xs, g=None) -> float:
    """Extrinsic partial Ricci sum of a vector-valued symmetric form.

    ``h[a, b, :]`` holds the form's values on an orthonormal basis, ``x0``
    and the rows of ``xs`` are orthonormal coefficient vectors in that basis,
    and ``g`` is the inner product on the value slot (identity by default).
    Returns ``sum_i [ g(h(x0,x0), h(xi,xi)) - g(h(x0,xi), h(x0,xi)) ]``.
    """
    h = np.asarray(h, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if h.ndim != 3 or h.shape[0] != h.shape[1]:
        raise InputError(f"h must have shape (r, r, d), got {h.shape}")
    r = h.shape[0]
    if x0.shape != (r,) or xs.shape[1:] != (r,):
        raise InputError("direction shapes do not match the form")
    g = np.eye(h.shape[2]) if g is None else np.asarray(g, dtype=float)
    if g.shape != (h.shape[2], h.shape[2]):
        raise InputError(f"value metric must be {h.shape[2]}x{h.shape[2]}")
    basis = np.concatenate([x0[None], xs], axis=0)
    gram = basis @ basis.T
    if np.max(np.abs(gram - np.eye(len(basis)))) > 1e-8:
        raise InputError("x0, x1..xq must be orthonormal")

    def val(u, v):
        return np.einsum("abk,a,b->k", h, u, v)

    h00 = val(x0, x0)
    total = 0.0
    for xi in xs:
        hii = val(xi, xi)
        h0i = val(x0, xi)
        total += float(h00 @ g @ hii - h0i @ g @ h0i)
    return total


# -- constant-curvature blow-up mechanism -------------------------------------

def ferus_scenario(W: WeightedAlmostProduct, m, k: float, T: float | None = None,
                   directions=None, n_steps: int = 2000,
                   flag_tol: float = 1e-3) -> dict:
    """Replay the blow-up mechanism behind the constant-curvature theorem.

    Along leaf geodesics from ``m`` in the given unit tangent ``directions``
    (adapted tangent frame by default) this verifies that the weighted normal
    Jacobi operator stays near ``k * id``, checks the drift condition
    ``g(X/n, velocity)^2 <= k``, and integrates the scalar weighted Riccati
    equation from each nonpositive real eigenvalue of the weighted co-nullity
    operator at ``m``.  Every such branch must blow up before ``T = pi /
    sqrt(k)``; when no nonpositive real eigenvalue exists, the reference
    branch ``lambda_0 = 0`` is used, since it blows up last among all
    nonpositive starts.  Deviations beyond ``flag_tol`` are collected in
    ``flags`` rather than raised.  The report also records the
    Radon-Hurwitz comparison ``nu < rho(n)`` for the example's ranks.
    """
    if k <= 0.0:
        raise InputError(f"blow-up mechanism needs k > 0, got {k}")
    m = np.asarray(m, dtype=float)
    T = math.pi / math.sqrt(k) if T is None else float(T)
    if T <= 0.0:
        raise InputError(f"horizon T must be positive, got {T}")

    ap = AdaptedPoint(W, m)
    flags: list[str] = []
    inv = mixed_invariants(W, m, ap=ap)
    geo_dev = math.sqrt(max(float(inv["h_tan2"]) + float(inv["T_tan2"]), 0.0))
    if geo_dev > flag_tol:
        flags.append(f"tangent distribution is not totally geodesic at m "
                     f"(|h_tan|+|T_tan| ~ {geo_dev:.3e})")

    if directions is None:
        E_tan, _ = ap.frames
        dirs = [E_tan[:, a] for a in range(W.nu)]
    else:
        dirs = [np.asarray(x, dtype=float) for x in np.atleast_2d(directions)]
        for i, x in enumerate(dirs):
            nrm = math.sqrt(ap.norm2(x))
            if nrm <= 0.0:
                raise InputError(f"direction {i} has zero length")
            dirs[i] = x / nrm

    per_direction = []
    sample_stride = max(1, n_steps // 40)
    for x in dirs:
        trace = integrate_geodesic(W, m, x, T, n_steps=n_steps, home="tan")
        idx = list(range(0, len(trace.times), sample_stride))
        if idx[-1] != len(trace.times) - 1:
            idx.append(len(trace.times) - 1)
        dev = 0.0
        for i in idx:
            p_i = trace.points[i]
            ap_i = AdaptedPoint(W, p_i)
            v_i = np.einsum("ab,b->a", ap_i.proj_tan, trace.velocities[i])
            v_i = v_i / math.sqrt(ap_i.norm2(v_i))
            A = weighted_jacobi_operator(W, p_i, v_i, ap_i)
            dev = max(dev, float(np.linalg.norm(A - k * np.eye(W.n), 2)))
        if dev > flag_tol:
            flags.append(f"weighted Jacobi operator deviates from k*id by "
                         f"{dev:.3e} along a sampled geodesic")

        s = tangent_weight_series(W, trace)
        drift_sq = float(np.max(s * s))
        if drift_sq > k + flag_tol:
            flags.append(f"drift condition g(X/n, velocity)^2 <= k violated "
                         f"by {drift_sq - k:.3e}")

        def c_fn(t, _times=trace.times, _s=s):
            return 2.0 * float(np.interp(t, _times, _s))

        B0w = co_nullity_weighted(W, m, x, ap)
        evals = np.linalg.eigvals(B0w)
        starts = sorted(float(ev.real) for ev in evals
                        if abs(ev.imag) <= 1e-10 and ev.real <= 1e-12)
        reference_only = not starts
        if reference_only:
            starts = [0.0]

        branches = []
        for lam0 in starts:
            rt = riccati_ode(lambda t: np.array([[k]]), lam0, T,
                             dt=T / n_steps, linear_coeff=c_fn)
            entry = {
                "lam0": lam0,
                "blow_up": rt.blow_up,
                "blew_up_before_T": rt.blow_up is not None,
                "reference_branch": reference_only,
            }
            if W.weight_field is None:
                entry["closed_form"] = scalar_blowup_time(lam0, k)
            branches.append(entry)

        per_direction.append({
            "direction": [float(c) for c in x],
            "operator_deviation": dev,
            "drift_sq_max": drift_sq,
            "drift_condition_ok": bool(drift_sq <= k + 1e-12),
            "branches": branches,
            "all_blow_up": all(b["blew_up_before_T"] for b in branches),
        })

    return {
        "k": float(k),
        "T": T,
        "per_direction": per_direction,
        "all_blow_up": all(d["all_blow_up"] for d in per_direction),
        "arithmetic": {
            "nu": W.nu,
            "n": W.n,
            "rho_n": radon_hurwitz(W.n),
            "nu_lt_rho_n": bool(W.nu < radon_hurwitz(W.n)),
        },
        "flags": flags,
    }
