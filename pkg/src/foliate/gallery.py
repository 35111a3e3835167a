"""Builtin example structures with analytically known geometry.

Each item bundles a weighted almost-product structure with a dict of
``known_facts`` — analytically derivable values (constant curvatures,
closed-form twist functions, tangency/umbilicity properties) that the test
suite verifies against the numerical machinery.  Torus items use closed
charts (all coordinates periodic) so the integral formulas apply; the round
3-sphere item uses an angular chart with a bounded first coordinate and is
therefore pointwise-only.

Warping exponents are capped at ``|phi| <= 2`` (checked on a sample grid),
which keeps metric condition numbers well below the chart validation limit
and makes one tolerance budget work across the whole catalog.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .almost_product import DistributionSpec, WeightedAlmostProduct
from .errors import InputError
from .expr import differentiate, eval_value, parse, to_source
from .manifold import ChartedManifold, VectorFieldSpec, random_points

TWO_PI = 2.0 * math.pi
WARP_CAP = 2.0
_SING_MARGIN = 1e-2

__all__ = [
    "GalleryItem", "flat_torus", "conformal_torus", "doubly_twisted_torus",
    "hopf_s3", "conformal_torus_weighted", "doubly_twisted_torus_weighted",
    "hopf_s3_weighted", "catalog", "builtin", "default_suite_items",
]


@dataclass(frozen=True)
class GalleryItem:
    """A named example with machine-checkable ground truth."""

    name: str
    W: WeightedAlmostProduct
    known_facts: dict = field(default_factory=dict)
    description: str = ""

    def sample_points(self, count: int, rng=None, margin: float = 0.05):
        rng = np.random.default_rng(0) if rng is None else rng
        return random_points(self.W.manifold, rng, count, margin=margin)


def _coordinate_distribution(d: int, idx) -> DistributionSpec:
    fields = []
    for i in idx:
        comps = ["0"] * d
        comps[i] = "1"
        fields.append(VectorFieldSpec.from_strings(comps))
    return DistributionSpec(tuple(fields))


def _check_split(d: int, nu: int):
    if d < 2:
        raise InputError(f"need dimension >= 2, got {d}")
    if not 1 <= nu < d:
        raise InputError(f"tangent rank must be in 1..{d - 1}, got {nu}")


def _sample_warp(expr_str: str, d: int, label: str, positive: bool = False):
    """Evaluate a warp expression on a sample grid and enforce the cap."""
    e = parse(expr_str, d)
    rng = np.random.default_rng(20240915)
    P = rng.uniform(0.0, TWO_PI, size=(512, d))
    vals = np.asarray(eval_value(e, P), dtype=float)
    vals = np.broadcast_to(vals, (512,))
    if not np.all(np.isfinite(vals)):
        raise InputError(f"{label} = {expr_str!r} is not finite on the chart")
    if positive:
        if np.min(vals) <= 0.0:
            raise InputError(f"{label} = {expr_str!r} must be positive")
        expo = np.max(np.abs(np.log(vals)))
    else:
        expo = np.max(np.abs(vals))
    if expo > WARP_CAP:
        raise InputError(f"{label} exceeds the warping cap: sampled exponent "
                         f"{expo:.3f} > {WARP_CAP}")


def _diag_torus(d: int, entries) -> ChartedManifold:
    metric = tuple(tuple(entries[i] if i == j else "0" for j in range(d))
                   for i in range(d))
    return ChartedManifold(dim=d, metric=metric, periodic=(TWO_PI,) * d)


# -- catalog items ------------------------------------------------------------

def flat_torus(d: int = 3, nu: int = 1) -> GalleryItem:
    """Flat product torus; every curvature and extrinsic tensor vanishes."""
    _check_split(d, nu)
    M = _diag_torus(d, ["1"] * d)
    W = WeightedAlmostProduct(M, _coordinate_distribution(d, range(nu)),
                              label=f"flat_torus({d},{nu})")
    facts = {"s_mix": 0.0, "k_mix": 0.0, "extrinsic_zero": True,
             "umbilic": True, "closed_chart": True}
    return GalleryItem("flat_torus", W, facts,
                       "flat product torus; all extrinsic tensors vanish")


def conformal_torus(d: int = 3, nu: int = 1,
                    phi: str = "0.2*sin(x0)*cos(x1)") -> GalleryItem:
    """Conformally flat torus ``g = exp(2 phi) * delta``.

    Equals a doubly twisted product with both twists ``exp(phi)``, so both
    distributions are totally umbilical with the closed-form twist data.
    """
    _check_split(d, nu)
    _sample_warp(phi, d, "phi")
    M = _diag_torus(d, [f"exp(2*({phi}))"] * d)
    W = WeightedAlmostProduct(M, _coordinate_distribution(d, range(nu)),
                              label=f"conformal_torus({d},{nu})")
    facts = {"umbilic": True, "twist_u": f"exp({phi})",
             "twist_v": f"exp({phi})", "conformal_factor": phi,
             "closed_chart": True}
    return GalleryItem("conformal_torus", W, facts,
                       "conformally flat torus; both distributions umbilical")


def doubly_twisted_torus(nu: int = 1, n: int = 2,
                         u: str = "exp(0.15*sin(x0) + 0.1*cos(x1))",
                         v: str = "exp(0.1*cos(x0))") -> GalleryItem:
    """Doubly twisted product torus ``g = v^2 g_B + u^2 g_F``.

    The tangent distribution spans the first ``nu`` coordinates (the ``B``
    factor, scaled by ``v``); the normal one spans the rest (the ``F``
    factor, scaled by ``u``).  Both sides are totally umbilical with

        h_nor = -grad_tan(log u) g_nor,   H_nor = -n  grad_tan(log u),
        h_tan = -grad_nor(log v) g_tan,   H_tan = -nu grad_nor(log v),

    where ``grad_side`` projects the metric gradient onto that side.  The
    default ``v`` depends only on a tangent coordinate, so ``H_tan = 0`` and
    the leafwise integral formula applies.
    """
    d = nu + n
    _check_split(d, nu)
    _sample_warp(u, d, "u", positive=True)
    _sample_warp(v, d, "v", positive=True)
    entries = [f"({v})^2"] * nu + [f"({u})^2"] * n
    M = _diag_torus(d, entries)
    W = WeightedAlmostProduct(M, _coordinate_distribution(d, range(nu)),
                              label=f"doubly_twisted_torus({nu},{n})")
    facts = {"umbilic": True, "twist_u": u, "twist_v": v,
             "closed_chart": True}
    return GalleryItem("doubly_twisted_torus", W, facts,
                       "doubly twisted product torus with closed-form h, H")


def hopf_s3() -> GalleryItem:
    """Round unit 3-sphere, circle-fiber tangent distribution.

    Chart ``(x0, x1, x2)`` with ``g = diag(1, cos^2 x0, sin^2 x0)``,
    ``x0`` restricted away from the coordinate degeneracies by 1e-2; the
    tangent distribution is spanned by the unit field ``(0, 1, 1)`` whose
    integral curves are the great-circle fibers (length ``2 pi``).  All
    sectional curvatures equal 1, the fibers are geodesics, and the
    co-nullity operator is antisymmetric with singular value 1, so the
    turbulence is 1.  Maximal distance between fibers is ``pi/2``.
    """
    M = ChartedManifold(
        dim=3,
        metric=(("1", "0", "0"),
                ("0", "cos(x0)^2", "0"),
                ("0", "0", "sin(x0)^2")),
        periodic=(None, TWO_PI, TWO_PI),
        box=((_SING_MARGIN, math.pi / 2.0 - _SING_MARGIN), None, None),
        label="round S3, angular chart",
    )
    dist = DistributionSpec((VectorFieldSpec.from_strings(("0", "1", "1")),))
    W = WeightedAlmostProduct(M, dist, label="hopf_s3")
    facts = {"k_mix": 1.0, "s_mix": 2.0, "totally_geodesic": True,
             "turbulence": 1.0, "fiber_length": TWO_PI,
             "max_interfiber_distance": math.pi / 2.0,
             "closed_chart": False}
    return GalleryItem("hopf_s3", W, facts,
                       "round 3-sphere; totally geodesic circle fibers")


def conformal_torus_weighted(d: int = 3, nu: int = 1,
                             phi: str = "0.2*sin(x0)*cos(x1)",
                             potential: str = "0.3*sin(x1) + 0.2*cos(x0)",
                             ) -> GalleryItem:
    """Conformal torus with a gradient weight field ``X = grad(f)``.

    The components ``X^k = exp(-2 phi) d_k f`` are assembled symbolically
    from the potential.
    """
    base = conformal_torus(d, nu, phi)
    f = parse(potential, d)
    comps = tuple(f"exp(-2*({phi}))*({to_source(differentiate(f, k))})"
                  for k in range(d))
    W = base.W.with_weight(VectorFieldSpec.from_strings(comps))
    facts = dict(base.known_facts)
    facts["weight_potential"] = potential
    return GalleryItem("conformal_torus_weighted", W, facts,
                       "conformal torus with gradient weight field")


def doubly_twisted_torus_weighted(nu: int = 1, n: int = 2,
                                  u: str = "exp(0.15*sin(x0) + 0.1*cos(x1))",
                                  v: str = "exp(0.1*cos(x0))",
                                  weight=None) -> GalleryItem:
    """Doubly twisted torus with a leaf-tangent weight field.

    The default weight is ``(0.2 + 0.1 sin(x0)) e_0`` padded with zeros,
    which lies in the tangent distribution, so both the total-space and the
    leafwise integral formulas apply with ``X != 0``.
    """
    base = doubly_twisted_torus(nu, n, u, v)
    d = nu + n
    if weight is None:
        weight = tuple("0.2 + 0.1*sin(x0)" if k == 0 else "0"
                       for k in range(d))
    W = base.W.with_weight(VectorFieldSpec.from_strings(tuple(weight), d))
    facts = dict(base.known_facts)
    facts["weight_tangent"] = all(
        str(weight[k]).strip() == "0" for k in range(nu, d))
    return GalleryItem("doubly_twisted_torus_weighted", W, facts,
                       "doubly twisted torus with leaf-tangent weight field")


def hopf_s3_weighted(c: float = 0.5) -> GalleryItem:
    """Hopf item with weight ``X = c *`` (unit fiber field), a Killing field.

    Killing fields have vanishing metric Lie derivative, so the weighted
    normal Jacobi operator along fiber directions is ``(1 + c^2/4) id``.
    """
    c = float(c)
    if abs(c) > WARP_CAP:
        raise InputError(f"|c| must be at most {WARP_CAP}, got {c}")
    base = hopf_s3()
    W = base.W.with_weight(
        VectorFieldSpec.from_strings(("0", f"{c!r}", f"{c!r}")))
    facts = dict(base.known_facts)
    facts["killing"] = True
    facts["weight_scale"] = c
    facts["weighted_jacobi_const"] = 1.0 + c * c / 4.0
    return GalleryItem("hopf_s3_weighted", W, facts,
                       "round 3-sphere with a Killing weight along the fibers")


_CATALOG = {
    "flat_torus": flat_torus,
    "conformal_torus": conformal_torus,
    "doubly_twisted_torus": doubly_twisted_torus,
    "hopf_s3": hopf_s3,
    "conformal_torus_weighted": conformal_torus_weighted,
    "doubly_twisted_torus_weighted": doubly_twisted_torus_weighted,
    "hopf_s3_weighted": hopf_s3_weighted,
}


def catalog() -> dict:
    """Names and one-line descriptions of every builtin item."""
    return {name: fn().description for name, fn in _CATALOG.items()}


def builtin(name: str, **params) -> GalleryItem:
    """Instantiate a catalog item by name with optional parameter overrides."""
    if name not in _CATALOG:
        known = ", ".join(sorted(_CATALOG))
        raise InputError(f"unknown gallery item {name!r}; available: {known}")
    try:
        return _CATALOG[name](**params)
    except TypeError as err:
        raise InputError(f"bad parameters for {name}: {err}") from None


def default_suite_items() -> list:
    """The five items the pointwise acceptance bench runs over."""
    return [
        flat_torus(3, 1),
        conformal_torus(3, 1),
        doubly_twisted_torus(1, 2),
        doubly_twisted_torus_weighted(1, 2),
        hopf_s3(),
    ]
