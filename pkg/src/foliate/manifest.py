"""JSON manifest serialization for weighted almost-product structures.

A manifest is a schema-versioned JSON object carrying everything needed to
rebuild a :class:`WeightedAlmostProduct`: chart dimension, metric entry
expressions, coordinate periods/boxes, distribution spanning fields, the
optional weight field, and the synthetic dimensions.  Expressions are stored
as source strings and re-parsed on load, so a round trip preserves the
structure exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

from .almost_product import DistributionSpec, WeightedAlmostProduct
from .errors import InputError
from .expr import to_source
from .manifold import ChartedManifold, VectorFieldSpec

SCHEMA = "foliate/1"

__all__ = ["SCHEMA", "to_manifest", "from_manifest", "save_manifest",
           "load_manifest"]


def to_manifest(W: WeightedAlmostProduct) -> dict:
    """Serialize a structure to a plain JSON-compatible dict."""
    M = W.manifold
    return {
        "schema": SCHEMA,
        "label": W.label or M.label,
        "dim": M.dim,
        "split": [W.nu, W.n],
        "metric": [[to_source(e) for e in row] for row in M.metric],
        "periodic": list(M.periodic),
        "box": [list(b) if b is not None else None for b in M.box],
        "spanning": [[to_source(c) for c in f.components]
                     for f in W.dist.spanning],
        "weight": ([to_source(c) for c in W.weight_field.components]
                   if W.weight_field is not None else None),
        "nu_synth": W.nu_synth,
        "n_synth": W.n_synth,
    }


def from_manifest(data: dict) -> WeightedAlmostProduct:
    """Rebuild a structure from a manifest dict, validating as it goes."""
    if not isinstance(data, dict):
        raise InputError("manifest must be a JSON object")
    schema = data.get("schema")
    if schema != SCHEMA:
        raise InputError(f"unsupported manifest schema {schema!r}; "
                         f"expected {SCHEMA!r}")
    try:
        dim = int(data["dim"])
        metric = data["metric"]
        spanning = data["spanning"]
    except KeyError as err:
        raise InputError(f"manifest missing required key {err}") from None

    if (not isinstance(metric, list) or len(metric) != dim
            or any(not isinstance(row, list) or len(row) != dim
                   for row in metric)):
        raise InputError(f"metric must be a {dim}x{dim} grid of expression "
                         "strings")
    periodic = data.get("periodic")
    if periodic is not None:
        if len(periodic) != dim:
            raise InputError("periodic must have one entry per coordinate")
        periodic = tuple(None if t is None else float(t) for t in periodic)
    box = data.get("box")
    if box is not None:
        if len(box) != dim:
            raise InputError("box must have one entry per coordinate")
        box = tuple(None if b is None else (float(b[0]), float(b[1]))
                    for b in box)

    label = str(data.get("label", ""))
    M = ChartedManifold(dim=dim,
                        metric=tuple(tuple(row) for row in metric),
                        periodic=periodic, box=box, label=label)

    if not isinstance(spanning, list) or not spanning:
        raise InputError("spanning must be a nonempty list of component lists")
    dist = DistributionSpec(tuple(
        VectorFieldSpec.from_strings(comps, dim) for comps in spanning))

    split = data.get("split")
    if split is not None and list(split) != [dist.rank, dim - dist.rank]:
        raise InputError(f"split {split} does not match {dist.rank} spanning "
                         f"fields in dimension {dim}")

    weight = data.get("weight")
    X = (VectorFieldSpec.from_strings(weight, dim)
         if weight is not None else None)
    return WeightedAlmostProduct(M, dist, X,
                                 nu_synth=data.get("nu_synth"),
                                 n_synth=data.get("n_synth"),
                                 label=label)


def save_manifest(W: WeightedAlmostProduct, path) -> None:
    Path(path).write_text(json.dumps(to_manifest(W), indent=2) + "\n",
                          encoding="utf-8")


def load_manifest(path) -> WeightedAlmostProduct:
    p = Path(path)
    if not p.exists():
        raise InputError(f"manifest file not found: {path}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise InputError(f"invalid JSON in {path}: {err}") from None
    return from_manifest(data)
