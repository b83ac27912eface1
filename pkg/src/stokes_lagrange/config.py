"""Scenario files: JSON schema, loading and conversion to :class:`RunConfig`."""

from __future__ import annotations

import json
import math

import jsonschema

from .errors import ConfigError, InvalidCurve
from .geometry import Domain, JordanCurve, SigmaArc
from .pipeline import RunConfig

_pos = {"type": "number", "exclusiveMinimum": 0}
_point = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_pos_or_list = {"oneOf": [_pos, {"type": "array", "items": _pos, "minItems": 1}]}
_count_or_list = {"oneOf": [
    {"type": "integer", "minimum": 1},
    {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
]}

CURVE_SCHEMA = {
    "type": "object",
    "oneOf": [
        {"properties": {"type": {"const": "circle"}, "center": _point, "radius": _pos,
                        "samples": {"type": "integer", "minimum": 16}},
         "required": ["type", "radius"], "additionalProperties": False},
        {"properties": {"type": {"const": "ellipse"}, "center": _point, "a": _pos, "b": _pos,
                        "angle": {"type": "number"},
                        "samples": {"type": "integer", "minimum": 16}},
         "required": ["type", "a", "b"], "additionalProperties": False},
        {"properties": {"type": {"const": "polygon"},
                        "corners": {"type": "array", "items": _point, "minItems": 3},
                        "samples": {"type": "integer", "minimum": 16}},
         "required": ["type", "corners"], "additionalProperties": False},
        {"properties": {"type": {"const": "points"},
                        "points": {"type": "array", "items": _point, "minItems": 16}},
         "required": ["type", "points"], "additionalProperties": False},
    ],
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["domain", "curves", "sigma"],
    "properties": {
        "domain": {
            "type": "object", "additionalProperties": False, "required": ["outer"],
            "properties": {"outer": CURVE_SCHEMA,
                           "holes": {"type": "array", "items": CURVE_SCHEMA}},
        },
        "curves": {
            "type": "object", "additionalProperties": False, "required": ["gamma0", "gamma1"],
            "properties": {"gamma0": CURVE_SCHEMA, "gamma1": CURVE_SCHEMA},
        },
        "sigma": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object", "additionalProperties": False,
                "required": ["component", "t0", "t1"],
                "properties": {"component": {"type": "integer", "minimum": 0},
                               "t0": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                               "t1": {"type": "number", "minimum": 0, "exclusiveMaximum": 1}},
            },
        },
        "basis": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "counts": _count_or_list,
                "offset": {"oneOf": [_pos_or_list, {"type": "null"}]},
                "tau_svd": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "sweep_sizes": {"type": "array", "items": {"type": "integer", "minimum": 1},
                                "minItems": 1},
            },
        },
        "pipeline": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "scenario": {"enum": ["auto", "translation", "radial_morph", "composite"]},
                "nodes": {"type": "integer", "minimum": 2},
                "eta": {"oneOf": [_pos_or_list, {"type": "null"}]},
                "delta": _pos,
                "dt": _pos,
                "rho": _pos,
                "tolerances": {
                    "type": "object", "additionalProperties": False,
                    "properties": {"residual_match": _pos, "margin": _pos, "pad": _pos,
                                   "final_hausdorff": _pos, "area_drift": _pos},
                },
                "trace_resolution": {"type": "integer", "minimum": 1},
            },
        },
        "output": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "directory": {"type": "string", "minLength": 1},
                "formats": {"type": "array", "items": {"enum": ["json", "csv", "svg"]},
                            "uniqueItems": True},
                "frame_every": {"type": "integer", "minimum": 1},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
    },
}

DEFAULT_FORMATS = ("json", "csv", "svg")


def curve_from_spec(spec):
    kind = spec["type"]
    try:
        if kind == "circle":
            return JordanCurve.circle(spec.get("center", (0.0, 0.0)), spec["radius"],
                                      spec.get("samples", 128))
        if kind == "ellipse":
            return JordanCurve.ellipse(spec.get("center", (0.0, 0.0)), spec["a"], spec["b"],
                                       spec.get("samples", 128), spec.get("angle", 0.0))
        if kind == "polygon":
            return JordanCurve.polygon(spec["corners"], spec.get("samples", 64))
        return JordanCurve(spec["points"])
    except InvalidCurve as e:
        raise InvalidCurve(f"{kind} curve: {e}") from e


def validate(doc):
    """Schema check; raises :class:`ConfigError` naming the offending key."""
    try:
        jsonschema.validate(doc, SCHEMA)
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"invalid scenario at {where}: {e.message}") from None


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"no such file: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from None
    validate(doc)
    return doc


def domain_from_doc(doc):
    d = doc["domain"]
    outer = curve_from_spec(d["outer"])
    holes = tuple(curve_from_spec(h) for h in d.get("holes", []))
    sigma = tuple(SigmaArc(s["component"], float(s["t0"]), float(s["t1"])) for s in doc["sigma"])
    return Domain(outer, holes, sigma)


def run_config(doc):
    """Build a :class:`RunConfig` from a validated scenario document."""
    domain = domain_from_doc(doc)
    b = doc.get("basis", {})
    p = doc.get("pipeline", {})
    tol = p.get("tolerances", {})
    kwargs = dict(
        scenario=p.get("scenario", "auto"),
        n_nodes=p.get("nodes", 8),
        eta=p.get("eta"),
        delta=p.get("delta", 0.08),
        basis_size=b.get("counts", 128),
        offset=b.get("offset"),
        dt=p.get("dt", 5e-3),
        rho=p.get("rho", 10.0),
        residual_tol=tol.get("residual_match", math.inf),
        margin=tol.get("margin"),
        pad=tol.get("pad"),
        trace_resolution=p.get("trace_resolution", 128),
        seed=doc.get("seed", 0),
    )
    if "tau_svd" in b:
        kwargs["tau_svd"] = b["tau_svd"]
    return RunConfig(domain, curve_from_spec(doc["curves"]["gamma0"]),
                     curve_from_spec(doc["curves"]["gamma1"]), **kwargs)


def output_options(doc):
    o = doc.get("output", {})
    return {
        "directory": o.get("directory"),
        "formats": tuple(o.get("formats", DEFAULT_FORMATS)),
        "frame_every": o.get("frame_every", 10),
    }


def final_tolerances(doc):
    tol = doc.get("pipeline", {}).get("tolerances", {})
    return {"final_hausdorff": tol.get("final_hausdorff"),
            "area_drift": tol.get("area_drift", 1e-3)}


def sweep_sizes(doc):
    sizes = doc.get("basis", {}).get("sweep_sizes")
    if sizes is None:
        c = doc.get("basis", {}).get("counts", 128)
        sizes = [c if isinstance(c, int) else c[0]]
    sizes = [int(s) for s in sizes]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ConfigError("sweep sizes must be strictly ascending")
    return sizes
