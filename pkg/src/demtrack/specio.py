"""JSON (de)serialization of problem specs.

Schema version 1::

    {
      "schema": 1,
      "plugin": "balls-in-bins",        # registered plugin name
      "params": {},                     # plugin constructor parameters
      "n": 10000,
      "L": 1.0, "delta": 0.0, "beta": 1.0, "lambda": 0.001,
      "y_hat": [1.0],
      "domain": {"t": [-0.1, 2.0], "y": [[0.05, 1.1]]},
      "extensions": {"b": 1.0, "gamma": 0.0, "B": 1.0, "x": 0.0}   # optional
    }

The drift functions are resolved through the plugin registry; loading a
spec therefore returns the plugin instance alongside the spec.
"""

from __future__ import annotations

import json
from pathlib import Path

from .core import Domain, ProcessSpec
from .processes import ProcessPlugin, make_plugin

SCHEMA_VERSION = 1


def spec_to_dict(spec: ProcessSpec) -> dict:
    if spec.plugin_name is None:
        raise ValueError("only plugin-backed specs are serializable")
    out = {
        "schema": SCHEMA_VERSION,
        "plugin": spec.plugin_name,
        "params": dict(spec.plugin_params),
        "n": spec.n,
        "L": spec.L,
        "delta": spec.delta,
        "beta": spec.beta,
        "lambda": spec.lam,
        "y_hat": list(spec.y_hat),
        "domain": {
            "t": [spec.domain.t_lo, spec.domain.t_hi],
            "y": [[lo, hi] for lo, hi in zip(spec.domain.lo, spec.domain.hi)],
        },
    }
    ext = {}
    for key, value in (
        ("b", spec.avg_step_bound),
        ("gamma", spec.trunc_gamma),
        ("B", spec.trunc_bound),
        ("x", spec.trunc_x),
    ):
        if value is not None:
            ext[key] = value
    if ext:
        out["extensions"] = ext
    return out


def spec_from_dict(doc: dict) -> tuple[ProcessSpec, ProcessPlugin]:
    if not isinstance(doc, dict):
        raise ValueError("spec document must be a JSON object")
    if doc.get("schema") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {doc.get('schema')!r}")
    try:
        name = doc["plugin"]
        n = int(doc["n"])
        dom_doc = doc["domain"]
        t_lo, t_hi = (float(v) for v in dom_doc["t"])
        ranges = [(float(lo), float(hi)) for lo, hi in dom_doc["y"]]
        domain = Domain(
            t_lo=t_lo,
            t_hi=t_hi,
            lo=tuple(r[0] for r in ranges),
            hi=tuple(r[1] for r in ranges),
        )
        y_hat = tuple(float(v) for v in doc["y_hat"])
        L = float(doc["L"])
        delta = float(doc["delta"])
        beta = float(doc["beta"])
        lam = float(doc["lambda"])
    except (KeyError, TypeError, IndexError) as exc:
        raise ValueError(f"malformed spec document: {exc!r}") from exc
    params = doc.get("params", {}) or {}
    plugin = make_plugin(name, n, params)
    if plugin.dim != len(y_hat):
        raise ValueError(
            f"plugin {name!r} tracks {plugin.dim} variables, spec lists {len(y_hat)}"
        )
    ext = doc.get("extensions", {}) or {}
    spec = ProcessSpec(
        n=n,
        drift=plugin.drift_field,
        L=L,
        delta=delta,
        beta=beta,
        lam=lam,
        y_hat=y_hat,
        domain=domain,
        plugin_name=name,
        plugin_params=dict(params),
        avg_step_bound=_opt_float(ext, "b"),
        trunc_gamma=_opt_float(ext, "gamma"),
        trunc_bound=_opt_float(ext, "B"),
        trunc_x=_opt_float(ext, "x"),
    )
    return spec, plugin


def _opt_float(ext: dict, key: str) -> float | None:
    return float(ext[key]) if key in ext else None


def load_spec(path) -> tuple[ProcessSpec, ProcessPlugin]:
    """Read a spec file; raises ValueError on malformed JSON or schema."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON in {path}: {exc}") from exc
    return spec_from_dict(doc)


def save_spec(spec: ProcessSpec, path) -> None:
    Path(path).write_text(json.dumps(spec_to_dict(spec), indent=2) + "\n")
