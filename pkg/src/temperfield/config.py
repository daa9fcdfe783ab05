"""JSON configuration loading with precise error locations.

Field specifications, spectral measures and simple piecewise-constant
integrands arrive as JSON; unknown keys are rejected and every complaint
carries the JSON path plus the line in the source text where the offending
key sits.
"""

from __future__ import annotations

import json
import re

import numpy as np

from .fields import FieldSpec, make_orbit_uniform
from .integrability import Box, IntegrandFn
from .polar import HomogeneousFn
from .tstable import SpectralMeasure, StableParams

__all__ = ["ConfigError", "load_field_spec", "load_simple_integrand",
           "load_config"]


class ConfigError(ValueError):
    """A configuration file violates the schema."""


def _line_of(text: str, key: str, occurrence: int = 0) -> int | None:
    hits = [m.start() for m in re.finditer(rf'"{re.escape(key)}"\s*:', text)]
    if not hits:
        return None
    pos = hits[min(occurrence, len(hits) - 1)]
    return text.count("\n", 0, pos) + 1


class _Ctx:
    def __init__(self, text: str):
        self.text = text

    def fail(self, path: str, msg: str):
        key = path.split(".")[-1].split("[")[0]
        line = _line_of(self.text, key) if key else None
        where = f"{path} (line {line})" if line else path
        raise ConfigError(f"{where}: {msg}")

    def take(self, obj: dict, path: str, allowed: set, required: set):
        unknown = set(obj) - allowed
        if unknown:
            k = sorted(unknown)[0]
            line = _line_of(self.text, k)
            where = f"{path}.{k}" + (f" (line {line})" if line else "")
            raise ConfigError(f"{where}: unknown key")
        missing = required - set(obj)
        if missing:
            self.fail(path, f"missing required key(s) {sorted(missing)}")


def load_config(path_or_text) -> tuple[dict, str]:
    """Parse JSON from a path or raw text; syntax errors keep line info."""
    if isinstance(path_or_text, str) and "\n" not in path_or_text \
            and not path_or_text.lstrip().startswith("{"):
        with open(path_or_text, "r") as fh:
            text = fh.read()
    else:
        text = path_or_text
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column "
                          f"{exc.colno}: {exc.msg}") from exc


def _load_sigma(obj, ctx: _Ctx, path: str) -> SpectralMeasure:
    if not isinstance(obj, dict):
        ctx.fail(path, "expected an object")
    if "orbit_uniform" in obj:
        ctx.take(obj, path, {"orbit_uniform"}, {"orbit_uniform"})
        ou = obj["orbit_uniform"]
        ctx.take(ou, path + ".orbit_uniform", {"generators", "m"}, {"generators"})
        gens = [(np.asarray(g["dir"], dtype=float), float(g["w"]))
                for g in ou["generators"]]
        return make_orbit_uniform(gens, int(ou.get("m", 64)))
    ctx.take(obj, path, {"dim", "atoms"}, {"dim", "atoms"})
    atoms = []
    for i, a in enumerate(obj["atoms"]):
        ctx.take(a, f"{path}.atoms[{i}]", {"dir", "w"}, {"dir", "w"})
        atoms.append((np.asarray(a["dir"], dtype=float), float(a["w"])))
    try:
        return SpectralMeasure.symmetrized(int(obj["dim"]), atoms, warn=True)
    except ValueError as exc:
        ctx.fail(path, str(exc))


_FIELD_KEYS = {"n", "d", "alpha", "lambda", "E", "D", "sigma", "kind", "phi",
               "beta"}


def load_field_spec(path_or_text) -> FieldSpec:
    obj, text = load_config(path_or_text)
    ctx = _Ctx(text)
    ctx.take(obj, "$", _FIELD_KEYS, {"n", "d", "alpha", "E", "D", "sigma", "kind"})
    n, d = int(obj["n"]), int(obj["d"])
    try:
        params = StableParams(float(obj["alpha"]), float(obj.get("lambda", 0.0)))
    except ValueError as exc:
        ctx.fail("$.alpha", str(exc))
    sigma = _load_sigma(obj["sigma"], ctx, "$.sigma")
    E = np.asarray(obj["E"], dtype=float)
    D = np.asarray(obj["D"], dtype=float)
    kind = obj["kind"]
    phi_kind = obj.get("phi", "radial")
    if phi_kind not in ("radial", "abs"):
        ctx.fail("$.phi", f"unknown kernel profile {phi_kind!r}")
    phi = None
    if phi_kind == "abs":
        if n != 1:
            ctx.fail("$.phi", "'abs' profile is the n = 1 shortcut")
        exponent = E.T if kind == "harmonizable" else E
        try:
            phi = HomogeneousFn.from_callback(
                exponent, lambda X: np.abs(np.asarray(X)).reshape(-1))
        except ValueError as exc:
            ctx.fail("$.phi", str(exc))
    beta = float(obj["beta"]) if "beta" in obj else None
    try:
        return FieldSpec(n=n, d=d, params=params, sigma=sigma, E=E, D=D,
                         kind=kind, phi=phi, beta=beta)
    except ValueError as exc:
        # gate violations propagate unchanged so callers can map exit codes
        raise


_SIMPLE_KEYS = {"n", "d", "pieces"}


def load_simple_integrand(path_or_text) -> tuple[IntegrandFn, dict]:
    """Piecewise-constant integrand: {"n","d","pieces":[{"lo","hi","matrix"}]}."""
    obj, text = load_config(path_or_text)
    ctx = _Ctx(text)
    ctx.take(obj, "$", _SIMPLE_KEYS, _SIMPLE_KEYS)
    n, d = int(obj["n"]), int(obj["d"])
    boxes, mats = [], []
    for i, p in enumerate(obj["pieces"]):
        ctx.take(p, f"$.pieces[{i}]", {"lo", "hi", "matrix"}, {"lo", "hi", "matrix"})
        boxes.append(Box(np.asarray(p["lo"], dtype=float),
                         np.asarray(p["hi"], dtype=float)))
        mats.append(np.asarray(p["matrix"], dtype=float))
    return IntegrandFn.simple(boxes, mats, n=n, d=d), obj
