"""Batch command surface: bind JSON configs to computations, emit CSV/JSON.

Every emitted number is reproducible from the recorded sidecar (config echo,
seed, cutoff, tolerances).  Exit codes: 0 success, 2 gate or schema
violation, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import ConfigError, load_field_spec, load_simple_integrand
from .fields import (FddQuery, GateViolation, OrbitUniformityError,
                     check_lambda_limit, check_scaling,
                     check_stationary_increments, check_tangent, field_lcf,
                     field_integrand)
from .integrability import (Box, DivergentIntegral, QuadratureConfig, big_H,
                            j2, matrix_floor_estimate, membership, quasi_norm)
from .simulate import (BoxTooSmall, RefinementUndefined, SimConfig,
                       sample_field_path)
from .tstable import (StableParams, envelope_constants, g_fun, lcf,
                      lcf_envelope_estimate)

EXIT_OK = 0
EXIT_GATE = 2
EXIT_NOCONV = 3


@dataclass
class RunConfig:
    """One CLI invocation: command, inputs, output target, overrides."""
    command: str
    spec_path: str | None = None
    output_path: str | None = None
    overrides: dict = field(default_factory=dict)


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _write_json(path, payload):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _sidecar(out_path, run: RunConfig, extra=None):
    if out_path in (None, "-"):
        return
    payload = {"command": run.command, "spec": run.spec_path,
               "overrides": run.overrides, "version": __version__}
    if extra:
        payload.update(extra)
    _write_json(out_path + ".meta.json", payload)


def _vector(text: str) -> np.ndarray:
    return np.asarray([float(v) for v in text.split(",")], dtype=float)


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",")]


def _quad_from(args) -> QuadratureConfig:
    return QuadratureConfig(box_radius=args.box_radius, rel_tol=args.tol)


def _query_from(args, spec) -> FddQuery:
    pts = [_vector(t) for t in args.t] if args.t else [np.ones(spec.n)]
    if args.u:
        dirs = [_vector(u) for u in args.u]
    else:
        dirs = [np.ones(spec.d) for _ in pts]
    if len(dirs) == 1 and len(pts) > 1:
        dirs = dirs * len(pts)
    return FddQuery(np.asarray(pts), np.asarray(dirs))


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("TEMPERFIELD_THREADS")
    return int(env) if env else 1


def _add_common(p, spec_required=True):
    p.add_argument("--spec", required=spec_required,
                   help="field specification JSON")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-8,
                   help="relative cubature tolerance")
    p.add_argument("--box-radius", dest="box_radius", type=float, default=None)
    p.add_argument("--eps", type=float, default=1e-3,
                   help="jump cutoff for simulation")


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="temperfield",
        description="tempered stable random measures, fields and samplers")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lcf", help="pointwise log-characteristic function")
    _add_common(p)
    p.add_argument("--umin", type=float, default=1e-2)
    p.add_argument("--umax", type=float, default=1e2)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--direction", default=None,
                   help="comma vector; the u grid scales it")

    p = sub.add_parser("field-lcf", help="finite-dimensional LCF of the field")
    _add_common(p)
    p.add_argument("--t", action="append", help="evaluation point (comma vector)")
    p.add_argument("--u", action="append", help="pairing direction (comma vector)")

    p = sub.add_parser("quasi-norm", help="integrability quasi-norm")
    _add_common(p, spec_required=False)
    p.add_argument("--simple", default=None,
                   help="piecewise-constant integrand JSON")
    p.add_argument("--t", action="append", help="kernel evaluation point")

    p = sub.add_parser("membership", help="integrability verdict")
    _add_common(p, spec_required=False)
    p.add_argument("--simple", default=None)
    p.add_argument("--t", action="append")

    p = sub.add_parser("simulate", help="field samples on a grid")
    _add_common(p)
    p.add_argument("--t", action="append", required=True)
    p.add_argument("--replicates", type=int, default=10000)
    p.add_argument("--no-refinement", action="store_true")

    p = sub.add_parser("check", help="analytic identity checkers")
    p.add_argument("what", choices=["scaling", "stationarity", "lambda-limit",
                                    "tangent"])
    _add_common(p)
    p.add_argument("--t", action="append")
    p.add_argument("--u", action="append")
    p.add_argument("--c", default="0.5,2,4", help="scale factors (scaling/tangent)")
    p.add_argument("--shift", default="1", help="increment shifts (stationarity)")
    p.add_argument("--lambdas", default="1,0.1,0.01")
    p.add_argument("--x", default=None, help="base point (tangent)")

    p = sub.add_parser("gfun", help="envelope function g(z) table")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--zmin", type=float, default=1e-6)
    p.add_argument("--zmax", type=float, default=1e6)
    p.add_argument("--points", type=int, default=121)
    p.add_argument("--out", default=None)

    p = sub.add_parser("constants", help="envelope + empirical floor constants")
    _add_common(p, spec_required=False)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--samples", type=int, default=10000)
    return ap


def _cmd_lcf(args, run):
    spec = load_field_spec(args.spec)
    direction = _vector(args.direction) if args.direction else \
        np.ones(spec.sigma.dim)
    grid = np.logspace(math.log10(args.umin), math.log10(args.umax), args.points)
    rows = []
    for g in grid:
        u = g * direction
        rows.append(list(u) + [lcf(spec.params, spec.sigma, u)])
    header = [f"u_{i+1}" for i in range(spec.sigma.dim)] + ["lcf"]
    _write_csv(args.out, header, rows)
    _sidecar(args.out, run)
    return EXIT_OK


def _cmd_field_lcf(args, run):
    spec = load_field_spec(args.spec)
    query = _query_from(args, spec)
    res = field_lcf(spec, query, _quad_from(args))
    rows = []
    for t, u in zip(query.points, query.directions):
        rows.append(list(t) + list(u) + [res.value])
    header = [f"t_{i+1}" for i in range(spec.n)] + \
             [f"u_{i+1}" for i in range(spec.d)] + ["lcf"]
    _write_csv(args.out, header, rows)
    _sidecar(args.out, run, {"err": res.err, "converged": res.converged})
    return EXIT_OK if res.converged else EXIT_NOCONV


def _integrand_from(args):
    if args.simple:
        f, _ = load_simple_integrand(args.simple)
        spec = load_field_spec(args.spec) if args.spec else None
        if spec is None:
            raise ConfigError("--simple also needs --spec for (alpha, lambda, sigma)")
        return f, spec
    spec = load_field_spec(args.spec)
    t = _vector(args.t[0]) if args.t else np.ones(spec.n)
    return field_integrand(spec, t), spec


def _cmd_quasi_norm(args, run):
    f, spec = _integrand_from(args)
    quad = _quad_from(args)
    sigma = spec.sigma
    params = spec.params
    h1 = big_H(f, 1.0, params, sigma, quad)
    payload = {"H_at_1": None if math.isinf(h1.value) else h1.value,
               "converged": bool(h1.converged and not h1.diverged)}
    try:
        payload["quasi_norm"] = quasi_norm(f, params, sigma, quad)
        code = EXIT_OK if payload["converged"] else EXIT_NOCONV
    except DivergentIntegral:
        payload["quasi_norm"] = None
        payload["converged"] = False
        code = EXIT_NOCONV
    _write_json(args.out, payload)
    _sidecar(args.out, run)
    return code


def _cmd_membership(args, run):
    f, spec = _integrand_from(args)
    res = membership(f, spec.params, spec.sigma, _quad_from(args))
    payload = {"in_space": res.in_space, "diverged": res.diverged,
               "inconclusive": res.inconclusive}
    payload.update({k: (None if isinstance(v, float) and math.isinf(v) else v)
                    for k, v in res.diagnostics.items()})
    _write_json(args.out, payload)
    _sidecar(args.out, run)
    return EXIT_OK if not res.inconclusive else EXIT_NOCONV


def _cmd_simulate(args, run):
    spec = load_field_spec(args.spec)
    grid = np.asarray([_vector(t) for t in args.t])
    radius = args.box_radius or 8.0 + float(np.abs(grid).max())
    box = Box([-radius] * spec.n, [radius] * spec.n)
    cfg = SimConfig(n_replicates=args.replicates, seed=args.seed,
                    jump_cutoff_eps=args.eps, domain_box=box,
                    gaussian_refinement=not args.no_refinement)
    paths = sample_field_path(spec, grid, cfg, workers=_threads(args))
    rows = []
    for r in range(paths.shape[0]):
        for g in range(paths.shape[1]):
            rows.append([r] + list(grid[g]) + list(paths[r, g]))
    header = (["replicate_id"] + [f"t_{i+1}" for i in range(spec.n)]
              + [f"X_{i+1}" for i in range(spec.d)])
    _write_csv(args.out, header, rows)
    _sidecar(args.out, run, {"seed": args.seed, "eps": args.eps,
                             "box_radius": radius,
                             "replicates": args.replicates})
    return EXIT_OK


def _cmd_check(args, run):
    spec = load_field_spec(args.spec)
    query = _query_from(args, spec)
    quad = _quad_from(args)
    rows = []
    meta = {}
    if args.what == "scaling":
        header = ["c", "lcf_left", "lcf_right", "residual"]
        ok = True
        for c in _floats(args.c):
            rep = check_scaling(spec, c, query, quad)
            rows.append([c, rep.left, rep.right, rep.residual])
            ok = ok and rep.converged
    elif args.what == "stationarity":
        header = ["shift", "lcf_increments", "lcf_base", "residual"]
        ok = True
        for h in _floats(args.shift):
            rep = check_stationary_increments(spec, [h] * spec.n, query, quad)
            rows.append([h, rep.left, rep.right, rep.residual])
            ok = ok and rep.converged
    elif args.what == "lambda-limit":
        rep = check_lambda_limit(spec, _floats(args.lambdas), query, quad)
        header = ["lambda", "lcf", "gap_to_stable"]
        rows = [[lam, v, g] for lam, v, g in
                zip(rep.grid, rep.values, rep.residuals)]
        meta["lcf_stable"] = rep.target
        ok = rep.converged
    else:
        x = _vector(args.x) if args.x else np.zeros(spec.n)
        rep = check_tangent(spec, x, _floats(args.c), query, quad)
        header = ["c", "lcf_rescaled", "residual"]
        rows = [[c, v, g] for c, v, g in zip(rep.grid, rep.values, rep.residuals)]
        meta["lcf_stable"] = rep.target
        ok = rep.converged
    _write_csv(args.out, header, rows)
    _sidecar(args.out, run, meta)
    return EXIT_OK if ok else EXIT_NOCONV


def _cmd_gfun(args, run):
    alpha = args.alpha
    z = np.logspace(math.log10(args.zmin), math.log10(args.zmax), args.points)
    g = g_fun(alpha, z)
    rows = [[zz, gg, zz ** alpha * gg, zz ** 2 * gg] for zz, gg in zip(z, g)]
    _write_csv(args.out, ["z", "g", "z_pow_alpha_g", "z_sq_g"], rows)
    _sidecar(args.out, run, {"limit_zero": 1 / (2 - alpha) + 1 / alpha,
                             "limit_inf": math.gamma(2 - alpha)})
    return EXIT_OK


def _cmd_constants(args, run):
    if args.spec:
        spec = load_field_spec(args.spec)
        params, sigma = spec.params, spec.sigma
        alpha = params.alpha
    else:
        if args.alpha is None:
            raise ConfigError("constants needs --alpha or --spec")
        alpha = args.alpha
        from .tstable import SpectralMeasure
        params = StableParams(alpha, 1.0)
        sigma = SpectralMeasure.one_d(0.5)
    env = envelope_constants(alpha)
    payload = {"alpha": alpha, "c1": env.c1, "c2": env.c2,
               "quasi_tri_A": env.quasi_tri_A}
    if params.tempered:
        payload["matrix_floor_K"] = matrix_floor_estimate(
            params, sigma, args.samples, seed=args.seed)
        payload["lcf_envelope_T"] = lcf_envelope_estimate(
            params, sigma, args.samples, seed=args.seed)
    _write_json(args.out, payload)
    _sidecar(args.out, run)
    return EXIT_OK


_HANDLERS = {
    "lcf": _cmd_lcf,
    "field-lcf": _cmd_field_lcf,
    "quasi-norm": _cmd_quasi_norm,
    "membership": _cmd_membership,
    "simulate": _cmd_simulate,
    "check": _cmd_check,
    "gfun": _cmd_gfun,
    "constants": _cmd_constants,
}


def main(argv=None) -> int:
    ap = _build_parser()
    args = ap.parse_args(argv)
    run = RunConfig(command=args.command,
                    spec_path=getattr(args, "spec", None),
                    output_path=getattr(args, "out", None),
                    overrides={k: v for k, v in vars(args).items()
                               if k not in ("command", "spec", "out")
                               and v is not None})
    try:
        return _HANDLERS[args.command](args, run)
    except (ConfigError, GateViolation, OrbitUniformityError, BoxTooSmall,
            RefinementUndefined) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_GATE
    except DivergentIntegral as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOCONV


if __name__ == "__main__":
    sys.exit(main())
