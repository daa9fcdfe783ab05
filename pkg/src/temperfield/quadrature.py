"""Vectorized panel quadrature for the field integrals.

The integrands met here have integrable algebraic singularities at isolated
known points, algebraic tails on the whole space, and (for frequency-domain
kernels) bounded trigonometric oscillation.  Three building blocks cover all
of it:

* tanh-sinh panels: double-exponential clustering at panel endpoints makes
  endpoint singularities and endpoint-compressed tails converge geometrically;
* the tail map s = R/v, which turns an algebraic tail with decay exponent
  p > 1 into an endpoint singularity v^{p-2} on (0, 1];
* composite Gauss-Legendre spans sized to the oscillation half-period, with
  dyadic ring doubling and a power-law remainder extrapolation for slowly
  decaying oscillatory tails.

All integrands are called vectorized: f(x) with x of shape (N,) in 1-D or
(N, 2) in 2-D, returning shape (N,).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss


@dataclass
class QuadResult:
    value: float
    err: float
    n_evals: int
    converged: bool

    def __iter__(self):
        yield from (self.value, self.err, self.n_evals, self.converged)


# ---------------------------------------------------------------------------
# tanh-sinh rules
# ---------------------------------------------------------------------------

_TS_WMAX = 4.7        # sinh argument cutoff: 1 -/+ x reaches ~1e-75 at the ends


@lru_cache(maxsize=32)
def _ts_rule(level: int):
    """Nodes of the tanh-sinh rule on (-1, 1) at step h = 2^-level.

    Returns (dist_left, dist_right, weights): distances 1+x and 1-x are formed
    from exponentials directly so that endpoint distances stay accurate down
    to underflow.
    """
    h = 2.0 ** (-level)
    kmax = int(math.floor(_TS_WMAX / h))
    t = h * np.arange(-kmax, kmax + 1)
    u = 0.5 * math.pi * np.sinh(t)
    dist_l = 2.0 / (1.0 + np.exp(2.0 * u))    # 1 + x  for u < 0 ... actually 1+x = 2/(1+e^{-2u})
    dist_l, dist_r = 2.0 / (1.0 + np.exp(-2.0 * u)), dist_l
    w = h * 0.5 * math.pi * np.cosh(t) / np.cosh(u) ** 2
    return dist_l, dist_r, w


def ts_panel(f, a: float, b: float, rel_tol: float = 1e-10, abs_tol: float = 0.0,
             max_level: int = 10, min_level: int = 3,
             anchored: bool = False) -> QuadResult:
    """Integrate f over (a, b) with escalating tanh-sinh levels.

    With anchored=True, f is called as f(anchors, offsets) where the point is
    anchors + offsets and each node is anchored at its nearest panel endpoint.
    Singular integrands can then form differences against the endpoint without
    catastrophic cancellation (offsets stay meaningful below 1e-16 * |a|).
    """
    half = 0.5 * (b - a)
    prev = None
    err = math.inf
    value = 0.0
    n_evals = 0
    for level in range(min_level, max_level + 1):
        dl, dr, w = _ts_rule(level)
        left_half = dl <= dr
        if anchored:
            anchors = np.where(left_half, a, b)
            offsets = np.where(left_half, half * dl, -half * dr)
            vals = f(anchors, offsets)
            n_evals += anchors.size
        else:
            x = np.where(left_half, a + half * dl, b - half * dr)
            vals = f(x)
            n_evals += x.size
        value = half * float(w @ vals)
        if prev is not None:
            err = abs(value - prev)
            if err <= max(abs_tol, rel_tol * abs(value)):
                return QuadResult(value, err, n_evals, True)
        prev = value
    return QuadResult(value, err, n_evals, False)


def integrate_segments(f, edges, rel_tol: float = 1e-10, abs_tol: float = 0.0,
                       max_level: int = 10, anchored: bool = False) -> QuadResult:
    """Sum of tanh-sinh panels over consecutive edges."""
    edges = np.sort(np.asarray(edges, dtype=float))
    n_panels = len(edges) - 1
    total = 0.0
    err = 0.0
    n_evals = 0
    ok = True
    for i in range(n_panels):
        r = ts_panel(f, edges[i], edges[i + 1], rel_tol=rel_tol,
                     abs_tol=abs_tol / max(n_panels, 1), max_level=max_level,
                     anchored=anchored)
        total += r.value
        err += r.err
        n_evals += r.n_evals
        ok = ok and r.converged
    return QuadResult(total, err, n_evals, ok)


def _tail_map(f, R: float, sign: int):
    """Wrap f for the substitution s = sign*R/v on v in (0, 1]."""
    def g(v):
        s = sign * R / v
        return f(s) * (R / (v * v))
    return g


def integrate_line(f, breaks, rel_tol: float = 1e-9, abs_tol: float = 0.0,
                   core_radius: float | None = None, max_level: int = 10,
                   f_anchored=None, f_tail=None) -> QuadResult:
    """Integrate f over R with singular points `breaks` and algebraic tails.

    Tails are compressed by s = R/v and handed to tanh-sinh, which converges
    iff the tail decays faster than 1/s; slower (non-integrable) tails show
    up as a non-converged result, never as a silent number.  f_anchored, when
    given, is the (anchors, offsets) form used on the singular core panels;
    f_tail is a far-field form (cancellation-compensated) used on the
    compressed tails.
    """
    breaks = np.sort(np.unique(np.asarray(breaks, dtype=float)))
    if core_radius is None:
        core_radius = max(4.0, 2.0 * float(np.abs(breaks).max()) + 2.0) if breaks.size else 4.0
    R = float(core_radius)
    edges = np.unique(np.concatenate([[-R, R], breaks[(breaks > -R) & (breaks < R)]]))
    if f_anchored is not None:
        core = integrate_segments(f_anchored, edges, rel_tol=rel_tol,
                                  abs_tol=0.5 * abs_tol, max_level=max_level,
                                  anchored=True)
    else:
        core = integrate_segments(f, edges, rel_tol=rel_tol, abs_tol=0.5 * abs_tol,
                                  max_level=max_level)
    f_far = f_tail if f_tail is not None else f
    tails = [ts_panel(_tail_map(f_far, R, sign), 0.0, 1.0, rel_tol=rel_tol,
                      abs_tol=0.25 * abs_tol, max_level=max_level)
             for sign in (+1, -1)]
    value = core.value + tails[0].value + tails[1].value
    err = core.err + tails[0].err + tails[1].err
    n_evals = core.n_evals + tails[0].n_evals + tails[1].n_evals
    ok = core.converged and all(t.converged for t in tails)
    return QuadResult(value, err, n_evals, ok)


# ---------------------------------------------------------------------------
# oscillation-aware composites
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _gl_rule(n: int):
    return leggauss(n)


def gl_span(f, a: float, b: float, max_width: float, n_nodes: int = 24):
    """Composite Gauss-Legendre over [a, b] with chunks <= max_width."""
    if b <= a:
        return 0.0, 0
    m = max(1, int(math.ceil((b - a) / max_width)))
    x, w = _gl_rule(n_nodes)
    edges = np.linspace(a, b, m + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).reshape(-1)
    vals = f(nodes).reshape(m, n_nodes)
    return float(np.sum(half * (vals @ w))), nodes.size


def integrate_line_osc(f, breaks, rel_tol: float = 1e-8, abs_tol: float = 1e-10,
                       halfperiod: float = math.pi, tail_exponent: float = 2.0,
                       core_radius: float | None = None, max_level: int = 10,
                       max_doublings: int = 26) -> QuadResult:
    """Oscillatory integrand over R with algebraic-envelope tails.

    The core is panelled as in integrate_line but smooth spans are cut to the
    oscillation half-period; dyadic rings [R 2^i, R 2^{i+1}] are then summed
    until the power-law remainder extrapolation (decay exponent
    `tail_exponent`) is below tolerance.
    """
    breaks = np.sort(np.unique(np.asarray(breaks, dtype=float)))
    if core_radius is None:
        core_radius = max(8.0, 2.0 * float(np.abs(breaks).max()) + 2.0) if breaks.size else 8.0
    R = float(core_radius)
    n_evals = 0
    total = 0.0
    err = 0.0
    # singular panels: short tanh-sinh panels around each break, GL in between
    edges = np.unique(np.concatenate([[-R, R], breaks[(breaks > -R) & (breaks < R)]]))
    pad = min(1.0, 0.25 * np.diff(edges).min()) if len(edges) > 2 else 1.0
    cursor = -R
    for b in edges[1:-1]:
        v, n = gl_span(f, cursor, b - pad, halfperiod)
        total += v
        n_evals += n
        r = ts_panel(f, b - pad, b, rel_tol=rel_tol, abs_tol=abs_tol * 0.1,
                     max_level=max_level)
        r2 = ts_panel(f, b, b + pad, rel_tol=rel_tol, abs_tol=abs_tol * 0.1,
                      max_level=max_level)
        total += r.value + r2.value
        err += r.err + r2.err
        n_evals += r.n_evals + r2.n_evals
        cursor = b + pad
    v, n = gl_span(f, cursor, R, halfperiod)
    total += v
    n_evals += n

    ratio_theory = 2.0 ** (1.0 - tail_exponent)
    if ratio_theory >= 1.0:
        return QuadResult(total, math.inf, n_evals, False)
    ring_prev = None
    radius = R
    converged = False
    for _ in range(max_doublings):
        v1, n1 = gl_span(f, radius, 2.0 * radius, halfperiod)
        v2, n2 = gl_span(f, -2.0 * radius, -radius, halfperiod)
        ring = v1 + v2
        total += ring
        n_evals += n1 + n2
        r_emp = abs(ring / ring_prev) if ring_prev not in (None, 0.0) else ratio_theory
        r_use = min(max(r_emp, 0.0), max(0.9, ratio_theory))
        r_use = min(r_use, 0.95)
        remainder = ring * r_use / (1.0 - r_use)
        if abs(remainder) <= max(abs_tol, rel_tol * abs(total)):
            total += remainder
            err += 0.5 * abs(remainder) + 1e-16 * abs(total)
            converged = True
            break
        ring_prev = ring
        radius *= 2.0
    else:
        err = math.inf
    return QuadResult(total, err, n_evals, converged)


# ---------------------------------------------------------------------------
# two-dimensional cubature
# ---------------------------------------------------------------------------

def _ts_tensor_cell(f2, ax, bx, ay, by, rel_tol, abs_tol, max_level=7,
                    min_level=3, anchored: bool = False):
    halfx, halfy = 0.5 * (bx - ax), 0.5 * (by - ay)
    prev = None
    err = math.inf
    value = 0.0
    n_evals = 0
    for level in range(min_level, max_level + 1):
        dl, dr, w = _ts_rule(level)
        left = dl <= dr
        if anchored:
            anx = np.where(left, ax, bx)
            ofx = np.where(left, halfx * dl, -halfx * dr)
            any_ = np.where(left, ay, by)
            ofy = np.where(left, halfy * dl, -halfy * dr)
            AX, AY = np.meshgrid(anx, any_, indexing="ij")
            OX, OY = np.meshgrid(ofx, ofy, indexing="ij")
            anch = np.column_stack([AX.reshape(-1), AY.reshape(-1)])
            offs = np.column_stack([OX.reshape(-1), OY.reshape(-1)])
            vals = f2(anch, offs).reshape(anx.size, any_.size)
            n_evals += anch.shape[0]
        else:
            x = np.where(left, ax + halfx * dl, bx - halfx * dr)
            y = np.where(left, ay + halfy * dl, by - halfy * dr)
            XX, YY = np.meshgrid(x, y, indexing="ij")
            pts = np.column_stack([XX.reshape(-1), YY.reshape(-1)])
            vals = f2(pts).reshape(x.size, y.size)
            n_evals += pts.shape[0]
        value = halfx * halfy * float(w @ vals @ w)
        if prev is not None:
            err = abs(value - prev)
            if err <= max(abs_tol, rel_tol * abs(value)):
                return value, err, n_evals, True
        prev = value
    return value, err, n_evals, False


def _tail_wrap_2d(f2, R: float, mode_x: int, mode_y: int):
    """Map tail coordinates: mode 0 keeps the coordinate, +-1 maps s=+-R/v."""
    def g(pts):
        u, v = pts[:, 0], pts[:, 1]
        jac = np.ones(len(pts))
        if mode_x != 0:
            su = mode_x * R / u
            jac = jac * (R / (u * u))
        else:
            su = u
        if mode_y != 0:
            sv = mode_y * R / v
            jac = jac * (R / (v * v))
        else:
            sv = v
        return f2(np.column_stack([su, sv])) * jac
    return g


def integrate_plane(f2, breaks_x, breaks_y, rel_tol: float = 1e-7,
                    abs_tol: float = 1e-9, core_radius: float | None = None,
                    max_level: int = 7, f2_anchored=None, f2_tail=None) -> QuadResult:
    """Nonoscillatory plane integral: tensor tanh-sinh cells + mapped tails."""
    bx = np.sort(np.unique(np.asarray(breaks_x, dtype=float)))
    by = np.sort(np.unique(np.asarray(breaks_y, dtype=float)))
    if core_radius is None:
        m = max([1.0] + [abs(v) for v in np.concatenate([bx, by])])
        core_radius = max(4.0, 2.0 * m + 2.0)
    R = float(core_radius)
    ex = np.unique(np.concatenate([[-R, R], bx[(bx > -R) & (bx < R)]]))
    ey = np.unique(np.concatenate([[-R, R], by[(by > -R) & (by < R)]]))
    total = 0.0
    err = 0.0
    n_evals = 0
    ok = True
    n_cells = (len(ex) - 1) * (len(ey) - 1) + 2 * (len(ex) - 1) + 2 * (len(ey) - 1) + 4
    cell_tol = abs_tol / n_cells

    def add(v, e, n, c):
        nonlocal total, err, n_evals, ok
        total += v
        err += e
        n_evals += n
        ok = ok and c

    for i in range(len(ex) - 1):
        for j in range(len(ey) - 1):
            if f2_anchored is not None:
                add(*_ts_tensor_cell(f2_anchored, ex[i], ex[i + 1], ey[j],
                                     ey[j + 1], rel_tol, cell_tol, max_level,
                                     anchored=True))
            else:
                add(*_ts_tensor_cell(f2, ex[i], ex[i + 1], ey[j], ey[j + 1],
                                     rel_tol, cell_tol, max_level))
    # side tails: x mapped, y core (and vice versa)
    f_far = f2_tail if f2_tail is not None else f2
    for sx in (+1, -1):
        g = _tail_wrap_2d(f_far, R, sx, 0)
        for j in range(len(ey) - 1):
            add(*_ts_tensor_cell(g, 0.0, 1.0, ey[j], ey[j + 1], rel_tol,
                                 cell_tol, max_level))
    for sy in (+1, -1):
        g = _tail_wrap_2d(f_far, R, 0, sy)
        for i in range(len(ex) - 1):
            add(*_ts_tensor_cell(g, ex[i], ex[i + 1], 0.0, 1.0, rel_tol,
                                 cell_tol, max_level))
    # corner tails: both mapped
    for sx in (+1, -1):
        for sy in (+1, -1):
            add(*_ts_tensor_cell(_tail_wrap_2d(f_far, R, sx, sy), 0.0, 1.0, 0.0,
                                 1.0, rel_tol, cell_tol, max_level))
    return QuadResult(total, err, n_evals, ok)


def gl_box_2d(f2, ax, bx, ay, by, max_width: float, n_nodes: int = 16):
    """Composite tensor Gauss-Legendre over a rectangle."""
    mx = max(1, int(math.ceil((bx - ax) / max_width)))
    my = max(1, int(math.ceil((by - ay) / max_width)))
    x, w = _gl_rule(n_nodes)
    exs = np.linspace(ax, bx, mx + 1)
    eys = np.linspace(ay, by, my + 1)
    hx = 0.5 * (exs[1:] - exs[:-1])
    hy = 0.5 * (eys[1:] - eys[:-1])
    nx = (0.5 * (exs[1:] + exs[:-1])[:, None] + hx[:, None] * x[None, :]).reshape(-1)
    ny = (0.5 * (eys[1:] + eys[:-1])[:, None] + hy[:, None] * x[None, :]).reshape(-1)
    wx = np.repeat(hx, n_nodes) * np.tile(w, mx)
    wy = np.repeat(hy, n_nodes) * np.tile(w, my)
    XX, YY = np.meshgrid(nx, ny, indexing="ij")
    pts = np.column_stack([XX.reshape(-1), YY.reshape(-1)])
    vals = f2(pts).reshape(nx.size, ny.size)
    return float(wx @ vals @ wy), pts.shape[0]


def integrate_plane_osc(f2, rel_tol: float = 1e-6, abs_tol: float = 1e-8,
                        halfperiod: float = math.pi, tail_exponent: float = 4.0,
                        core_radius: float = 8.0, max_doublings: int = 12) -> QuadResult:
    """Oscillatory plane integral: GL core squares + dyadic square annuli."""
    R = float(core_radius)
    total, n_evals = gl_box_2d(f2, -R, R, -R, R, halfperiod)
    err = 0.0
    ratio_theory = 2.0 ** (2.0 - tail_exponent)
    if ratio_theory >= 1.0:
        return QuadResult(total, math.inf, n_evals, False)
    ring_prev = None
    radius = R
    converged = False
    for _ in range(max_doublings):
        R2 = 2.0 * radius
        ring = 0.0
        for (a1, b1, a2, b2) in [(-R2, R2, radius, R2), (-R2, R2, -R2, -radius),
                                 (-R2, -radius, -radius, radius),
                                 (radius, R2, -radius, radius)]:
            v, n = gl_box_2d(f2, a1, b1, a2, b2, halfperiod)
            ring += v
            n_evals += n
        total += ring
        r_emp = abs(ring / ring_prev) if ring_prev not in (None, 0.0) else ratio_theory
        r_use = min(max(r_emp, 0.0), max(0.9, ratio_theory), 0.95)
        remainder = ring * r_use / (1.0 - r_use)
        if abs(remainder) <= max(abs_tol, rel_tol * abs(total)):
            total += remainder
            err += 0.5 * abs(remainder) + 1e-14 * abs(total)
            converged = True
            break
        ring_prev = ring
        radius = R2
    else:
        err = math.inf
    return QuadResult(total, err, n_evals, converged)


def integrate_mc(f, lo, hi, n_samples: int, seed: int = 0):
    """Plain Monte Carlo over a box; returns (value, standard error, evals)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lo, hi, size=(n_samples, len(lo)))
    vals = f(pts)
    vol = float(np.prod(hi - lo))
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(n_samples))
    return vol * mean, vol * se, n_samples
