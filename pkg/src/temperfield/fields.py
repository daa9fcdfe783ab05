"""Operator-fractional random fields driven by tempered stable noise.

Three kernel families over R^n with matrix scaling exponents E (time domain,
n x n) and D (state domain, d x d), q = trace(E):

* moving_average      : phi(t-s)^{D-(q/a)I} - phi(-s)^{D-(q/a)I}
* harmonizable        : real part of (e^{i<t,s>} - 1) phi(s)^{-D-(q/a)I}
                        against complex noise, realized through the 2d-lift
                        [[Re, -Im], [0, 0]];
* kernel_tempered_ma  : e^{-lam phi} damping folded into the moving-average
                        kernel, integrated against the pure stable noise.

Every distributional statement is checked at the level of finite-dimensional
log-characteristic functions

    Lambda(query) = integral psi( sum_j K_{t_j}(s)^T u_j ) ds,

computed by the panel cubature in `quadrature`.  The checkers compare both
sides of the exact identities (scaling, stationary increments, small-tempering
limits, rescaled-increment limits) and report residuals.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import quadrature as quad_mod
from .operators import OperatorSpec, real_power, real_power_many, _try_eig
from .polar import HomogeneousFn, phi_many
from .tstable import SpectralMeasure, StableParams, lcf_many

__all__ = [
    "FieldSpec",
    "FddQuery",
    "GateViolation",
    "OrbitUniformityError",
    "LcfResult",
    "ResidualReport",
    "SequenceReport",
    "ma_kernel",
    "harm_kernel_lift",
    "kt_kernel",
    "field_lcf",
    "check_scaling",
    "check_stationary_increments",
    "check_lambda_limit",
    "check_tangent",
    "make_orbit_uniform",
]

KINDS = ("moving_average", "harmonizable", "kernel_tempered_ma")


class GateViolation(ValueError):
    """An existence condition of the requested field is violated."""


class OrbitUniformityError(ValueError):
    """Harmonizable stationarity requested without a rotation-invariant measure."""


@dataclass(frozen=True)
class FddQuery:
    """Evaluation points t_1..t_k and pairing directions u_1..u_k."""
    points: np.ndarray
    directions: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        dirs = np.atleast_2d(np.asarray(self.directions, dtype=float))
        if len(pts) != len(dirs):
            raise ValueError("points and directions must have equal length")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(dirs))):
            raise ValueError("query entries must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "directions", dirs)

    @property
    def k(self) -> int:
        return len(self.points)


class _MatPow:
    """Vectorized c -> c^G for positive scalars, G a small real matrix."""

    def __init__(self, G):
        G = np.atleast_2d(np.asarray(G, dtype=float))
        self.G = G
        self.d = G.shape[0]
        self.scalar = float(G[0, 0]) if self.d == 1 else None
        self.dec = None if self.d == 1 else _try_eig(G)

    def __call__(self, c: np.ndarray) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        if self.d == 1:
            return (c ** self.scalar).reshape(-1, 1, 1)
        if self.dec is not None:
            vals, vecs, vinv = self.dec
            diag = np.exp(np.log(c)[:, None] * vals[None, :])
            return np.einsum("ij,nj,jk->nik", vecs, diag, vinv).real
        from .operators import mat_exp
        out = np.empty((c.size, self.d, self.d))
        for i, ci in enumerate(c):
            out[i] = mat_exp(math.log(ci) * self.G)
        return out


class FieldSpec:
    """Full description of one random field; existence gates checked on build."""

    __slots__ = ("n", "d", "params", "sigma", "E", "D", "phi", "kind", "beta",
                 "_D_spec", "_pow_cache")

    def __init__(self, n: int, d: int, params: StableParams, sigma: SpectralMeasure,
                 E, D, kind: str, phi: HomogeneousFn | None = None,
                 beta: float | None = None):
        if kind not in KINDS:
            raise ValueError(f"unknown field kind {kind!r}")
        E = E if isinstance(E, OperatorSpec) else OperatorSpec(E)
        D = np.atleast_2d(np.asarray(D, dtype=float))
        if E.dim != n:
            raise ValueError(f"E must be {n}x{n}")
        if D.shape != (d, d):
            raise ValueError(f"D must be {d}x{d}")
        want_sigma_dim = 2 * d if kind == "harmonizable" else d
        if sigma.dim != want_sigma_dim:
            raise ValueError(f"spectral measure must live on R^{want_sigma_dim} "
                             f"for kind {kind}, got R^{sigma.dim}")
        if phi is None:
            phi = HomogeneousFn.radial(E.entries.T if kind == "harmonizable" else E)
        want_exp = E.entries.T if kind == "harmonizable" else E.entries
        if not np.allclose(phi.exponent.entries, want_exp, atol=1e-12):
            raise ValueError("kernel profile must be homogeneous for "
                             + ("the adjoint of E" if kind == "harmonizable" else "E"))
        self.n, self.d = n, d
        self.params, self.sigma = params, sigma
        self.E, self.D, self.phi, self.kind = E, D, phi, kind
        self.beta = beta
        self._D_spec = OperatorSpec(D)
        self._pow_cache = {}
        self._check_gates()

    # -- spectral shorthands -------------------------------------------------
    @property
    def q(self) -> float:
        return self.E.trace_q

    @property
    def hurst(self) -> float:
        return self._D_spec.re_eig_max

    @property
    def d_min_re(self) -> float:
        return self._D_spec.re_eig_min

    def _check_gates(self):
        a = self.params.alpha
        errs = []
        if self.E.re_eig_min <= 0:
            errs.append("E must have strictly positive eigenvalue real parts")
        if self.kind == "moving_average":
            if self.beta is None or self.beta <= 0:
                errs.append("moving_average needs a positive beta")
            if self.d_min_re <= 0:
                errs.append("D must have strictly positive eigenvalue real parts")
            elif self.beta is not None and not (
                    self.hurst < self.beta + self.q * (1.0 / a - 0.5)):
                errs.append(
                    f"existence gate failed: max Re eig(D) = {self.hurst:.6g} "
                    f">= beta + q(1/alpha - 1/2) = "
                    f"{self.beta + self.q * (1.0 / a - 0.5):.6g}")
        elif self.kind == "harmonizable":
            lo = self.q * (0.5 - 1.0 / a)
            if not (lo < self.d_min_re and self.hurst < self.E.re_eig_min):
                errs.append(
                    f"existence gate failed: need q(1/2-1/alpha) = {lo:.6g} < "
                    f"{self.d_min_re:.6g} <= {self.hurst:.6g} < min Re eig(E) "
                    f"= {self.E.re_eig_min:.6g}")
        else:  # kernel_tempered_ma
            if self.d_min_re <= 0:
                errs.append("D must have strictly positive eigenvalue real parts")
            if not self.params.tempered:
                errs.append("kernel_tempered_ma needs lam > 0")
        if errs:
            raise GateViolation("; ".join(errs))
        if self.kind == "moving_average":
            eigd = np.linalg.eigvals(self.D)
            if np.any(np.abs(eigd - self.q / a) < 1e-9):
                warnings.warn("q/alpha is an eigenvalue of D: the field values "
                              "may be concentrated on a hyperplane")

    def with_lam(self, lam: float) -> "FieldSpec":
        return FieldSpec(self.n, self.d, self.params.with_lam(lam), self.sigma,
                         self.E, self.D, self.kind, phi=self.phi, beta=self.beta)

    def measure_params(self) -> StableParams:
        """Noise parameters: the kernel-tempered kind rides on stable noise."""
        if self.kind == "kernel_tempered_ma":
            return self.params.with_lam(0.0)
        return self.params

    def _pow(self, sign: int) -> _MatPow:
        # sign +1: D - (q/a) I (moving average); -1: -D - (q/a) I (harmonizable)
        key = sign
        if key not in self._pow_cache:
            G = sign * self.D - (self.q / self.params.alpha) * np.eye(self.d)
            self._pow_cache[key] = _MatPow(G)
        return self._pow_cache[key]

    def __repr__(self):
        return (f"FieldSpec(kind={self.kind}, n={self.n}, d={self.d}, "
                f"alpha={self.params.alpha}, lam={self.params.lam})")


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

def _ma_terms(spec: FieldSpec, t: np.ndarray, S: np.ndarray, damp: bool):
    """phi powers (and optional exponential damping) for the two MA terms."""
    p1 = phi_many(spec.phi, t[None, :] - S)
    p2 = phi_many(spec.phi, -S)
    pw = spec._pow(+1)
    out = np.zeros((len(S), spec.d, spec.d))
    m1 = p1 > 0
    m2 = p2 > 0
    keep = m1 & m2          # s in {0, t} conventioned to the zero matrix
    if keep.any():
        a1 = pw(p1[keep])
        a2 = pw(p2[keep])
        if damp:
            lam = spec.params.lam
            a1 *= np.exp(-lam * p1[keep])[:, None, None]
            a2 *= np.exp(-lam * p2[keep])[:, None, None]
        out[keep] = a1 - a2
    return out


def ma_kernel(spec: FieldSpec, t, s) -> np.ndarray:
    """Moving-average kernel matrix at one (t, s); zero at s in {0, t}."""
    if spec.kind != "moving_average":
        raise ValueError("spec is not a moving-average field")
    t = np.asarray(t, dtype=float).reshape(spec.n)
    s = np.asarray(s, dtype=float).reshape(1, spec.n)
    return _ma_terms(spec, t, s, damp=False)[0]


def kt_kernel(spec: FieldSpec, t, s) -> np.ndarray:
    """Kernel-tempered moving-average kernel at one (t, s)."""
    if spec.kind != "kernel_tempered_ma":
        raise ValueError("spec is not a kernel-tempered field")
    t = np.asarray(t, dtype=float).reshape(spec.n)
    s = np.asarray(s, dtype=float).reshape(1, spec.n)
    return _ma_terms(spec, t, s, damp=True)[0]


def harm_kernel_lift(spec: FieldSpec, t, s) -> np.ndarray:
    """The 2d x 2d real lift [[Re, -Im], [0, 0]] of the frequency kernel."""
    if spec.kind != "harmonizable":
        raise ValueError("spec is not a harmonizable field")
    t = np.asarray(t, dtype=float).reshape(spec.n)
    s = np.asarray(s, dtype=float).reshape(spec.n)
    d = spec.d
    out = np.zeros((2 * d, 2 * d))
    p = phi_many(spec.phi, s[None, :])[0]
    if p <= 0:
        return out
    P = spec._pow(-1)(np.asarray([p]))[0]
    ang = float(t @ s)
    out[:d, :d] = (math.cos(ang) - 1.0) * P
    out[:d, d:] = -math.sin(ang) * P
    return out


# ---------------------------------------------------------------------------
# pairing vectors v(s) = sum_j K_{t_j}(s)^T u_j
# ---------------------------------------------------------------------------

def _ma_pairing_from_diffs(spec: FieldSpec, query: FddQuery, diffs,
                           diff0: np.ndarray) -> np.ndarray:
    """Pairing vector from precomputed difference vectors t_j - s and -s.

    Quadrature panels anchored at the singular points feed exact differences
    here, which keeps the kernel branch decision and the power laws accurate
    arbitrarily close to the singularities.
    """
    damp = spec.kind == "kernel_tempered_ma"
    lam = spec.params.lam
    pw = spec._pow(+1)
    p2 = phi_many(spec.phi, diff0)
    V = np.zeros((len(diff0), spec.d))
    usum = query.directions.sum(axis=0)
    m2 = p2 > 0
    if m2.any():
        a2 = pw(p2[m2])
        if damp:
            a2 *= np.exp(-lam * p2[m2])[:, None, None]
        V[m2] -= np.einsum("nij,i->nj", a2, usum)
    singular = ~m2
    for dj, u in zip(diffs, query.directions):
        p1 = phi_many(spec.phi, dj)
        m1 = p1 > 0
        if m1.any():
            a1 = pw(p1[m1])
            if damp:
                a1 *= np.exp(-lam * p1[m1])[:, None, None]
            V[m1] += np.einsum("nij,i->nj", a1, u)
        singular |= ~m1
    # the kernels are conventioned to zero exactly on the singular set
    V[singular] = 0.0
    return V


def _ma_pairing(spec: FieldSpec, query: FddQuery, S: np.ndarray) -> np.ndarray:
    diffs = [t[None, :] - S for t in query.points]
    return _ma_pairing_from_diffs(spec, query, diffs, -S)


def _iso_phi_scale(spec: FieldSpec):
    """a when the kernel profile is the radial part of a*I, else None."""
    from .polar import _iso_scale
    if spec.phi.kind != "radial_part":
        return None
    return _iso_scale(spec.phi.exponent)


def _expm1_matrix(G: np.ndarray, delta: np.ndarray, shift=None) -> np.ndarray:
    """exp(delta*G + shift*I) - I, elementwise over batches, cancellation-safe.

    Uses a Horner-evaluated series when the argument is small (where the
    direct exponential would cancel against the identity) and the plain
    exponential otherwise.
    """
    d = G.shape[0]
    n = len(delta)
    M = delta[:, None, None] * G
    if shift is not None:
        M = M + shift[:, None, None] * np.eye(d)
    norms = np.abs(M).sum(axis=2).max(axis=1)
    out = np.empty((n, d, d))
    small = norms < 0.25
    if small.any():
        Ms = M[small]
        T = Ms / 12.0
        ident = np.eye(d)
        for k in range(11, 0, -1):
            T = np.einsum("nij,njk->nik", Ms / k, ident[None, :, :] + T)
        out[small] = T
    big = ~small
    if big.any():
        if d == 1:
            out[big] = np.expm1(M[big])
        else:
            from .operators import mat_exp
            for i in np.nonzero(big)[0]:
                out[i] = mat_exp(M[i]) - np.eye(d)
    return out


def _ma_pairing_tail(spec: FieldSpec, query: FddQuery, S: np.ndarray) -> np.ndarray:
    """Far-field pairing via compensated ratio-log kernel differences.

    Valid away from all singular points; exact ratios need an isotropic
    profile (including the n = 1 case), otherwise the plain evaluation is
    used and deep-tail accuracy degrades to the float cancellation floor.
    """
    a = _iso_phi_scale(spec)
    if a is None:
        return _ma_pairing(spec, query, S)
    damp = spec.kind == "kernel_tempered_ma"
    lam = spec.params.lam
    G = spec._pow(+1).G
    s2 = np.einsum("ni,ni->n", S, S)
    phi2 = (np.sqrt(s2) / a) ** (1.0 / a)
    base = spec._pow(+1)(phi2)                     # phi(-s)^G, profile is even
    if damp:
        base = base * np.exp(-lam * phi2)[:, None, None]
    V = np.zeros((len(S), spec.d))
    for t, u in zip(query.points, query.directions):
        num = float(t @ t) - 2.0 * (S @ t)
        delta = np.log1p(num / s2) / (2.0 * a)
        shift = -lam * phi2 * np.expm1(delta) if damp else None
        em1 = _expm1_matrix(G, delta, shift)
        term = np.einsum("nij,njk->nik", base, em1)
        V += np.einsum("nij,i->nj", term, u)
    return V


def _ma_pairing_anchored(spec: FieldSpec, query: FddQuery, anchors: np.ndarray,
                         offsets: np.ndarray) -> np.ndarray:
    # t - s = (t - anchor) - offset; exact whenever the anchor is t itself
    diffs = [(t[None, :] - anchors) - offsets for t in query.points]
    return _ma_pairing_from_diffs(spec, query, diffs, -anchors - offsets)


def _harm_pairing(spec: FieldSpec, query: FddQuery, S: np.ndarray,
                  rotate_at: np.ndarray | None = None) -> np.ndarray:
    """Pairing vector in R^{2d}; optional common rotation by angle <x, s>."""
    p = phi_many(spec.phi, S)
    V = np.zeros((len(S), 2 * spec.d))
    m = p > 0
    if not m.any():
        return V
    P = spec._pow(-1)(p[m])                      # (N, d, d)
    A = np.zeros((int(m.sum()), spec.d))
    B = np.zeros((int(m.sum()), spec.d))
    Sm = S[m]
    for t, u in zip(query.points, query.directions):
        pu = np.einsum("nij,i->nj", P, u)        # P^T u
        ang = Sm @ t
        # cos(x) - 1 via the half-angle form keeps relative accuracy near 0
        A += (-2.0 * np.sin(0.5 * ang) ** 2)[:, None] * pu
        B += (-np.sin(ang))[:, None] * pu
    if rotate_at is not None:
        th = Sm @ rotate_at
        c, s_ = np.cos(th)[:, None], np.sin(th)[:, None]
        A, B = c * A - s_ * B, s_ * A + c * B
    V[m, :spec.d] = A
    V[m, spec.d:] = B
    return V


def _pairing(spec: FieldSpec, query: FddQuery, S: np.ndarray) -> np.ndarray:
    if spec.kind == "harmonizable":
        return _harm_pairing(spec, query, S)
    return _ma_pairing(spec, query, S)


# ---------------------------------------------------------------------------
# finite-dimensional LCF
# ---------------------------------------------------------------------------

@dataclass
class LcfResult:
    value: float
    err: float
    n_evals: int
    converged: bool


def _query_breaks(spec: FieldSpec, query: FddQuery):
    if spec.kind == "harmonizable":
        pts = np.zeros((1, spec.n))
    else:
        pts = np.vstack([np.zeros((1, spec.n)), query.points])
    return [np.unique(pts[:, k]) for k in range(spec.n)]


def _projection_kinks(spec: FieldSpec, query: FddQuery, edges: np.ndarray,
                      scan: int = 1024) -> np.ndarray:
    """Zero crossings of the atom projections <v(s), theta_j> on the line.

    The pure stable LCF is |.|^alpha-kinked at such crossings, so they must
    become panel edges; the tempered LCF is smooth there and skips this.
    """
    dirs = spec.sigma.directions
    crossings = []
    for a, b in zip(edges[:-1], edges[1:]):
        pad = 1e-9 * (b - a)
        s = np.linspace(a + pad, b - pad, scan)
        proj = _ma_pairing(spec, query, s[:, None]) @ dirs.T   # (scan, k)
        for j in range(proj.shape[1]):
            pj = proj[:, j]
            flips = np.nonzero(np.sign(pj[:-1]) * np.sign(pj[1:]) < 0)[0]
            for i in flips:
                lo, hi = s[i], s[i + 1]
                flo = pj[i]
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    fm = float(_ma_pairing(spec, query, np.array([[mid]])) @ dirs[j])
                    if fm == 0.0:
                        lo = hi = mid
                        break
                    if (fm > 0) == (flo > 0):
                        lo = mid
                        flo = fm
                    else:
                        hi = mid
                crossings.append(0.5 * (lo + hi))
    return np.asarray(sorted(set(crossings)))


def _tail_exponent(spec: FieldSpec) -> float:
    """Decay exponent (in ||s||) of the frequency-domain LCF integrand."""
    meas_pow = 2.0 if spec.measure_params().tempered else spec.params.alpha
    kernel_decay = spec.d_min_re + spec.q / spec.params.alpha
    return meas_pow * kernel_decay / spec.E.re_eig_max


def _halfperiod(spec: FieldSpec, query: FddQuery, extra_freq: float = 0.0) -> float:
    fmax = float(np.abs(query.points).max()) + extra_freq
    return math.pi / (2.0 * fmax) if fmax > 0 else math.pi


def field_lcf(spec: FieldSpec, query: FddQuery,
              quad: "QuadratureConfig | None" = None,
              _rotate_at: np.ndarray | None = None,
              _params_override: StableParams | None = None) -> LcfResult:
    """Lambda = integral psi(sum_j K_{t_j}(s)^T u_j) ds  (finite, <= 0)."""
    from .integrability import QuadratureConfig
    quad = quad or QuadratureConfig()
    if query.points.shape[1] != spec.n or query.directions.shape[1] != spec.d:
        raise ValueError("query dimensions do not match the field")
    mp = _params_override or spec.measure_params()
    sigma = spec.sigma
    if np.all(query.directions == 0.0) or np.all(query.points == 0.0):
        return LcfResult(0.0, 0.0, 0, True)

    def finite(vals):
        return np.where(np.isfinite(vals), vals, 0.0)

    if spec.kind == "harmonizable":
        def integrand(S):
            V = _harm_pairing(spec, query, S, rotate_at=_rotate_at)
            return finite(lcf_many(mp, sigma, V))
        integrand_anch = integrand_tail = None
    else:
        def integrand(S):
            return finite(lcf_many(mp, sigma, _ma_pairing(spec, query, S)))

        def integrand_anch(anchors, offsets):
            V = _ma_pairing_anchored(spec, query, anchors, offsets)
            return finite(lcf_many(mp, sigma, V))

        def integrand_tail(S):
            V = _ma_pairing_tail(spec, query, S)
            return finite(lcf_many(mp, sigma, V))

    breaks = _query_breaks(spec, query)
    radius = quad.box_radius
    if spec.n == 1:
        f1 = lambda x: integrand(x[:, None])
        if spec.kind == "harmonizable":
            extra = float(np.abs(_rotate_at).max()) if _rotate_at is not None else 0.0
            r = quad_mod.integrate_line_osc(
                f1, breaks[0], rel_tol=quad.rel_tol, abs_tol=quad.rel_tol * 1e-1,
                halfperiod=_halfperiod(spec, query, extra),
                tail_exponent=_tail_exponent(spec), core_radius=radius)
        else:
            f1a = lambda anch, off: integrand_anch(anch[:, None], off[:, None])
            f1t = lambda x: integrand_tail(x[:, None])
            # projection crossings: |.|^alpha kinks at lam = 0, sharp dips at
            # small lam; cheap to panel around in either case
            edges = breaks[0]
            R0 = radius or max(4.0, 2.0 * float(np.abs(edges).max()) + 2.0)
            scan_edges = np.unique(np.concatenate([[-R0, R0], edges]))
            kinks = _projection_kinks(spec, query, scan_edges)
            edges = np.unique(np.concatenate([edges, kinks]))
            r = quad_mod.integrate_line(f1, edges, rel_tol=quad.rel_tol,
                                        abs_tol=quad.rel_tol * 1e-1,
                                        core_radius=radius, f_anchored=f1a,
                                        f_tail=f1t)
    elif spec.n == 2:
        if spec.kind == "harmonizable":
            extra = float(np.abs(_rotate_at).max()) if _rotate_at is not None else 0.0
            r = quad_mod.integrate_plane_osc(
                integrand, rel_tol=quad.rel_tol * 10, abs_tol=quad.rel_tol,
                halfperiod=_halfperiod(spec, query, extra),
                tail_exponent=_tail_exponent(spec),
                core_radius=radius or 8.0)
        else:
            r = quad_mod.integrate_plane(integrand, breaks[0], breaks[1],
                                         rel_tol=quad.rel_tol * 10,
                                         abs_tol=quad.rel_tol,
                                         core_radius=radius,
                                         f2_anchored=integrand_anch,
                                         f2_tail=integrand_tail)
    else:
        R = radius or 10.0
        v, se, n = quad_mod.integrate_mc(integrand, [-R] * spec.n, [R] * spec.n,
                                         quad.mc_fallback_n)
        return LcfResult(min(v, 0.0), 3.0 * se, n, True)
    value = r.value
    if value > 0.0:
        value = 0.0 if value <= 10.0 * r.err + 1e-12 else value
    return LcfResult(value, r.err, r.n_evals, r.converged)


# ---------------------------------------------------------------------------
# identity checkers
# ---------------------------------------------------------------------------

@dataclass
class ResidualReport:
    left: float
    right: float
    residual: float
    err_bound: float
    converged: bool
    meta: dict = field(default_factory=dict)


@dataclass
class SequenceReport:
    grid: list
    values: list
    residuals: list
    target: float
    err_bound: float
    converged: bool
    meta: dict = field(default_factory=dict)


def check_scaling(spec: FieldSpec, c: float, query: FddQuery,
                  quad=None) -> ResidualReport:
    """Residual of the space-time scaling law at factor c.

    Left: the field queried at c^E t_j.  Right: the tempering parameter moves
    to c^{q/a} lam (moving average) or c^{-q/a} lam (harmonizable) and the
    directions to (c^D)^* u_j.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    if spec.kind == "kernel_tempered_ma":
        raise GateViolation("scaling law only covers moving_average and harmonizable")
    a = spec.params.alpha
    cE = real_power(spec.E, c)
    cD = real_power(spec.D, c)
    left_q = FddQuery(query.points @ cE.T, query.directions)
    sgn = 1.0 if spec.kind == "moving_average" else -1.0
    lam_r = c ** (sgn * spec.q / a) * spec.params.lam
    right_q = FddQuery(query.points, query.directions @ cD)
    left = field_lcf(spec, left_q, quad)
    right = field_lcf(spec.with_lam(lam_r), right_q, quad)
    return ResidualReport(left.value, right.value,
                          abs(left.value - right.value), left.err + right.err,
                          left.converged and right.converged,
                          meta={"c": c, "lam_right": lam_r})


def _increment_query(query: FddQuery, h: np.ndarray) -> FddQuery:
    """Query whose LCF is that of the increments (X(t_j + h) - X(h))_j."""
    pts = np.vstack([query.points + h[None, :], h[None, :]])
    dirs = np.vstack([query.directions, -query.directions.sum(axis=0)])
    return FddQuery(pts, dirs)


def orbit_uniformity_residual(sigma: SpectralMeasure, params: StableParams,
                              n_probe: int = 12, seed: int = 7) -> float:
    """Largest relative defect of psi under the paired-block rotations."""
    if sigma.dim % 2 != 0:
        raise ValueError("needs a measure on an even-dimensional sphere")
    d = sigma.dim // 2
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((n_probe, 2 * d))
    base = lcf_many(params, sigma, w)
    worst = 0.0
    for beta in rng.uniform(0.0, 2.0 * math.pi, n_probe):
        c, s = math.cos(beta), math.sin(beta)
        wr = np.empty_like(w)
        # A(beta)^T w with A = [[c I, s I], [-s I, c I]]
        wr[:, :d] = c * w[:, :d] - s * w[:, d:]
        wr[:, d:] = s * w[:, :d] + c * w[:, d:]
        rot = lcf_many(params, sigma, wr)
        worst = max(worst, float(np.max(np.abs(rot - base) / np.maximum(np.abs(base), 1e-12))))
    return worst


def check_stationary_increments(spec: FieldSpec, h, query: FddQuery,
                                quad=None, orbit_tol: float = 1e-6) -> ResidualReport:
    """Residual between the LCF of increments shifted by h and the base LCF."""
    h = np.asarray(h, dtype=float).reshape(spec.n)
    if spec.kind == "harmonizable":
        resid = orbit_uniformity_residual(spec.sigma, spec.measure_params())
        if resid > orbit_tol:
            raise OrbitUniformityError(
                "stationary increments are only guaranteed for rotation-"
                f"invariant spectral measures; observed defect {resid:.3g} "
                f"exceeds {orbit_tol:.3g} (build the measure with make_orbit_uniform)")
    left = field_lcf(spec, _increment_query(query, h), quad)
    right = field_lcf(spec, query, quad)
    return ResidualReport(left.value, right.value,
                          abs(left.value - right.value), left.err + right.err,
                          left.converged and right.converged, meta={"h": h.tolist()})


def _require_strict_gates(spec: FieldSpec):
    if spec.kind == "moving_average":
        if not (spec.hurst < spec.beta):
            raise GateViolation(
                f"the lam = 0 limit needs max Re eig(D) = {spec.hurst:.6g} < "
                f"beta = {spec.beta:.6g}")
    elif spec.kind == "harmonizable":
        if spec.d_min_re <= 0:
            raise GateViolation("the lam = 0 limit needs D with strictly "
                                "positive eigenvalue real parts")
    else:
        raise GateViolation("limits as lam -> 0 cover moving_average and harmonizable")


def check_lambda_limit(spec: FieldSpec, lambdas, query: FddQuery,
                       quad=None) -> SequenceReport:
    """|Lambda_lam - Lambda_0| along a decreasing tempering schedule."""
    _require_strict_gates(spec)
    lambdas = [float(v) for v in lambdas]
    base = field_lcf(spec.with_lam(0.0), query, quad)
    vals, gaps = [], []
    err = base.err
    ok = base.converged
    for lam in lambdas:
        r = base if lam == 0.0 else field_lcf(spec.with_lam(lam), query, quad)
        vals.append(r.value)
        gaps.append(abs(r.value - base.value))
        err += r.err
        ok = ok and r.converged
    # pointwise LCF convergence precheck at a few directions
    probes = np.linspace(0.3, 3.0, 4)[:, None] * np.ones((1, spec.sigma.dim))
    pre = [float(np.max(np.abs(
        lcf_many(spec.params.with_lam(lam), spec.sigma, probes)
        - lcf_many(spec.params.with_lam(0.0), spec.sigma, probes))))
        for lam in lambdas if lam > 0]
    return SequenceReport(lambdas, vals, gaps, base.value, err, ok,
                          meta={"psi_precheck": pre})


def check_tangent(spec: FieldSpec, x, cs, query: FddQuery,
                  quad=None) -> SequenceReport:
    """Residuals of the rescaled-increment LCF against the stable target.

    Moving average: stationary increments plus the scaling law collapse the
    rescaled increments at any x onto the field with tempering c^{q/a} lam,
    so the LCF is evaluated through that identity (c decreasing to 0).
    Harmonizable: the rescaled-increment LCF equals the field LCF at
    tempering c^{-q/a} lam with a common rotation by <c^{-E} x, s>
    (c increasing to infinity).
    """
    _require_strict_gates(spec)
    x = np.asarray(x, dtype=float).reshape(spec.n)
    cs = [float(c) for c in cs]
    if any(c <= 0 for c in cs):
        raise ValueError("all c must be positive")
    base = field_lcf(spec.with_lam(0.0), query, quad)
    vals, resids = [], []
    err = base.err
    ok = base.converged
    for c in cs:
        if spec.kind == "moving_average":
            lam_c = c ** (spec.q / spec.params.alpha) * spec.params.lam
            r = field_lcf(spec.with_lam(lam_c), query, quad)
        else:
            lam_c = c ** (-spec.q / spec.params.alpha) * spec.params.lam
            x_c = np.linalg.solve(real_power(spec.E, c), x)
            r = field_lcf(spec, query, quad, _rotate_at=x_c,
                          _params_override=spec.params.with_lam(lam_c))
        vals.append(r.value)
        resids.append(abs(r.value - base.value))
        err += r.err
        ok = ok and r.converged
    return SequenceReport(cs, vals, resids, base.value, err, ok,
                          meta={"x": x.tolist()})


def field_integrand(spec: FieldSpec, t) -> "IntegrandFn":
    """The kernel s -> K_t(s) wrapped with support/decay metadata.

    Moving-average kinds give the d x d kernel; the harmonizable kind gives
    the 2d x 2d lift (real/imaginary blocks), matching its noise dimension.
    """
    from .integrability import IntegrandFn

    t = np.asarray(t, dtype=float).reshape(spec.n)
    a_max = spec.E.re_eig_max
    if spec.kind == "harmonizable":
        pw = spec._pow(-1)
        dd = spec.d

        def ev(S):
            S = np.atleast_2d(S)
            out = np.zeros((len(S), 2 * dd, 2 * dd))
            p = phi_many(spec.phi, S)
            m = p > 0
            if m.any():
                P = pw(p[m])
                ang = S[m] @ t
                out[m, :dd, :dd] = (-2.0 * np.sin(0.5 * ang) ** 2)[:, None, None] * P
                out[m, :dd, dd:] = (-np.sin(ang))[:, None, None] * P
            return out

        decay = (spec.d_min_re + spec.q / spec.params.alpha) / a_max
        return IntegrandFn(n=spec.n, d=2 * dd, eval=ev,
                           decay_hint=decay,
                           breakpoints=tuple(np.array([0.0]) for _ in range(spec.n)))

    damp = spec.kind == "kernel_tempered_ma"

    def ev(S):
        return _ma_terms(spec, t, np.atleast_2d(S), damp=damp)

    decay = (1.0 + spec.q / spec.params.alpha - spec.hurst) / a_max
    breaks = tuple(np.unique([0.0, t[k]]) for k in range(spec.n))
    return IntegrandFn(n=spec.n, d=spec.d, eval=ev, decay_hint=decay,
                       breakpoints=breaks)


# ---------------------------------------------------------------------------
# orbit-uniform measures on R^{2d}
# ---------------------------------------------------------------------------

def make_orbit_uniform(generators, m: int = 64) -> SpectralMeasure:
    """Spread each generator atom over m paired-block rotations.

    m must be even (the rotation by pi supplies the mirror atoms); the
    resulting discrete measure is rotation-invariant up to the equispaced
    orbit-average error, which decays spectrally in m.
    """
    if m < 4 or m % 2 != 0:
        raise ValueError("m must be an even integer >= 4")
    atoms = []
    for vec, w in generators:
        v = np.asarray(vec, dtype=float).reshape(-1)
        if v.ndim != 1 or len(v) % 2 != 0:
            raise ValueError("generators must be vectors in R^{2d}")
        d = len(v) // 2
        nv = np.linalg.norm(v)
        if nv == 0 or w <= 0:
            raise ValueError("generators need nonzero direction and positive weight")
        v = v / nv
        for i in range(m):
            beta = 2.0 * math.pi * i / m
            c, s = math.cos(beta), math.sin(beta)
            img = np.empty_like(v)
            img[:d] = c * v[:d] + s * v[d:]
            img[d:] = -s * v[:d] + c * v[d:]
            atoms.append((img, w / m))
    dim = len(atoms[0][0])
    return SpectralMeasure.symmetrized(dim, atoms)
