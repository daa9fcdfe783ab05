"""Shot-noise Monte Carlo for tempered stable vectors and integrals.

Jumps with radius above a cutoff eps form a compound Poisson cloud: radii are
drawn by rejection from the power proposal eps * U^{-1/alpha} (acceptance
e^{-lam r}), directions from the normalized spectral atoms.  The small-jump
remainder is folded in as a moment-matched Gaussian (no drift term: the
measure is symmetric).  Integrals share one cloud across evaluation points,
which realizes the common-noise coupling of a single random measure.

Reproducibility contract: every batch is generated from counter-based
(Philox) streams split deterministically per (seed, purpose, block), with
replicates partitioned into fixed-width blocks.  Identical configuration and
seed give bit-identical output regardless of worker threads.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .integrability import Box, IntegrandFn
from .tstable import (SpectralMeasure, StableParams, lower_gamma,
                      upper_gamma_neg)

__all__ = [
    "SimConfig",
    "SampleBatch",
    "BoxTooSmall",
    "RefinementUndefined",
    "jump_tail_mass",
    "small_jump_variance",
    "sample_tas",
    "sample_integral",
    "sample_field_path",
    "empirical_cf",
]

BLOCK = 4096


class BoxTooSmall(ValueError):
    """The truncation box leaves too much integrand mass outside."""

    def __init__(self, msg, required_radius=None):
        super().__init__(msg)
        self.required_radius = required_radius


class RefinementUndefined(ValueError):
    """Gaussian small-jump refinement requested for a non-square-integrable kernel."""


@dataclass(frozen=True)
class SimConfig:
    """Sampler policy: jump cutoff, truncation box, replicate count, seed."""
    n_replicates: int
    seed: int = 0
    jump_cutoff_eps: float = 1e-3
    domain_box: Box | None = None
    gaussian_refinement: bool = True

    def __post_init__(self):
        if not (0.0 < self.jump_cutoff_eps < 1.0):
            raise ValueError("jump_cutoff_eps must lie in (0, 1)")
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be >= 1")


@dataclass(frozen=True)
class SampleBatch:
    """Replicate matrix plus the provenance needed to regenerate it."""
    values: np.ndarray              # (n_replicates, d)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sample batch contains non-finite values")


def _stream(seed: int, *tags: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(
        np.random.SeedSequence(seed, spawn_key=tags)))


def jump_tail_mass(params: StableParams, eps: float) -> float:
    """integral_eps^inf r^{-alpha-1} e^{-lam r} dr (per unit spectral mass)."""
    if params.tempered:
        return params.lam ** params.alpha * upper_gamma_neg(
            params.alpha, params.lam * eps)
    return eps ** (-params.alpha) / params.alpha


def small_jump_variance(params: StableParams, eps: float) -> float:
    """integral_0^eps r^{1-alpha} e^{-lam r} dr (per unit spectral mass)."""
    if params.tempered:
        return params.lam ** (params.alpha - 2.0) * lower_gamma(
            2.0 - params.alpha, params.lam * eps)
    return eps ** (2.0 - params.alpha) / (2.0 - params.alpha)


def _draw_radii(rng, params: StableParams, eps: float, count: int) -> np.ndarray:
    """Rejection sampling from r^{-alpha-1} e^{-lam r} on [eps, inf)."""
    alpha, lam = params.alpha, params.lam
    out = np.empty(count)
    got = 0
    # proposal acceptance is exp(-lam r) under the pure power proposal
    acc_est = math.exp(-lam * eps) if lam > 0 else 1.0
    while got < count:
        need = count - got
        m = max(1024, int(1.25 * need / max(acc_est, 1e-3)))
        r = eps * rng.random(m) ** (-1.0 / alpha)
        if lam > 0:
            keep = rng.random(m) <= np.exp(-lam * r)
            r = r[keep]
        take = min(len(r), need)
        out[got:got + take] = r[:take]
        got += take
    return out


def _spectral_choice(rng, sigma: SpectralMeasure, count: int) -> np.ndarray:
    p = sigma.weights / sigma.total_mass
    return rng.choice(len(p), size=count, p=p)


def _block_sizes(n: int):
    sizes = [BLOCK] * (n // BLOCK)
    if n % BLOCK:
        sizes.append(n % BLOCK)
    return sizes


def _run_blocks(n_replicates: int, tail_shape: tuple, block_fn, workers: int = 1):
    """Fill the replicate array block by block, optionally with worker threads.

    Blocks own independent counter-based streams and disjoint output slices,
    so the result is bit-identical for any worker count.
    """
    out = np.empty((n_replicates,) + tail_shape)
    jobs = []
    start = 0
    for b, size in enumerate(_block_sizes(n_replicates)):
        jobs.append((b, size, start))
        start += size

    def work(job):
        b, size, start = job
        out[start:start + size] = block_fn(b, size)

    if workers and workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(work, jobs))
    else:
        for job in jobs:
            work(job)
    return out


def sample_tas(params: StableParams, sigma: SpectralMeasure, mass: float,
               cfg: SimConfig, workers: int = 1) -> SampleBatch:
    """Replicates of a tempered stable vector with total intensity mass * phi.

    Mass is the measure of the indexing set (the constant-kernel integral);
    the characteristic function of the samples targets exp(mass * psi(u)).
    """
    if mass <= 0:
        raise ValueError("mass must be positive")
    if not params.tempered and params.alpha >= 1.0 and not cfg.gaussian_refinement:
        warnings.warn("pure stable sampling with alpha >= 1 and no Gaussian "
                      "refinement: small-jump truncation bias is not negligible")
    eps = cfg.jump_cutoff_eps
    d = sigma.dim
    rate = mass * sigma.total_mass * jump_tail_mass(params, eps)
    gauss_sd = np.sqrt(mass * sigma.weights * small_jump_variance(params, eps))

    def block_fn(b, size):
        rng = _stream(cfg.seed, 0, b)
        counts = rng.poisson(rate, size)
        total = int(counts.sum())
        radii = _draw_radii(rng, params, eps, total)
        atoms = _spectral_choice(rng, sigma, total)
        rep_idx = np.repeat(np.arange(size), counts)
        block = np.zeros((size, d))
        jumps = radii[:, None] * sigma.directions[atoms]
        for j in range(d):
            block[:, j] = np.bincount(rep_idx, weights=jumps[:, j], minlength=size)
        if cfg.gaussian_refinement:
            z = rng.standard_normal((size, len(sigma.weights)))
            block += (z * gauss_sd[None, :]) @ sigma.directions
        return block

    out = _run_blocks(cfg.n_replicates, (d,), block_fn, workers)
    return SampleBatch(values=out, meta={
        "seed": cfg.seed, "eps": eps, "mass": mass, "kind": "tas",
        "alpha": params.alpha, "lam": params.lam})


def _box_volume(box: Box) -> float:
    return float(np.prod(box.hi - box.lo))


def _integrand_nodes(f: IntegrandFn, box: Box, level: int = 6):
    """Fixed panel nodes on the box for refinement covariances."""
    from .integrability import _panels_1d, _panels_2d

    if f.n == 1:
        br = np.asarray(f.breakpoints[0] if f.breakpoints else [], dtype=float)
        inner = br[(br > box.lo[0]) & (br < box.hi[0])]
        edges = np.unique(np.concatenate([[box.lo[0], box.hi[0]], inner]))
        S, w = _panels_1d(edges, level)
        return S[:, None], w
    if f.n == 2:
        edges = []
        for k in range(2):
            br = np.asarray(f.breakpoints[k] if f.breakpoints else [], dtype=float)
            inner = br[(br > box.lo[k]) & (br < box.hi[k])]
            edges.append(np.unique(np.concatenate(
                [[box.lo[k], box.hi[k]], inner])))
        return _panels_2d(edges[0], edges[1], max(3, level - 2))
    raise ValueError("sampling supports n in {1, 2}")


def _refinement_cov(kernels, box: Box, sigma: SpectralMeasure, c_small: float):
    """Joint small-jump covariance over a kernel list; guards divergence.

    The Gaussian refinement is only meaningful when the kernels are square
    integrable over the box; a kernel with a strong enough singularity makes
    the level-refined covariance grow without settling, which is reported
    instead of silently feeding garbage variances into the samples.
    """
    traces = []
    covs = []
    for level in (4, 5, 6):
        S, w = _integrand_nodes(kernels[0], box, level=level)
        ft = np.stack([np.einsum("nij,kj->nki", kern(S), sigma.directions)
                       for kern in kernels])
        cov = c_small * np.einsum("n,k,gnki,hnkj->gihj", w, sigma.weights,
                                  ft, ft)
        covs.append(cov)
        traces.append(float(np.einsum("gigi->", cov)))
    if traces[-1] > 0 and abs(traces[-1] - traces[-2]) > 0.05 * abs(traces[-1]):
        raise RefinementUndefined(
            "the kernel second moment does not converge over the box "
            "(singular kernel): Gaussian small-jump refinement is undefined; "
            "rerun with gaussian_refinement=False and control the bias via "
            "jump_cutoff_eps")
    G = len(kernels)
    dim = sigma.dim
    cov = covs[-1].reshape(G * dim, G * dim)
    cov = 0.5 * (cov + cov.T)
    evals, evecs = np.linalg.eigh(cov)
    return evecs @ np.diag(np.sqrt(np.maximum(evals, 0.0)))


def _check_box_tail(f: IntegrandFn, params: StableParams, box: Box,
                    tol: float = 1e-3):
    """Refuse when the mass of H(f, 1) outside the box is non-negligible."""
    from .integrability import _power_tail

    if f.support_hint is not None:
        lo_in = np.all(f.support_hint.lo >= box.lo)
        hi_in = np.all(f.support_hint.hi <= box.hi)
        if lo_in and hi_in:
            return
    if f.decay_hint is None:
        return
    # isotropic power model anchored at the box edge
    R = float(np.min(np.minimum(np.abs(box.lo), np.abs(box.hi))))
    probes = []
    for axis in range(f.n):
        for sign in (+1.0, -1.0):
            v = np.zeros(f.n)
            v[axis] = sign * R
            probes.append(v)
    mats = f(np.asarray(probes))
    K = float(np.max(np.linalg.norm(mats, axis=(1, 2)))) * R ** f.decay_hint
    lam = params.lam if params.tempered else 1.0
    tail = _power_tail(1.0, K, f.decay_hint, params.alpha, lam, 1.0, R, f.n)
    if not math.isfinite(tail) or tail > tol:
        # required radius for the quadratic branch to drop below tol
        p2 = 2.0 * f.decay_hint - (f.n - 1)
        need = (lam ** (params.alpha - 2.0) * K ** 2 / (tol * (p2 - 1.0))) ** (1.0 / p2) \
            if p2 > 1 else math.inf
        raise BoxTooSmall(
            f"truncation box leaves H-tail {tail:.3g} > {tol:.1g}; "
            f"extend the box radius to about {need:.3g}", required_radius=need)


def sample_integral(f: IntegrandFn, params: StableParams, sigma: SpectralMeasure,
                    cfg: SimConfig, check_tail: bool = True,
                    workers: int = 1) -> SampleBatch:
    """Replicates of the stochastic integral of f against the noise measure.

    Poisson points (s_k, r_k theta_k) on box x {r >= eps} with product
    intensity; the integral is sum_k f(s_k) r_k theta_k plus a Gaussian
    refinement with covariance integral_box f(s) Sigma_eps f(s)^T ds.
    """
    if cfg.domain_box is None:
        raise ValueError("sample_integral needs cfg.domain_box")
    box = cfg.domain_box
    if box.dim != f.n:
        raise ValueError("box dimension does not match the integrand")
    if sigma.dim != f.d:
        raise ValueError("spectral measure dimension does not match the integrand")
    if check_tail:
        _check_box_tail(f, params, box, tol=1e-3)
    eps = cfg.jump_cutoff_eps
    d = f.d
    vol = _box_volume(box)
    rate = vol * sigma.total_mass * jump_tail_mass(params, eps)

    chol = None
    if cfg.gaussian_refinement:
        chol = _refinement_cov([f], box, sigma, small_jump_variance(params, eps))

    def block_fn(b, size):
        rng = _stream(cfg.seed, 1, b)
        counts = rng.poisson(rate, size)
        total = int(counts.sum())
        pos = rng.uniform(box.lo, box.hi, size=(total, f.n))
        radii = _draw_radii(rng, params, eps, total)
        atoms = _spectral_choice(rng, sigma, total)
        mats = f(pos)                                        # (total, d, d)
        jumps = np.einsum("nij,nj->ni", mats,
                          radii[:, None] * sigma.directions[atoms])
        rep_idx = np.repeat(np.arange(size), counts)
        block = np.zeros((size, d))
        for j in range(d):
            block[:, j] = np.bincount(rep_idx, weights=jumps[:, j], minlength=size)
        if chol is not None:
            block += rng.standard_normal((size, d)) @ chol.T
        return block

    out = _run_blocks(cfg.n_replicates, (d,), block_fn, workers)
    return SampleBatch(values=out, meta={
        "seed": cfg.seed, "eps": eps, "kind": "integral",
        "alpha": params.alpha, "lam": params.lam, "box_volume": vol})


def sample_field_path(spec, t_grid, cfg: SimConfig, workers: int = 1) -> np.ndarray:
    """Field values on a grid of points from one common Poisson cloud.

    Returns an array of shape (n_replicates, len(t_grid), d).  The same cloud
    (and the same refinement normals, correlated across grid points through
    the joint small-jump covariance) drives every grid point, so increments
    across the grid are sampled jointly.
    """
    from .fields import field_integrand

    if cfg.domain_box is None:
        raise ValueError("sample_field_path needs cfg.domain_box")
    t_grid = np.atleast_2d(np.asarray(t_grid, dtype=float))
    params = spec.measure_params()
    sigma = spec.sigma
    kernels = [field_integrand(spec, t) for t in t_grid]
    dim_out = spec.d
    dim_noise = sigma.dim
    box = cfg.domain_box
    eps = cfg.jump_cutoff_eps
    vol = _box_volume(box)
    rate = vol * sigma.total_mass * jump_tail_mass(params, eps)
    G = len(t_grid)

    chol = None
    if cfg.gaussian_refinement:
        chol = _refinement_cov(kernels, box, sigma,
                               small_jump_variance(params, eps))

    def block_fn(b, size):
        rng = _stream(cfg.seed, 2, b)
        counts = rng.poisson(rate, size)
        total = int(counts.sum())
        pos = rng.uniform(box.lo, box.hi, size=(total, spec.n))
        radii = _draw_radii(rng, params, eps, total)
        atoms = _spectral_choice(rng, sigma, total)
        xi = radii[:, None] * sigma.directions[atoms]
        rep_idx = np.repeat(np.arange(size), counts)
        block = np.zeros((size, G, dim_noise))
        for g, kern in enumerate(kernels):
            jumps = np.einsum("nij,nj->ni", kern(pos), xi)
            for j in range(dim_noise):
                block[:, g, j] = np.bincount(rep_idx, weights=jumps[:, j],
                                             minlength=size)
        if chol is not None:
            z = rng.standard_normal((size, G * dim_noise))
            block += (z @ chol.T).reshape(size, G, dim_noise)
        return block[:, :, :dim_out]

    return _run_blocks(cfg.n_replicates, (G, dim_out), block_fn, workers)


def empirical_cf(batch, u):
    """Empirical characteristic function and its standard error.

    Accepts a SampleBatch or a plain (N, d) array; returns (value, se) with
    se = sqrt((var Re + var Im)/N) <= 1/sqrt(N).
    """
    values = batch.values if isinstance(batch, SampleBatch) else np.asarray(batch)
    u = np.asarray(u, dtype=float).reshape(-1)
    phase = values @ u
    re, im = np.cos(phase), np.sin(phase)
    n = len(values)
    val = complex(re.mean(), im.mean())
    se = math.sqrt(max(re.var() + im.var(), 0.0) / n)
    return val, se
