"""Matrix exponential calculus and spectral metadata for anisotropy exponents.

The exponents driving the random fields are small dense real matrices (the
supported envelope is m <= 16).  Everything here is pure: an OperatorSpec is
immutable after construction and caches the spectral data that the existence
gates and the generalized polar coordinates need over and over.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "OperatorSpec",
    "mat_exp",
    "real_power",
    "spectral_bounds",
    "is_in_Q",
    "EigenvalueError",
]

MAX_DIM = 16


class EigenvalueError(RuntimeError):
    """Raised when the dense eigensolver fails to converge."""


def _as_square_matrix(entries) -> np.ndarray:
    a = np.asarray(entries, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 0 or a.shape[0] > MAX_DIM:
        raise ValueError(f"matrix dimension {a.shape[0]} outside supported range 1..{MAX_DIM}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def spectral_bounds(entries) -> tuple[float, float, float]:
    """Extreme real parts of the spectrum plus the trace.

    Returns (re_eig_min, re_eig_max, trace).  Eigenvalues come from the
    standard dense nonsymmetric solver (QR iteration); a convergence failure
    is reported as EigenvalueError, never as silent NaNs.
    """
    a = _as_square_matrix(entries)
    try:
        eigs = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:
        raise EigenvalueError(f"eigenvalue iteration failed: {exc}") from exc
    re = eigs.real
    if not np.all(np.isfinite(re)):
        raise EigenvalueError("eigenvalue iteration returned non-finite values")
    return float(re.min()), float(re.max()), float(np.trace(a))


class OperatorSpec:
    """A square real matrix with cached spectral metadata.

    Attributes
    ----------
    entries : (m, m) ndarray, read-only
    trace_q : float, sum of the diagonal
    re_eig_min, re_eig_max : float, extreme real parts of the spectrum
    """

    __slots__ = ("entries", "trace_q", "re_eig_min", "re_eig_max", "_eig_cache")

    def __init__(self, entries):
        a = _as_square_matrix(entries)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)
        lo, hi, tr = spectral_bounds(a)
        object.__setattr__(self, "trace_q", tr)
        object.__setattr__(self, "re_eig_min", lo)
        object.__setattr__(self, "re_eig_max", hi)
        object.__setattr__(self, "_eig_cache", None)

    def __setattr__(self, name, value):
        raise AttributeError("OperatorSpec is immutable")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __repr__(self):
        return (f"OperatorSpec(dim={self.dim}, trace_q={self.trace_q:.6g}, "
                f"re_eig=[{self.re_eig_min:.6g}, {self.re_eig_max:.6g}])")

    def eig(self):
        """Eigendecomposition (vals, V, Vinv) if well conditioned, else None.

        Used for vectorized one-parameter groups c^E; callers must fall back
        to mat_exp when this returns None (defective or ill-conditioned).
        """
        cached = self._eig_cache
        if cached is None:
            cached = _try_eig(self.entries)
            object.__setattr__(self, "_eig_cache", (cached,))
        else:
            (cached,) = cached
        return cached


def _try_eig(a: np.ndarray, cond_limit: float = 1e8):
    try:
        vals, vecs = np.linalg.eig(a)
    except np.linalg.LinAlgError:
        return None
    try:
        vinv = np.linalg.inv(vecs)
    except np.linalg.LinAlgError:
        return None
    cond = np.linalg.cond(vecs)
    if not np.isfinite(cond) or cond > cond_limit:
        return None
    # reject decompositions that do not reproduce the matrix to high accuracy
    resid = np.linalg.norm((vecs * vals) @ vinv - a) / max(1.0, np.linalg.norm(a))
    if resid > 1e-12:
        return None
    return vals, vecs, vinv


# Pade-13 coefficients for the scaling-and-squaring exponential (fixed order).
_PADE13 = (
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
    1187353796428800.0, 129060195264000.0, 10559470521600.0, 670442572800.0,
    33522128640.0, 1323241920.0, 40840800.0, 960960.0, 16380.0, 182.0, 1.0,
)
_THETA13 = 5.371920351148152


def mat_exp(entries) -> np.ndarray:
    """exp(A) by scaling-and-squaring with a fixed order-13 Pade approximant."""
    a = _as_square_matrix(entries)
    m = a.shape[0]
    nrm = np.linalg.norm(a, 1)
    s = 0
    if nrm > _THETA13:
        s = int(math.ceil(math.log2(nrm / _THETA13)))
        a = a / (2.0 ** s)
    ident = np.eye(m)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a2 @ a4
    b = _PADE13
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r


def real_power(exponent, c: float) -> np.ndarray:
    """c^E := exp((log c) E) for c > 0.

    Accepts an OperatorSpec or a plain square matrix.  Satisfies the group
    law c1^E c2^E = (c1 c2)^E.
    """
    if c <= 0 or not np.isfinite(c):
        raise ValueError(f"real_power requires c > 0, got {c}")
    a = exponent.entries if isinstance(exponent, OperatorSpec) else _as_square_matrix(exponent)
    if c == 1.0:
        return np.eye(a.shape[0])
    return mat_exp(math.log(c) * a)


def real_power_many(exponent, c: np.ndarray) -> np.ndarray:
    """Vectorized c^E over an array of positive scalars; shape (..., m, m).

    Uses the cached eigendecomposition when available, otherwise falls back
    to one mat_exp per element.
    """
    spec = exponent if isinstance(exponent, OperatorSpec) else OperatorSpec(exponent)
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise ValueError("real_power_many requires all c > 0")
    shape = c.shape
    cf = c.reshape(-1)
    m = spec.dim
    dec = spec.eig()
    if dec is not None:
        vals, vecs, vinv = dec
        lc = np.log(cf)[:, None]
        diag = np.exp(lc * vals[None, :])
        out = np.einsum("ij,nj,jk->nik", vecs, diag, vinv).real
    else:
        out = np.empty((cf.size, m, m))
        a = spec.entries
        for i, ci in enumerate(cf):
            out[i] = mat_exp(math.log(ci) * a)
    return out.reshape(shape + (m, m))


def is_in_Q(entries) -> bool:
    """True iff all eigenvalue real parts are strictly positive."""
    lo, _, _ = spectral_bounds(entries)
    return lo > 0.0
