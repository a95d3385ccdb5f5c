"""Small numerical kernels shared by the solvers."""

import math

import numpy as np

__all__ = [
    "default_rcond",
    "lstsq_pinv",
    "scalar_wls",
    "converged",
    "log_gauss_pdf",
    "make_rng",
    "sample_gaussian",
    "sample_uniform",
]

DENOM_EPS = 1e-15
# Objectives below this fraction of ||w * x||^2 are at rounding level.
ROUNDING_FLOOR = 1e4 * np.finfo(float).eps ** 2


def default_rcond(shape):
    return 1e-12 * max(shape[-2:])


def lstsq_pinv(a, b, rcond=None):
    """Minimum-norm least-squares solution ``pinv(a) @ b`` via the SVD.

    ``a`` may be a stack of matrices of shape ``(..., m, n)`` with ``b`` of
    shape ``(..., m)``; each system is solved independently. Singular values
    below ``rcond * sigma_max`` are treated as zero.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim < 2 or a.shape[-1] == 0 or a.shape[-2] == 0:
        raise ValueError("lstsq_pinv needs a non-empty matrix")
    if b.shape != a.shape[:-1]:
        raise ValueError(f"right-hand side of shape {b.shape} does not match matrix {a.shape}")
    if rcond is None:
        rcond = default_rcond(a.shape)
    if rcond < 0:
        raise ValueError("rcond must be nonnegative")

    u, s, vt = np.linalg.svd(a, full_matrices=False)
    smax = s[..., :1]
    keep = s > rcond * smax
    s_inv = np.zeros_like(s)
    np.divide(1.0, s, out=s_inv, where=keep)
    ub = np.einsum("...mk,...m->...k", u, b)
    return np.einsum("...kn,...k->...n", vt, s_inv * ub)


def scalar_wls(w, e, d, fallback):
    """Minimizer of ``||w * (e - d * h)||^2`` over the scalar ``h``.

    Returns ``fallback`` when ``sum(w^2 d^2)`` is below ``1e-15``.
    """
    w = np.asarray(w, dtype=float).ravel()
    e = np.asarray(e, dtype=float).ravel()
    d = np.asarray(d, dtype=float).ravel()
    if not (w.size == e.size == d.size):
        raise ValueError("scalar_wls inputs must have equal lengths")
    w2d = w * w * d
    denom = float(np.dot(w2d, d))
    if denom < DENOM_EPS:
        return fallback
    return float(np.dot(w2d, e)) / denom


def log_gauss_pdf(x, mu, sigma2):
    """Log density of ``N(mu, sigma2)`` at ``x`` (broadcasts over arrays)."""
    sigma2 = np.asarray(sigma2, dtype=float)
    if np.any(sigma2 <= 0):
        raise ValueError("variance must be positive")
    diff = np.asarray(x, dtype=float) - mu
    out = -0.5 * np.log(2.0 * math.pi * sigma2) - diff * diff / (2.0 * sigma2)
    return float(out) if np.ndim(out) == 0 else out


def converged(prev, obj, tol, scale):
    """Relative decrease below ``tol`` or objective at rounding level of ``scale``."""
    return abs(prev - obj) / max(prev, 1e-30) < tol or obj <= ROUNDING_FLOOR * scale


def make_rng(seed):
    """PCG64 generator seeded from a 64-bit integer (or an existing SeedSequence)."""
    return np.random.Generator(np.random.PCG64(seed))


def sample_gaussian(rng, mu, sigma2, n):
    """``n`` draws from ``N(mu, sigma2)``; ``sigma2`` is a variance."""
    if sigma2 < 0:
        raise ValueError("variance must be nonnegative")
    return rng.normal(mu, math.sqrt(sigma2), size=n)


def sample_uniform(rng, lo, hi, n):
    if lo > hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    return rng.uniform(lo, hi, size=n)
