"""Weighted low-rank CP factorization of 3-order tensors.

Each factor matrix is refreshed one row at a time: the slice of the weighted
data belonging to that row is regressed, by pseudo-inverse least squares, on
the matching weighted slices of the rank-1 components. Rows of one factor are
independent given the other two, so they are solved as a batch.
"""

from dataclasses import dataclass

import numpy as np

from .kernels import converged, lstsq_pinv, make_rng
from .tensor import weighted_objective

__all__ = [
    "FactorSetCP",
    "CpSolveOptions",
    "cp_reconstruct",
    "cp_init",
    "cp_update_mode",
    "solve_gwlrtf_cp",
]


@dataclass(frozen=True)
class FactorSetCP:
    """Mode matrices ``u`` (I x r), ``v`` (J x r) and ``t`` (K x r)."""

    u: np.ndarray
    v: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        for name in ("u", "v", "t"):
            m = np.asarray(getattr(self, name), dtype=float)
            if m.ndim != 2:
                raise ValueError(f"factor {name} must be a matrix, got shape {m.shape}")
            object.__setattr__(self, name, m)
        if not (self.u.shape[1] == self.v.shape[1] == self.t.shape[1]):
            raise ValueError("factor matrices must share the same number of columns")

    @property
    def rank(self):
        return self.u.shape[1]

    @property
    def shape(self):
        return (self.u.shape[0], self.v.shape[0], self.t.shape[0])

    @property
    def factors(self):
        return (self.u, self.v, self.t)

    def replace(self, mode, matrix):
        mats = list(self.factors)
        mats[mode] = matrix
        return FactorSetCP(*mats)


@dataclass(frozen=True)
class CpSolveOptions:
    max_sweeps: int = 50
    tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")


def cp_reconstruct(f):
    """Sum of the rank-1 tensors ``u_d o v_d o t_d``."""
    return np.einsum("id,jd,kd->ijk", f.u, f.v, f.t)


def cp_init(dims, r, seed):
    """Factors with i.i.d. standard normal entries."""
    if r < 1:
        raise ValueError("rank must be at least 1")
    rng = make_rng(seed)
    return FactorSetCP(*(rng.standard_normal((int(d), r)) for d in dims))


def _check_inputs(xw, w, f):
    if xw.ndim != 3:
        raise ValueError(
            f"CP backend expects a 3-order tensor, got order {xw.ndim}; reshape higher orders first"
        )
    if w.shape != xw.shape:
        raise ValueError(f"weight shape {w.shape} does not match data shape {xw.shape}")
    if f.shape != xw.shape:
        raise ValueError(f"factor shapes {f.shape} do not match data shape {xw.shape}")


def cp_update_mode(xw, w, f, mode):
    """Refresh factor ``mode`` (0 -> u, 1 -> v, 2 -> t) given the other two.

    Parameters
    ----------
    xw : ndarray
        Precomputed ``w * x``.
    w : ndarray
        Nonnegative weights, same shape as ``xw``.
    f : FactorSetCP
        Current factors; only the selected one is replaced.
    mode : int
        Factor to update.

    Returns
    -------
    FactorSetCP
    """
    xw = np.asarray(xw, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_inputs(xw, w, f)
    if mode not in (0, 1, 2):
        raise ValueError(f"mode {mode} out of range for a 3-order tensor")

    a, b = (f.factors[m] for m in range(3) if m != mode)
    # Row i of the updated factor sees the slice obtained by fixing index i.
    w_sl = np.moveaxis(w, mode, 0)
    x_sl = np.moveaxis(xw, mode, 0)
    n_rows, p, q = w_sl.shape
    comps = np.einsum("pd,qd->pqd", a, b)
    # Column-stacking vec: the first slice index varies fastest.
    systems = np.transpose(w_sl[..., None] * comps, (0, 2, 1, 3)).reshape(n_rows, p * q, -1)
    rhs = np.transpose(x_sl, (0, 2, 1)).reshape(n_rows, p * q)
    return f.replace(mode, lstsq_pinv(systems, rhs))


def solve_gwlrtf_cp(x, w, r, opts=None, init=None, callback=None):
    """Minimize ``||w * (x - [[U, V, T]])||_F^2`` by alternating row updates.

    Each sweep updates T, then V, then U. Iteration stops once the relative
    decrease of the objective falls below ``opts.tol``, once the objective is
    at rounding level relative to ``||w * x||^2``, or after
    ``opts.max_sweeps`` sweeps.

    Parameters
    ----------
    x, w : ndarray
        Data and nonnegative weights of identical 3-order shape.
    r : int
        CP rank.
    opts : CpSolveOptions, optional
    init : FactorSetCP, optional
        Starting factors; drawn from ``cp_init(x.shape, r, opts.seed)`` if absent.
    callback : callable, optional
        Called as ``callback(sweep, objective)`` after every sweep.

    Returns
    -------
    FactorSetCP
    """
    opts = opts or CpSolveOptions()
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.ndim != 3:
        raise ValueError(
            f"CP backend expects a 3-order tensor, got order {x.ndim}; reshape higher orders first"
        )
    if w.shape != x.shape:
        raise ValueError(f"weight shape {w.shape} does not match data shape {x.shape}")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    f = init if init is not None else cp_init(x.shape, r, opts.seed)
    if f.rank != r:
        raise ValueError(f"initial factors have rank {f.rank}, expected {r}")

    xw = w * x
    scale = float(np.vdot(xw, xw))
    obj = weighted_objective(x, w, cp_reconstruct(f))
    for sweep in range(1, opts.max_sweeps + 1):
        for mode in (2, 1, 0):
            f = cp_update_mode(xw, w, f, mode)
        prev, obj = obj, weighted_objective(x, w, cp_reconstruct(f))
        if callback is not None:
            callback(sweep, obj)
        if converged(prev, obj, opts.tol, scale):
            break
    return f
