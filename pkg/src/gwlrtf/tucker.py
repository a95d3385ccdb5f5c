"""Weighted low-rank Tucker factorization by entrywise coordinate descent.

Every entry of every mode matrix and of the core is an exact minimizer of a
one-dimensional weighted least-squares problem with all other parameters held
fixed. The solver keeps the residual ``x - L`` in memory and patches it after
each scalar change instead of rebuilding the reconstruction.
"""

import itertools
from dataclasses import dataclass

import numpy as np

from .kernels import DENOM_EPS, converged, make_rng, scalar_wls
from .tensor import mode_n_product, outer_rank1, unfold

__all__ = [
    "TuckerModel",
    "TuckerSolveOptions",
    "tucker_reconstruct",
    "tucker_init",
    "tucker_update_mode_matrix",
    "tucker_update_core",
    "update_mode_entry",
    "update_core_entry",
    "orthonormalize",
    "solve_gwlrtf_tucker",
]


@dataclass(frozen=True)
class TuckerModel:
    """Core tensor of shape ``ranks`` and one ``I_n x r_n`` matrix per mode."""

    core: np.ndarray
    modes: tuple

    def __post_init__(self):
        core = np.asarray(self.core, dtype=float)
        modes = tuple(np.asarray(m, dtype=float) for m in self.modes)
        if len(modes) != core.ndim:
            raise ValueError(f"{len(modes)} mode matrices for a core of order {core.ndim}")
        for n, m in enumerate(modes):
            if m.ndim != 2 or m.shape[1] != core.shape[n]:
                raise ValueError(
                    f"mode matrix {n} has shape {m.shape}, expected (*, {core.shape[n]})"
                )
        object.__setattr__(self, "core", core)
        object.__setattr__(self, "modes", modes)

    @property
    def ranks(self):
        return self.core.shape

    @property
    def shape(self):
        return tuple(m.shape[0] for m in self.modes)

    def with_mode(self, n, matrix):
        modes = list(self.modes)
        modes[n] = matrix
        return TuckerModel(self.core, tuple(modes))

    def with_core(self, core):
        return TuckerModel(core, self.modes)


@dataclass(frozen=True)
class TuckerSolveOptions:
    max_sweeps: int = 50
    tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")


def tucker_reconstruct(m):
    """``G x_1 U_1 x_2 U_2 ... x_N U_N``."""
    out = m.core
    for n, mat in enumerate(m.modes):
        out = mode_n_product(out, mat, n)
    return out


def tucker_init(dims, ranks, seed):
    dims = tuple(int(d) for d in dims)
    ranks = tuple(int(r) for r in ranks)
    _check_ranks(dims, ranks)
    rng = make_rng(seed)
    modes = tuple(rng.standard_normal((d, r)) for d, r in zip(dims, ranks))
    core = rng.standard_normal(ranks)
    return TuckerModel(core, modes)


def _check_ranks(dims, ranks):
    if len(ranks) != len(dims):
        raise ValueError(f"need {len(dims)} ranks, got {len(ranks)}")
    for d, r in zip(dims, ranks):
        if not 1 <= r <= d:
            raise ValueError(f"rank {r} invalid for a mode of size {d}")


def _check_model(x, w, m):
    if w.shape != x.shape:
        raise ValueError(f"weight shape {w.shape} does not match data shape {x.shape}")
    if m.shape != x.shape:
        raise ValueError(f"model shape {m.shape} does not match data shape {x.shape}")


def _partial_product(m, n):
    """Core multiplied by every mode matrix except ``n``."""
    out = m.core
    for k, mat in enumerate(m.modes):
        if k != n:
            out = mode_n_product(out, mat, k)
    return out


def _mode_pass(resid, w2, m, n):
    """Update every entry of mode matrix ``n``; patches ``resid`` in place.

    Rows of the mode matrix touch disjoint rows of the unfolded residual, so
    all rows are advanced together for each column ``k``. The values equal
    those of a row-major scalar scan.
    """
    d = unfold(_partial_product(m, n), n)
    h = m.modes[n].copy()
    r_n = np.moveaxis(resid, n, 0)
    shape = r_n.shape
    r_n = r_n.reshape(shape[0], -1, order="F")
    w2_n = unfold(w2, n)
    for k in range(h.shape[1]):
        dk = d[k]
        e = r_n + np.outer(h[:, k], dk)
        denom = w2_n @ (dk * dk)
        num = (w2_n * e) @ dk
        ok = denom >= DENOM_EPS
        new = np.where(ok, num / np.where(ok, denom, 1.0), h[:, k])
        r_n = e - np.outer(new, dk)
        h[:, k] = new
    resid[...] = np.moveaxis(np.reshape(r_n, shape, order="F"), 0, n)
    return m.with_mode(n, h)


def _core_pass(resid, w2, m):
    """Lexicographic pass over the core; patches ``resid`` in place."""
    core = m.core.copy()
    r = resid.reshape(-1)
    w2 = w2.reshape(-1)
    for idx in itertools.product(*(range(k) for k in core.shape)):
        comp = m.modes[0][:, idx[0]]
        for mat, k in zip(m.modes[1:], idx[1:]):
            comp = np.multiply.outer(comp, mat[:, k]).reshape(-1)
        wc = w2 * comp
        denom = float(np.dot(wc, comp))
        g = core[idx]
        if denom < DENOM_EPS:
            continue
        # Same value as scalar_wls on the deflated residual r + g * comp.
        new = float(np.dot(wc, r)) / denom + g
        r -= (new - g) * comp
        core[idx] = new
    return m.with_core(core)


def orthonormalize(m):
    """Same reconstruction with orthonormal mode matrices.

    Each mode matrix is replaced by the Q factor of its QR decomposition and
    R is pushed into the core. The model's tensor is unchanged; coordinate
    descent converges far faster in this gauge than when scale and rotation
    drift freely between core and factors.
    """
    core = m.core
    modes = []
    for n, mat in enumerate(m.modes):
        q, r = np.linalg.qr(mat)
        core = mode_n_product(core, r, n)
        modes.append(q)
    return TuckerModel(core, tuple(modes))


def _weighted_sq(w, resid):
    r = w * resid
    return float(np.dot(r.ravel(), r.ravel()))


def tucker_update_mode_matrix(x, w, m, n):
    """One coordinate-descent pass over all entries of mode matrix ``n``.

    Entry ``(i, k)`` is set to the weighted least-squares coefficient of row
    ``k`` of the unfolded partial product against row ``i`` of the unfolded
    residual with that entry's own contribution added back.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_model(x, w, m)
    if not 0 <= n < x.ndim:
        raise ValueError(f"mode {n} out of range for order {x.ndim}")
    resid = x - tucker_reconstruct(m)
    return _mode_pass(resid, w * w, m, n)


def tucker_update_core(x, w, m):
    """One coordinate-descent pass over the core in lexicographic order."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_model(x, w, m)
    resid = x - tucker_reconstruct(m)
    return _core_pass(resid, w * w, m)


def update_mode_entry(x, w, m, n, i, k):
    """Single scalar update of entry ``(i, k)`` of mode matrix ``n``.

    Builds the deflated residual from scratch; intended for checks, the
    solver uses the incremental passes.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_model(x, w, m)
    d = unfold(_partial_product(m, n), n)
    h = m.modes[n].copy()
    e = unfold(x, n)[i] - h[i] @ d + h[i, k] * d[k]
    h[i, k] = scalar_wls(unfold(w, n)[i], e, d[k], h[i, k])
    return m.with_mode(n, h)


def update_core_entry(x, w, m, idx):
    """Single scalar update of core entry ``idx`` (built from scratch)."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_model(x, w, m)
    idx = tuple(idx)
    comp = outer_rank1([mat[:, k] for mat, k in zip(m.modes, idx)])
    g = m.core[idx]
    e = x - tucker_reconstruct(m) + g * comp
    core = m.core.copy()
    core[idx] = scalar_wls(w, e, comp, g)
    return m.with_core(core)


def solve_gwlrtf_tucker(x, w, ranks, opts=None, init=None, callback=None):
    """Minimize ``||w * (x - G x_1 U_1 ... x_N U_N)||_F^2``.

    A sweep re-orthonormalizes the mode matrices (see :func:`orthonormalize`),
    then updates the mode matrices in mode order and then the core. The loop
    ends when the relative objective change drops below ``opts.tol``, when
    the objective reaches rounding level relative to ``||w * x||^2``, or after
    ``opts.max_sweeps`` sweeps. ``callback(sweep, objective)`` is
    invoked after each sweep.
    """
    opts = opts or TuckerSolveOptions()
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    ranks = tuple(int(r) for r in ranks)
    _check_ranks(x.shape, ranks)
    if w.shape != x.shape:
        raise ValueError(f"weight shape {w.shape} does not match data shape {x.shape}")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    m = init if init is not None else tucker_init(x.shape, ranks, opts.seed)
    if m.ranks != ranks:
        raise ValueError(f"initial model has ranks {m.ranks}, expected {ranks}")
    _check_model(x, w, m)

    w2 = w * w
    scale = float(np.vdot(w2, x * x))
    obj = _weighted_sq(w, x - tucker_reconstruct(m))
    for sweep in range(1, opts.max_sweeps + 1):
        m = orthonormalize(m)
        # Fresh residual each sweep keeps rounding drift from accumulating.
        resid = x - tucker_reconstruct(m)
        for n in range(x.ndim):
            m = _mode_pass(resid, w2, m, n)
        m = _core_pass(resid, w2, m)
        prev, obj = obj, _weighted_sq(w, x - tucker_reconstruct(m))
        if callback is not None:
            callback(sweep, obj)
        if converged(prev, obj, opts.tol, scale):
            break
    return m
