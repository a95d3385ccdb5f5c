"""Mixture-of-Gaussians noise model and the EM outer loop.

The noise ``x - l`` on observed entries is modelled as a zero-mean mixture of
``k`` Gaussians. Each EM iteration computes responsibilities, refreshes the
mixing proportions and variances in closed form, turns them into per-entry
weights, and hands the weighted low-rank fit to the CP or Tucker backend.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .cp import CpSolveOptions, cp_init, cp_reconstruct, solve_gwlrtf_cp
from .tensor import weighted_objective
from .tucker import (
    TuckerSolveOptions,
    solve_gwlrtf_tucker,
    tucker_init,
    tucker_reconstruct,
)

__all__ = [
    "MoGState",
    "MoGConfig",
    "TraceRecord",
    "RestorationResult",
    "sigma_floor",
    "e_step",
    "m_step_mog",
    "build_weight_tensor",
    "observed_log_likelihood",
    "expected_complete_ll",
    "init_mog",
    "run_mog_gwlrtf",
]

log = logging.getLogger(__name__)

SPREAD = (0.1, 1.0, 10.0)
EMPTY_COMPONENT = 1e-10


@dataclass(frozen=True)
class MoGState:
    """Mixing proportions ``pi`` and variances ``sigma2`` of a zero-mean mixture."""

    pi: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        pi = np.atleast_1d(np.asarray(self.pi, dtype=float))
        sigma2 = np.atleast_1d(np.asarray(self.sigma2, dtype=float))
        if pi.shape != sigma2.shape or pi.ndim != 1 or pi.size < 1:
            raise ValueError("pi and sigma2 must be equal-length nonempty vectors")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-12:
            raise ValueError("mixing proportions must be nonnegative and sum to one")
        if np.any(sigma2 <= 0):
            raise ValueError("variances must be positive")
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "sigma2", sigma2)

    @property
    def k(self):
        return self.pi.size

    def permuted(self, order):
        order = np.asarray(order)
        return MoGState(self.pi[order], self.sigma2[order])


def _observed(x, l, mask):
    x, l = np.asarray(x, dtype=float), np.asarray(l, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if not (x.shape == l.shape == mask.shape):
        raise ValueError(f"shape mismatch: x {x.shape}, l {l.shape}, mask {mask.shape}")
    return (x - l)[mask]


def _log_joint(resid, mog):
    """``log pi_k + log N(resid | 0, sigma2_k)`` as an (n_obs, k) array."""
    r = resid[:, None]
    return (
        np.log(mog.pi)[None, :]
        - 0.5 * np.log(2.0 * math.pi * mog.sigma2)[None, :]
        - r * r / (2.0 * mog.sigma2)[None, :]
    )


def sigma_floor(x, mask):
    """Lower bound on every variance: ``1e-8 * var(observed x) + 1e-12``."""
    obs = np.asarray(x, dtype=float)[np.asarray(mask, dtype=bool)]
    return 1e-8 * float(np.var(obs)) + 1e-12


def e_step(x, l, mask, mog):
    """Posterior responsibilities, one row per observed entry (C order).

    Rows sum to one; computed in log space with max subtraction.
    """
    resid = _observed(x, l, mask)
    if resid.size == 0:
        raise ValueError("mask has no observed entries")
    lj = _log_joint(resid, mog)
    lj -= lj.max(axis=1, keepdims=True)
    gamma = np.exp(lj)
    gamma /= gamma.sum(axis=1, keepdims=True)
    return gamma


def _m_step(x, l, mask, gamma, floor):
    """M-step returning ``(state, hit)``; ``hit`` flags floor clamps or reseeds."""
    resid = _observed(x, l, mask)
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape[0] != resid.size:
        raise ValueError("responsibilities do not match the observed entries")
    mk = gamma.sum(axis=0)
    weighted = gamma.T @ (resid * resid)
    sigma2 = np.divide(weighted, mk, out=np.zeros_like(mk), where=mk > 0)
    hit = bool(np.any(sigma2 < floor))
    sigma2 = np.maximum(sigma2, floor)
    pi = mk / mk.sum()
    empty = mk < EMPTY_COMPONENT
    if np.any(empty):
        # Revive dead components as a broad, rarely used one.
        hit = True
        sigma2[empty] = sigma2[~empty].max() * 10.0 if np.any(~empty) else floor
        pi[empty] = 1e-3
        pi /= pi.sum()
        log.debug("reseeded %d empty mixture component(s)", int(empty.sum()))
    return MoGState(pi, sigma2), hit


def m_step_mog(x, l, mask, gamma, floor=None):
    """Closed-form update of mixing proportions and variances.

    ``floor`` defaults to :func:`sigma_floor` of the observed data.
    """
    if floor is None:
        floor = sigma_floor(x, mask)
    return _m_step(x, l, mask, gamma, floor)[0]


def build_weight_tensor(gamma, mog, mask):
    """``sqrt(sum_k gamma_k / (2 pi sigma2_k))`` on observed entries, 0 elsewhere."""
    mask = np.asarray(mask, dtype=bool)
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (int(mask.sum()), mog.k):
        raise ValueError(f"responsibilities of shape {gamma.shape} do not fit the mask")
    w = np.zeros(mask.shape)
    w[mask] = np.sqrt(gamma @ (1.0 / (2.0 * math.pi * mog.sigma2)))
    return w


def observed_log_likelihood(x, l, mask, mog):
    """``sum over observed entries of log sum_k pi_k N(x | l, sigma2_k)``."""
    resid = _observed(x, l, mask)
    if resid.size == 0:
        return 0.0
    return float(np.sum(logsumexp(_log_joint(resid, mog), axis=1)))


def expected_complete_ll(x, l, mask, mog, gamma):
    """Expected complete-data log-likelihood with the constants written as

    ``gamma_k * (log pi_k - log sqrt(2 pi sigma_k) - r^2 / (2 pi sigma_k^2))``.
    """
    resid = _observed(x, l, mask)
    gamma = np.asarray(gamma, dtype=float)
    sigma = np.sqrt(mog.sigma2)
    with np.errstate(divide="ignore"):
        log_pi = np.log(mog.pi)
    terms = (
        log_pi[None, :]
        - np.log(np.sqrt(2.0 * math.pi * sigma))[None, :]
        - (resid * resid)[:, None] / (2.0 * math.pi * mog.sigma2)[None, :]
    )
    # 0 * log 0 counts as 0.
    prod = np.zeros_like(terms)
    np.multiply(gamma, terms, out=prod, where=gamma > 0)
    return float(np.sum(prod))


@dataclass(frozen=True)
class MoGConfig:
    """Settings for :func:`run_mog_gwlrtf`.

    ``rank`` is an int for the CP backend and an int or per-mode tuple for
    Tucker (an int is clipped to each mode size).

    The initial low-rank fit uses the observation mask as weights. It runs
    ``init_restarts`` seeded starts for ``init_sweeps`` sweeps each, then
    continues the best one for up to ``polish_sweeps`` sweeps. Each EM
    iteration afterwards warm-starts ``inner_sweeps`` solver sweeps.
    """

    rank: object
    backend: str = "cp"
    k: int = 3
    em_max_iters: int = 100
    em_tol: float = 1e-8
    init_sweeps: int = 100
    init_restarts: int = 8
    polish_sweeps: int = 2000
    init_tol: float = 1e-10
    inner_sweeps: int = 3
    inner_tol: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.backend not in ("cp", "tucker"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.em_max_iters < 0:
            raise ValueError("em_max_iters must be nonnegative")
        if self.init_sweeps < 1 or self.inner_sweeps < 1:
            raise ValueError("sweep budgets must be at least 1")
        if self.polish_sweeps < 0:
            raise ValueError("polish_sweeps must be nonnegative")
        if self.init_restarts < 1:
            raise ValueError("init_restarts must be at least 1")
        if self.backend == "cp" and not isinstance(self.rank, (int, np.integer)):
            raise ValueError("CP backend needs an integer rank")

    def ranks_for(self, shape):
        if self.backend == "cp":
            return int(self.rank)
        if isinstance(self.rank, (int, np.integer)):
            return tuple(min(int(self.rank), d) for d in shape)
        ranks = tuple(int(r) for r in self.rank)
        if len(ranks) != len(shape):
            raise ValueError(f"need {len(shape)} Tucker ranks, got {len(ranks)}")
        return ranks


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    log_likelihood: float
    objective: float
    floored: bool = False


@dataclass
class RestorationResult:
    low_rank: np.ndarray
    mog: MoGState
    model: object
    trace: list = field(default_factory=list)


def _solve(config, x, w, ranks, sweeps, tol, init):
    if config.backend == "cp":
        opts = CpSolveOptions(max_sweeps=sweeps, tol=tol, seed=config.seed)
        model = solve_gwlrtf_cp(x, w, ranks, opts, init=init)
        return model, cp_reconstruct(model)
    opts = TuckerSolveOptions(max_sweeps=sweeps, tol=tol, seed=config.seed)
    model = solve_gwlrtf_tucker(x, w, ranks, opts, init=init)
    return model, tucker_reconstruct(model)


def _initial_fit(config, x, w, ranks):
    """Mask-weighted fit: short runs from several seeded starts, then the
    best one is continued for up to ``polish_sweeps`` sweeps."""
    best = None
    children = np.random.SeedSequence(config.seed).spawn(config.init_restarts)
    for child in children:
        if config.backend == "cp":
            start = cp_init(x.shape, ranks, child)
        else:
            start = tucker_init(x.shape, ranks, child)
        model, low_rank = _solve(config, x, w, ranks, config.init_sweeps, config.init_tol, start)
        obj = weighted_objective(x, w, low_rank)
        if best is None or obj < best[0]:
            best = (obj, model, low_rank)
    if config.polish_sweeps > 0:
        return _solve(config, x, w, ranks, config.polish_sweeps, config.init_tol, best[1])
    return best[1], best[2]


def init_mog(x, l, mask, k, floor=None):
    """Uniform proportions, variances spread around the residual variance."""
    if floor is None:
        floor = sigma_floor(x, mask)
    base = float(np.var(_observed(x, l, mask)))
    spread = [SPREAD[i] if i < len(SPREAD) else SPREAD[-1] * 10.0 ** (i - len(SPREAD) + 1)
              for i in range(k)]
    sigma2 = np.maximum(base * np.asarray(spread), floor)
    return MoGState(np.full(k, 1.0 / k), sigma2)


def run_mog_gwlrtf(x, mask, config, mog=None):
    """Recover a low-rank tensor from ``x`` observed on ``mask``.

    Parameters
    ----------
    x : ndarray
        Data tensor; values outside ``mask`` are ignored.
    mask : ndarray of bool
        True where the entry is observed.
    config : MoGConfig
    mog : MoGState, optional
        Initial mixture; by default built by :func:`init_mog`.

    Returns
    -------
    RestorationResult
        ``trace[0]`` describes the initialization, later records one EM
        iteration each.
    """
    x = np.asarray(x, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape:
        raise ValueError(f"mask shape {mask.shape} does not match data shape {x.shape}")
    if config.backend == "cp" and x.ndim != 3:
        raise ValueError(
            f"CP backend needs a 3-order tensor, got order {x.ndim}; reshape it first"
        )
    if not mask.any():
        raise ValueError("mask has no observed entries")
    ranks = config.ranks_for(x.shape)
    floor = sigma_floor(x, mask)

    # Observed values only; unobserved entries never reach the solver.
    x = np.where(mask, x, 0.0)
    w = mask.astype(float)
    model, low_rank = _initial_fit(config, x, w, ranks)
    if mog is None:
        mog = init_mog(x, low_rank, mask, config.k, floor)
    elif mog.k != config.k:
        raise ValueError(f"initial mixture has {mog.k} components, config says {config.k}")
    ll = observed_log_likelihood(x, low_rank, mask, mog)
    trace = [TraceRecord(0, ll, weighted_objective(x, w, low_rank))]

    for it in range(1, config.em_max_iters + 1):
        gamma = e_step(x, low_rank, mask, mog)
        mog, hit = _m_step(x, low_rank, mask, gamma, floor)
        w = build_weight_tensor(gamma, mog, mask)
        model, low_rank = _solve(
            config, x, w, ranks, config.inner_sweeps, config.inner_tol, model
        )
        prev, ll = ll, observed_log_likelihood(x, low_rank, mask, mog)
        trace.append(TraceRecord(it, ll, weighted_objective(x, w, low_rank), hit))
        if abs(ll - prev) / max(abs(prev), 1e-30) < config.em_tol:
            log.debug("EM converged after %d iterations", it)
            break
    return RestorationResult(low_rank, mog, model, trace)
