"""Synthetic low-rank tensors, missing-entry masks and noise injection."""

from dataclasses import dataclass

import numpy as np

from .cp import FactorSetCP, cp_reconstruct
from .kernels import make_rng, sample_gaussian, sample_uniform

__all__ = [
    "NoiseSpec",
    "gen_synthetic_cp",
    "apply_missing",
    "noise_partition",
    "add_noise",
]

# Labels returned by noise_partition.
CLEAN, SPARSE, GAUSS, RESIDUAL = 0, 1, 2, 3


@dataclass(frozen=True)
class NoiseSpec:
    """Recipe for corrupting observed entries.

    ``kind`` is ``"none"``, ``"gaussian"`` (``variance`` on every observed
    entry), ``"sparse"`` (``sparse_fraction`` of observed entries get
    ``Uniform(low, high)``) or ``"mixture"`` (sparse part first, then
    ``gauss_fraction`` of the remaining entries get ``N(0, variance)`` and the
    rest ``N(0, residual_variance)``). Variances, not standard deviations.
    """

    kind: str = "mixture"
    variance: float = 0.2
    sparse_fraction: float = 0.2
    low: float = -5.0
    high: float = 5.0
    gauss_fraction: float = 0.2
    residual_variance: float = 0.01

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "sparse", "mixture"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        for name in ("sparse_fraction", "gauss_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.low > self.high:
            raise ValueError("uniform range must satisfy low <= high")
        if self.variance < 0 or self.residual_variance < 0:
            raise ValueError("variances must be nonnegative")

    @classmethod
    def gaussian(cls, variance):
        return cls(kind="gaussian", variance=variance)

    @classmethod
    def sparse(cls, fraction=0.2, low=-5.0, high=5.0):
        return cls(kind="sparse", sparse_fraction=fraction, low=low, high=high)

    @classmethod
    def mixture(cls, **kwargs):
        return cls(kind="mixture", **kwargs)


def _count(fraction, n):
    return int(np.floor(fraction * n + 0.5))


def gen_synthetic_cp(dims=(10, 10, 10), r=5, seed=0):
    """Ground-truth tensor ``[[U, V, T]]`` with i.i.d. standard normal factors."""
    if r < 1:
        raise ValueError("rank must be at least 1")
    rng = make_rng(seed)
    factors = FactorSetCP(*(rng.standard_normal((int(d), r)) for d in dims))
    return cp_reconstruct(factors), factors


def apply_missing(dims, rate, seed):
    """Observation mask with exactly ``round(rate * size)`` missing entries."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("missing rate must lie in [0, 1)")
    dims = tuple(int(d) for d in dims)
    size = int(np.prod(dims))
    rng = make_rng(seed)
    mask = np.ones(size, dtype=bool)
    mask[rng.choice(size, _count(rate, size), replace=False)] = False
    return mask.reshape(dims)


def noise_partition(mask, spec, rng):
    """Assign each entry a noise label (``CLEAN`` for unobserved or untouched).

    Observed entries are shuffled once; the leading block is the sparse part,
    then the Gaussian part, and the remainder gets the residual noise.
    """
    mask = np.asarray(mask, dtype=bool)
    labels = np.full(mask.shape, CLEAN, dtype=np.int8)
    flat = labels.reshape(-1)
    observed = np.flatnonzero(mask)
    if spec.kind == "none":
        return labels
    if spec.kind == "gaussian":
        flat[observed] = GAUSS
        return labels
    order = rng.permutation(observed)
    n_sparse = _count(spec.sparse_fraction, order.size)
    flat[order[:n_sparse]] = SPARSE
    if spec.kind == "mixture":
        rest = order[n_sparse:]
        n_gauss = _count(spec.gauss_fraction, rest.size)
        flat[rest[:n_gauss]] = GAUSS
        flat[rest[n_gauss:]] = RESIDUAL
    return labels


def add_noise(x, mask, spec, seed):
    """Corrupt the observed entries of ``x`` according to ``spec``."""
    x = np.asarray(x, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != x.shape:
        raise ValueError(f"mask shape {mask.shape} does not match data shape {x.shape}")
    rng = make_rng(seed)
    labels = noise_partition(mask, spec, rng)
    out = x.copy()
    flat = out.reshape(-1)
    lab = labels.reshape(-1)
    for label, draw in (
        (SPARSE, lambda n: sample_uniform(rng, spec.low, spec.high, n)),
        (GAUSS, lambda n: sample_gaussian(rng, 0.0, spec.variance, n)),
        (RESIDUAL, lambda n: sample_gaussian(rng, 0.0, spec.residual_variance, n)),
    ):
        idx = np.flatnonzero(lab == label)
        if idx.size:
            flat[idx] += draw(idx.size)
    return out
