"""Recovery metrics: E1-E4, PSNR and RSE."""

import json
import sys
from dataclasses import asdict, dataclass

import numpy as np

__all__ = ["MetricsReport", "compute_e_metrics", "psnr", "rse", "metrics_report"]

PSNR_SENTINEL = sys.float_info.max


@dataclass(frozen=True)
class MetricsReport:
    e1: float
    e2: float
    e3: float
    e4: float
    psnr: float
    rse: float

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)


def _same_shape(*arrays):
    shapes = {np.shape(a) for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"shape mismatch: {sorted(shapes)}")


def compute_e_metrics(x_no, x_gt, x_rec, mask):
    """``(E1, E2, E3, E4)``.

    E1/E2 are the l1 norm and squared Frobenius norm of the fit to the noisy
    input on observed entries; E3/E4 are the same norms of the error against
    the ground truth over the whole tensor.
    """
    x_no, x_gt, x_rec = (np.asarray(a, dtype=float) for a in (x_no, x_gt, x_rec))
    mask = np.asarray(mask, dtype=bool)
    _same_shape(x_no, x_gt, x_rec, mask)
    fit = (x_no - x_rec)[mask]
    err = (x_gt - x_rec).ravel()
    return (
        float(np.sum(np.abs(fit))),
        float(np.dot(fit, fit)),
        float(np.sum(np.abs(err))),
        float(np.dot(err, err)),
    )


def psnr(gt, rec, peak=1.0):
    """Peak signal-to-noise ratio in dB; ``PSNR_SENTINEL`` for a perfect match."""
    gt, rec = np.asarray(gt, dtype=float), np.asarray(rec, dtype=float)
    _same_shape(gt, rec)
    if peak <= 0:
        raise ValueError("peak must be positive")
    mse = float(np.mean((gt - rec) ** 2))
    if mse == 0.0:
        return PSNR_SENTINEL
    return 10.0 * np.log10(peak * peak / mse)


def rse(gt, rec):
    """``||gt - rec||_F / ||gt||_F``."""
    gt, rec = np.asarray(gt, dtype=float), np.asarray(rec, dtype=float)
    _same_shape(gt, rec)
    denom = np.linalg.norm(gt.ravel())
    if denom == 0.0:
        raise ValueError("relative error undefined for an all-zero ground truth")
    return float(np.linalg.norm((gt - rec).ravel()) / denom)


def metrics_report(x_gt, x_rec, x_no=None, mask=None, peak=1.0):
    """All metrics at once; without ``x_no``/``mask`` the fit terms use ``x_gt``
    and treat every entry as observed."""
    x_gt = np.asarray(x_gt, dtype=float)
    if x_no is None:
        x_no = x_gt
    if mask is None:
        mask = np.ones(x_gt.shape, dtype=bool)
    e1, e2, e3, e4 = compute_e_metrics(x_no, x_gt, x_rec, mask)
    return MetricsReport(e1, e2, e3, e4, float(psnr(x_gt, x_rec, peak)), rse(x_gt, x_rec))
