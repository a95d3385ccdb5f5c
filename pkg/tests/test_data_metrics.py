import numpy as np
import pytest

from gwlrtf.cp import cp_reconstruct
from gwlrtf.data import (
    CLEAN,
    GAUSS,
    RESIDUAL,
    SPARSE,
    NoiseSpec,
    add_noise,
    apply_missing,
    gen_synthetic_cp,
    noise_partition,
)
from gwlrtf.kernels import make_rng
from gwlrtf.metrics import PSNR_SENTINEL, compute_e_metrics, metrics_report, psnr, rse
from gwlrtf.tensor import unfold


def test_synthetic_tensor():
    a, fa = gen_synthetic_cp((10, 10, 10), 5, 3)
    b, _ = gen_synthetic_cp((10, 10, 10), 5, 3)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(cp_reconstruct(fa), a)
    s = np.linalg.svd(unfold(a, 0), compute_uv=False)
    assert np.all(s[5:] < 1e-8 * s[0])


def test_missing_mask():
    assert apply_missing((4, 4, 4), 0.0, 1).all()
    mask = apply_missing((10, 10, 10), 0.2, 1)
    assert (~mask).sum() == 200
    np.testing.assert_array_equal(mask, apply_missing((10, 10, 10), 0.2, 1))
    with pytest.raises(ValueError):
        apply_missing((2, 2), 1.0, 0)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(kind="laplace")
    with pytest.raises(ValueError):
        NoiseSpec.sparse(1.5)
    with pytest.raises(ValueError):
        NoiseSpec.sparse(0.1, 2, 1)
    with pytest.raises(ValueError):
        NoiseSpec.gaussian(-1)


def test_noise_identities():
    x, _ = gen_synthetic_cp((5, 5, 5), 2, 0)
    mask = apply_missing(x.shape, 0.2, 0)
    np.testing.assert_array_equal(add_noise(x, mask, NoiseSpec.gaussian(0.0), 1), x)
    np.testing.assert_array_equal(add_noise(x, mask, NoiseSpec.sparse(0.0), 1), x)
    np.testing.assert_array_equal(add_noise(x, mask, NoiseSpec(kind="none"), 1), x)


def test_mixture_partition_counts():
    mask = np.ones((10, 10, 10), bool)
    spec = NoiseSpec.mixture()
    labels = noise_partition(mask, spec, make_rng(4))
    assert (labels == SPARSE).sum() == 200
    assert (labels == GAUSS).sum() == 160
    assert (labels == RESIDUAL).sum() == 640
    x = np.zeros(mask.shape)
    noisy = add_noise(x, mask, spec, 4)
    labels = noise_partition(mask, spec, make_rng(4))
    assert np.abs(noisy[labels == SPARSE]).max() <= 5.0
    assert np.abs(noisy[labels == RESIDUAL]).max() < 1.0


def test_noise_only_touches_observed_entries():
    x, _ = gen_synthetic_cp((10, 10, 10), 3, 1)
    mask = apply_missing(x.shape, 0.4, 2)
    noisy = add_noise(x, mask, NoiseSpec.mixture(), 3)
    np.testing.assert_array_equal(noisy[~mask], x[~mask])
    assert (noise_partition(mask, NoiseSpec.mixture(), make_rng(0))[~mask] == CLEAN).all()


def test_noise_variance_statistics():
    shape = (100, 100, 10)
    noisy = add_noise(np.zeros(shape), np.ones(shape, bool), NoiseSpec.gaussian(0.1), 5)
    assert abs(noisy.var() - 0.1) / 0.1 < 0.05
    spec = NoiseSpec.mixture()
    mask = np.ones(shape, bool)
    noisy = add_noise(np.zeros(shape), mask, spec, 6)
    labels = noise_partition(mask, spec, make_rng(6))
    assert abs(noisy[labels == GAUSS].var() - 0.2) / 0.2 < 0.05
    assert abs(noisy[labels == RESIDUAL].var() - 0.01) / 0.01 < 0.05
    assert abs(noisy[labels == SPARSE].var() - 100 / 12) / (100 / 12) < 0.05


def test_e_metrics():
    x = np.random.default_rng(0).standard_normal((10, 10, 10))
    mask = np.ones(x.shape, bool)
    assert compute_e_metrics(x, x, x, mask) == (0.0, 0.0, 0.0, 0.0)
    e = compute_e_metrics(x, x, x - 1.0, mask)
    assert e[2] == pytest.approx(1000) and e[3] == pytest.approx(1000)
    mask = apply_missing(x.shape, 0.3, 1)
    rec = x + 0.1
    shifted = np.where(mask, rec, rec + 50)
    a, b = compute_e_metrics(x, x, rec, mask), compute_e_metrics(x, x, shifted, mask)
    assert a[:2] == b[:2]
    with pytest.raises(ValueError):
        compute_e_metrics(x, x, x[:5], mask)


def test_psnr_and_rse():
    gt = np.zeros(100)
    assert psnr(gt, gt + 0.1) == pytest.approx(20.0)
    assert psnr(gt, gt) == PSNR_SENTINEL
    rng = np.random.default_rng(0)
    a, b = rng.uniform(size=50), rng.uniform(size=50)
    assert psnr(a, b, 255) == pytest.approx(10 * np.log10(255**2 / np.mean((a - b) ** 2)), abs=1e-10)
    assert rse(a, a) == 0
    assert rse(a, np.zeros(50)) == pytest.approx(1.0)
    assert rse(a, 2 * a) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        rse(np.zeros(3), a[:3])
    with pytest.raises(ValueError):
        psnr(a, b, 0)


def test_report_json_sorted():
    x = np.ones((2, 2))
    rep = metrics_report(x, x)
    assert rep.to_json().index('"e1"') < rep.to_json().index('"rse"')
    assert rep.e4 == 0 and rep.psnr == PSNR_SENTINEL
