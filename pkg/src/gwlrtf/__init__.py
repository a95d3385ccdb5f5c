"""Mixture-of-Gaussians robust weighted low-rank tensor factorization."""

from .cp import FactorSetCP, CpSolveOptions, cp_reconstruct, cp_init, cp_update_mode, solve_gwlrtf_cp
from .data import NoiseSpec, add_noise, apply_missing, gen_synthetic_cp, noise_partition
from .io import (
    TensorFormatError,
    load_image_stack,
    read_mask,
    read_pnm,
    read_tensor,
    save_image_stack,
    write_mask,
    write_pnm,
    write_tensor,
)
from .metrics import MetricsReport, compute_e_metrics, metrics_report, psnr, rse
from .mog import (
    MoGConfig,
    MoGState,
    RestorationResult,
    TraceRecord,
    build_weight_tensor,
    e_step,
    expected_complete_ll,
    init_mog,
    m_step_mog,
    observed_log_likelihood,
    run_mog_gwlrtf,
)
from .tensor import fold, hadamard, inner, mode_n_product, norm, outer_rank1, slice3, unfold, vec
from .tucker import (
    TuckerModel,
    TuckerSolveOptions,
    solve_gwlrtf_tucker,
    tucker_init,
    tucker_reconstruct,
)

__version__ = "0.1.0"
