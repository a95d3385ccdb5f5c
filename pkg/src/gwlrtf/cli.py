"""Command-line interface: ``gwlrtf {synth,factorize,metrics,restore-images}``."""

import argparse
import csv
import io as _io
import logging
import sys
from pathlib import Path

import numpy as np

from .data import NoiseSpec, add_noise, apply_missing, gen_synthetic_cp
from .io import (
    atomic_write,
    flatten_color_stack,
    load_image_stack,
    read_mask,
    read_tensor,
    save_image_stack,
    unflatten_color_stack,
    write_mask,
    write_tensor,
)
from .metrics import metrics_report
from .mog import MoGConfig, run_mog_gwlrtf

log = logging.getLogger(__name__)

__all__ = ["main", "parse_noise", "parse_rank", "build_parser"]


def _int_list(text):
    try:
        values = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError(f"entries must be positive integers: {text!r}")
    return values


def parse_rank(text):
    """``"5"`` gives the int 5; ``"2,3,2"`` gives a per-mode tuple."""
    values = _int_list(text)
    return values[0] if len(values) == 1 and "," not in text else values


def parse_noise(text):
    """Parse ``none``, ``gaussian:v``, ``sparse:f,lo,hi`` or ``mixture[:v,rv]``.

    ``v`` and ``rv`` are variances.
    """
    kind, _, args = text.partition(":")
    try:
        nums = [float(a) for a in args.split(",")] if args else []
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad noise parameters in {text!r}")
    try:
        if kind == "none" and not nums:
            return NoiseSpec(kind="none")
        if kind == "gaussian" and len(nums) == 1:
            return NoiseSpec.gaussian(nums[0])
        if kind == "sparse" and len(nums) == 3:
            return NoiseSpec.sparse(*nums)
        if kind == "mixture" and not nums:
            return NoiseSpec.mixture()
        if kind == "mixture" and len(nums) == 2:
            return NoiseSpec.mixture(variance=nums[0], residual_variance=nums[1])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))
    raise argparse.ArgumentTypeError(
        f"unrecognised noise spec {text!r}; use none, gaussian:v, sparse:f,lo,hi or mixture[:v,rv]"
    )


def _add_solver_args(p):
    p.add_argument("--backend", choices=("cp", "tucker"), default="cp")
    p.add_argument("--rank", type=parse_rank, required=True,
                   help="CP rank, or Tucker rank(s) as r or r1,r2,...")
    p.add_argument("--k", type=int, default=3, help="number of mixture components")
    p.add_argument("--em-iters", type=int, default=100)
    p.add_argument("--em-tol", type=float, default=1e-8)
    p.add_argument("--init-sweeps", type=int, default=100,
                   help="sweeps per screening start")
    p.add_argument("--restarts", type=int, default=8, help="number of screening starts")
    p.add_argument("--polish-sweeps", type=int, default=2000,
                   help="extra sweeps for the best start")
    p.add_argument("--inner-sweeps", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)


def _config(args):
    return MoGConfig(
        rank=args.rank,
        backend=args.backend,
        k=args.k,
        em_max_iters=args.em_iters,
        em_tol=args.em_tol,
        init_sweeps=args.init_sweeps,
        init_restarts=args.restarts,
        polish_sweeps=args.polish_sweeps,
        inner_sweeps=args.inner_sweeps,
        seed=args.seed,
    )


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gwlrtf", description="Robust weighted low-rank tensor factorization."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic CP tensor, mask and noisy copy")
    p.add_argument("--dims", type=_int_list, default=(10, 10, 10))
    p.add_argument("--rank", type=int, default=5)
    p.add_argument("--missing", type=float, default=0.2)
    p.add_argument("--noise", type=parse_noise, default=NoiseSpec(kind="none"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("factorize", help="recover a low-rank tensor")
    _add_solver_args(p)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--mask")
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="optional CSV trace of the EM iterations")
    p.set_defaults(func=cmd_factorize)

    p = sub.add_parser("metrics", help="print error metrics as JSON")
    p.add_argument("--gt", required=True)
    p.add_argument("--rec", required=True)
    p.add_argument("--no")
    p.add_argument("--mask")
    p.add_argument("--peak", type=float, default=1.0)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("restore-images", help="restore a PGM/PPM image stack")
    _add_solver_args(p)
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_restore_images)
    return parser


def cmd_synth(args):
    if len(args.dims) != 3:
        raise ValueError("--dims needs exactly three sizes")
    gt_seed, mask_seed, noise_seed = np.random.SeedSequence(args.seed).spawn(3)
    x_gt, _ = gen_synthetic_cp(args.dims, args.rank, gt_seed)
    mask = apply_missing(args.dims, args.missing, mask_seed)
    x_no = add_noise(x_gt, mask, args.noise, noise_seed)
    prefix = args.out_prefix
    write_tensor(f"{prefix}_gt.gwt", x_gt)
    write_tensor(f"{prefix}_no.gwt", x_no)
    write_mask(f"{prefix}_mask.gwm", mask)
    return 0


def _write_trace(path, trace):
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iteration", "log_likelihood", "weighted_objective", "floored"])
    for rec in trace:
        writer.writerow([rec.iteration, repr(rec.log_likelihood), repr(rec.objective), int(rec.floored)])
    atomic_write(path, buf.getvalue().encode())


def cmd_factorize(args):
    x = read_tensor(args.input)
    mask = read_mask(args.mask, x.shape) if args.mask else np.ones(x.shape, dtype=bool)
    result = run_mog_gwlrtf(x, mask, _config(args))
    write_tensor(args.out, result.low_rank)
    if args.trace:
        _write_trace(args.trace, result.trace)
    return 0


def cmd_metrics(args):
    gt = read_tensor(args.gt)
    rec = read_tensor(args.rec)
    no = read_tensor(args.no) if args.no else None
    mask = read_mask(args.mask, gt.shape) if args.mask else None
    print(metrics_report(gt, rec, no, mask, peak=args.peak).to_json())
    return 0


def cmd_restore_images(args):
    stack = load_image_stack(args.inputs)
    n_images = len(args.inputs)
    flattened = stack.ndim == 4 and args.backend == "cp"
    x = flatten_color_stack(stack) if flattened else stack
    result = run_mog_gwlrtf(x, np.ones(x.shape, dtype=bool), _config(args))
    restored = result.low_rank
    if flattened:
        restored = unflatten_color_stack(restored, n_images)
    names = [Path(p).name for p in args.inputs]
    for path in save_image_stack(restored, args.out_dir, names):
        log.info("wrote %s", path)
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"gwlrtf: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
