"""Command-line entry point: ``haqjsk compute | eval | selftest``."""

from __future__ import annotations

import argparse
import json
import logging
import platform
import shlex
import sys
import time
from pathlib import Path

from . import __version__
from .io import (
    dataset_fingerprint,
    load_tud,
    read_kernel_matrix,
    write_cv_report,
    write_kernel_matrix,
)
from .kernels import VARIANTS, KernelConfig, kernel_matrix, psd_diagnostics, resolve_jobs, shift_diagonal
from .svm import DEFAULT_C_GRID, cross_validate

log = logging.getLogger("haqjsk")


def _c_grid(text: str) -> list[float]:
    try:
        grid = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad C grid {text!r}; expected comma-separated numbers")
    if not grid or any(c <= 0 for c in grid):
        raise argparse.ArgumentTypeError("C grid values must be positive")
    return grid


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="haqjsk", description="Quantum Jensen-Shannon graph kernels.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compute", help="compute a kernel matrix for a TU-format dataset")
    c.add_argument("--dataset-dir", required=True, type=Path)
    c.add_argument("--name", required=True, help="dataset file prefix, e.g. MUTAG")
    c.add_argument("--kernel", choices=VARIANTS, default="haqjsk-d")
    c.add_argument("--levels", type=_positive_int, default=5, help="hierarchy depth H")
    c.add_argument("--prototypes", type=_positive_int, default=256, help="level-1 prototype count M1")
    c.add_argument("--max-layer", type=_positive_int, default=None,
                   help="embedding depth K (default: longest shortest path, capped at 10)")
    c.add_argument("--seed", type=int, default=42)
    c.add_argument("--mu", type=float, default=1.0, help="decay factor, qjsu only")
    c.add_argument("--standardize", action="store_true", help="z-score embeddings before k-means")
    c.add_argument("--jobs", type=_positive_int, default=None,
                   help="worker threads (default: $HAQJSK_JOBS or CPU count)")
    c.add_argument("--out", required=True, type=Path, help="kernel matrix file to write")

    e = sub.add_parser("eval", help="cross-validate a C-SVM on a kernel matrix file")
    e.add_argument("--kernel-matrix", required=True, type=Path)
    e.add_argument("--folds", type=_positive_int, default=10)
    e.add_argument("--repeats", type=_positive_int, default=10)
    e.add_argument("--c-grid", type=_c_grid, default=list(DEFAULT_C_GRID))
    e.add_argument("--seed", type=int, default=42)
    e.add_argument("--shift-psd", action="store_true",
                   help="add the suggested diagonal shift when the matrix is not PSD")
    e.add_argument("--out", type=Path, default=None, help="CV report JSON (default: next to the matrix)")

    sub.add_parser("selftest", help="run the built-in analytic checks")
    return p


def manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def cmd_compute(args, argv) -> int:
    t_start = time.perf_counter()
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    ds = load_tud(args.dataset_dir, args.name, require_labels=False)
    digest = dataset_fingerprint(args.dataset_dir, args.name)
    timings["load"] = time.perf_counter() - t0

    cfg = KernelConfig(args.kernel, args.levels, args.prototypes, args.max_layer, args.seed,
                       args.mu, args.standardize)
    jobs = resolve_jobs(args.jobs)
    km = kernel_matrix(ds, cfg, timings=timings, jobs=jobs)

    t0 = time.perf_counter()
    mpath = manifest_path(args.out)
    # only content-determined fields go into the matrix file, so reruns are byte-identical
    km.meta.update({"manifest": mpath.name, "dataset_sha256": digest})
    args.out.parent.mkdir(parents=True, exist_ok=True)
    write_kernel_matrix(km, args.out)
    timings["write"] = time.perf_counter() - t0

    manifest = {
        "command": "haqjsk " + shlex.join(argv),
        "version": __version__,
        "python": platform.python_version(),
        "config": km.config.to_dict(),
        "dataset": {"name": ds.name, "dir": str(args.dataset_dir), "sha256": digest,
                    "graphs": len(ds), "classes": ds.class_count},
        "jobs": jobs,
        "outputs": [str(args.out)],
        "timings": timings,
        "total_seconds": time.perf_counter() - t_start,
    }
    mpath.write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {args.out} ({km.size}x{km.size}, {km.config.variant}) and {mpath}")
    return 0


def cmd_eval(args, argv) -> int:
    if not args.kernel_matrix.is_file():
        raise FileNotFoundError(f"kernel matrix file not found: {args.kernel_matrix}")
    km = read_kernel_matrix(args.kernel_matrix)
    if km.labels is None:
        raise ValueError(f"{args.kernel_matrix} carries no graph labels; cannot evaluate")
    report = psd_diagnostics(km)
    meta = {"min_eigenvalue": report.min_eigenvalue, "diagonal_shift": 0.0,
            "kernel_matrix": str(args.kernel_matrix), "manifest": km.meta.get("manifest")}
    if args.shift_psd and report.suggested_shift > 0:
        km = shift_diagonal(km, report.suggested_shift)
        meta["diagonal_shift"] = report.suggested_shift
    elif report.min_eigenvalue < -1e-10 * float(abs(km.values).max()):
        log.warning("kernel matrix is not PSD (min eigenvalue %.3g); training as-is", report.min_eigenvalue)
    cv = cross_validate(km, km.labels, args.folds, args.repeats, args.c_grid, args.seed)
    cv.meta.update(meta)
    out = args.out or args.kernel_matrix.with_name(args.kernel_matrix.name + ".cv.json")
    write_cv_report(cv, out, km.dataset_name, km.config)
    print(f"{km.dataset_name} {km.config.variant}: {cv.summary()}")
    return 0


def cmd_selftest(args, argv) -> int:
    from .selftest import run_selftest

    return 0 if run_selftest() else 1


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"compute": cmd_compute, "eval": cmd_eval, "selftest": cmd_selftest}[args.command]
    try:
        return handler(args, argv)
    except Exception as e:
        print(f"haqjsk {args.command}: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
