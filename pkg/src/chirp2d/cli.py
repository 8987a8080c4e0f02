"""Command-line interface: ``chirp2d {simulate,estimate,montecarlo,texture-demo}``.

Exit status is 0 on success, 1 on a usage error and 2 when the command fails
at run time (unreadable input, estimation failure).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from contextlib import nullcontext

import numpy as np

from . import imageio
from .estimator import EstimatorConfig, sequential_estimate
from .model import PARAMETERS, ModelSpec, single_chirp, synthesize, texture_chirps, two_chirps
from .montecarlo import McPlan, render, run

PRESETS = {"single": single_chirp, "two": two_chirps, "texture": texture_chirps}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _size(text: str) -> tuple[int, int]:
    try:
        m, n = text.lower().split("x")
        M, N = int(m), int(n)
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like MxN, got {text!r}") from None
    if M < 1 or N < 1:
        raise argparse.ArgumentTypeError(f"size must be positive, got {text!r}")
    return M, N


def _nonneg(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"must be nonnegative, got {text!r}")
    return v


def _scale(text: str) -> imageio.ScaleMap:
    try:
        lo, hi = (float(v) for v in text.split(","))
        return imageio.ScaleMap(lo, hi)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"scale must be LO,HI with LO < HI: {exc}") from None


def _read_bytes(path: str) -> bytes:
    try:
        with open(path, "rb") as fh:
            return fh.read()
    except OSError as exc:
        raise RuntimeError(f"cannot read {path!r}: {exc.strerror}") from None


def _write(path: str | None, data, stdout) -> None:
    if path is None or path == "-":
        if isinstance(data, str):
            stdout.write(data)
        elif hasattr(stdout, "buffer"):
            stdout.flush()
            stdout.buffer.write(data)
            stdout.buffer.flush()
        else:
            stdout.write(data.decode("latin-1"))
        return
    mode = "w" if isinstance(data, str) else "wb"
    try:
        with open(path, mode) as fh:
            fh.write(data)
    except OSError as exc:
        raise RuntimeError(f"cannot write {path!r}: {exc.strerror}") from None


def _load_spec(source: str) -> ModelSpec:
    if source in PRESETS:
        return PRESETS[source]()
    try:
        return ModelSpec.from_json(_read_bytes(source).decode("utf-8"))
    except (ValueError, TypeError) as exc:
        raise RuntimeError(f"invalid model spec {source!r}: {exc}") from None


def _load_grid(path: str, scale: imageio.ScaleMap | None) -> np.ndarray:
    data = _read_bytes(path)
    try:
        if data[:2] in (b"P5", b"P2"):
            img = imageio.pgm_read(data)
            return imageio.image_to_grid(img, scale or imageio.ScaleMap(0.0, 255.0))
        return imageio.grid_read(data)
    except ValueError as exc:
        raise RuntimeError(f"{path!r}: {exc}") from None


def _threads(n: int | None):
    if n is None:
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def cmd_simulate(args, stdout):
    spec = _load_spec(args.spec)
    spec = spec.with_noise(sigma=args.sigma, seed=args.seed)
    M, N = args.size
    y = synthesize(spec, M, N)
    _write(args.out, imageio.grid_write(y), stdout)
    if args.pgm:
        _write(args.pgm, imageio.pgm_write(imageio.grid_to_image(y)), stdout)


def cmd_estimate(args, stdout):
    y = _load_grid(args.input, args.scale)
    cfg = EstimatorConfig(p=args.p, method=args.method)
    fit = sequential_estimate(y, cfg)
    _write(args.out, json.dumps(fit.to_dict(), indent=2) + "\n", stdout)


def cmd_montecarlo(args, stdout):
    try:
        plan = McPlan.from_dict(json.loads(_read_bytes(args.plan).decode("utf-8")))
    except (ValueError, TypeError) as exc:
        raise RuntimeError(f"invalid plan {args.plan!r}: {exc}") from None
    if args.seed is not None:
        plan = McPlan(plan.spec, plan.sizes, plan.sigmas, plan.replications, args.seed, plan.estimator)
    report = run(plan, workers=args.threads or 1)
    _write(args.out, render(report, args.format), stdout)


def texture_table(truth, estimates, fmt: str = "markdown") -> str:
    """Side-by-side true and estimated parameters, one row per component."""
    rows = []
    for k, c in enumerate(estimates):
        t = truth[k].as_tuple() if k < len(truth) else (float("nan"),) * 6
        rows.append({"component": k + 1, "true": dict(zip(PARAMETERS, t)), "estimate": dict(zip(PARAMETERS, c.as_tuple()))})
    if fmt == "json":
        return json.dumps(rows, indent=2) + "\n"
    head = "| k | " + " | ".join(f"{p} | {p} est" for p in PARAMETERS) + " |"
    lines = [head, "|---|" + "---|---|" * len(PARAMETERS)]
    for r in rows:
        cells = " | ".join(f"{r['true'][p]:g} | {r['estimate'][p]:.4f}" for p in PARAMETERS)
        lines.append(f"| {r['component']} | {cells} |")
    return "\n".join(lines) + "\n"


def cmd_texture_demo(args, stdout):
    spec = texture_chirps().with_noise(sigma=args.sigma, seed=args.seed)
    M, N = args.size
    clean = synthesize(spec.with_noise(sigma=0.0), M, N)
    noisy = synthesize(spec, M, N)
    fit = sequential_estimate(noisy, EstimatorConfig(p=args.p or spec.p))
    scale = imageio.ScaleMap(float(clean.min()), float(clean.max()))
    out = args.out or "."
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise RuntimeError(f"cannot create {out!r}: {exc.strerror}") from None
    for name, g in (("original", clean), ("noisy", noisy), ("estimated", fit.fitted())):
        _write(os.path.join(out, f"{name}.pgm"), imageio.pgm_write(imageio.grid_to_image(g, scale)), stdout)
    table = texture_table(spec.components, [c.component for c in fit.components], args.format)
    _write(os.path.join(out, "estimates." + ("json" if args.format == "json" else "md")), table, stdout)
    stdout.write(table)
    stdout.write(f"residual variance {fit.sigma2_hat:.4f} (noise variance {args.sigma ** 2:g})\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="chirp2d", description="2-D chirp synthesis and estimation")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="synthesize a grid from a model spec")
    s.add_argument("spec", help="model spec JSON file or preset (single, two, texture)")
    s.add_argument("--size", type=_size, default=(25, 25), help="grid size MxN")
    s.add_argument("--sigma", type=_nonneg, default=0.0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="grid file to write (default stdout)")
    s.add_argument("--pgm", help="also write an auto-scaled PGM image here")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="fit p components to a grid or PGM file")
    e.add_argument("input", help="grid file or binary PGM")
    e.add_argument("--p", type=int, default=1)
    e.add_argument("--method", choices=("proposed", "periodogram"), default="proposed")
    e.add_argument("--scale", type=_scale, help="LO,HI pixel map for PGM input, default 0,255 (write --scale=LO,HI when LO is negative)")
    e.add_argument("--threads", type=int)
    e.add_argument("--out", help="JSON output path (default stdout)")
    e.set_defaults(func=cmd_estimate)

    m = sub.add_parser("montecarlo", help="run a simulation plan")
    m.add_argument("plan", help="plan JSON file")
    m.add_argument("--format", choices=("csv", "json", "markdown"), default="markdown")
    m.add_argument("--seed", type=int, help="override the plan's base seed")
    m.add_argument("--threads", type=int, help="worker processes")
    m.add_argument("--out")
    m.set_defaults(func=cmd_montecarlo)

    t = sub.add_parser("texture-demo", help="five-component texture: synthesize, fit, reconstruct")
    t.add_argument("--size", type=_size, default=(100, 100))
    t.add_argument("--sigma", type=_nonneg, default=10.0)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--p", type=int, help="components to fit (default 5)")
    t.add_argument("--format", choices=("markdown", "json"), default="markdown")
    t.add_argument("--threads", type=int)
    t.add_argument("--out", help="output directory (default .)")
    t.set_defaults(func=cmd_texture_demo)
    return p


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "p", None) is not None and args.p < 1:
            raise UsageError("--p must be at least 1")
        if getattr(args, "threads", None) is not None and args.threads < 1:
            raise UsageError("--threads must be at least 1")
    except UsageError as exc:
        stderr.write(f"{exc}\n")
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    threads = getattr(args, "threads", None)
    try:
        with _threads(threads if args.command != "montecarlo" else None):
            args.func(args, stdout)
    except (RuntimeError, ValueError, ArithmeticError) as exc:
        stderr.write(f"chirp2d {args.command}: {exc}\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
