"""Batch front-end: orchestrates experiment sweeps and persists artifacts.

Subcommands: ``phantom``, ``sinogram``, ``reconstruct``, ``probe``, ``sweep``,
each with ``--config`` and ``--out``; ``--seed`` overrides every config seed.
Exit codes: 0 success, 1 config error, 2 I/O error, 3 all runs diverged.

Everything written here is byte-deterministic given the config and seeds;
wall-clock timestamps go only to ``run.log``.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .config import ExperimentConfig, parse_config
from .data import (
    NoiseModel,
    add_poisson_noise,
    make_leaveout_split,
    make_phantom,
    noise_level,
    synthesize_clean,
    write_pgm,
)
from .denoise import DenoiserSpec, fixture_weights_path
from .diagnostics import continuity_probe
from .errors import ConfigError, DivergenceError
from .radon import build_parallel_radon, operator_norm_sq
from .unroll import UnrollConfig, run_unrolled

TRACE_HEADER = "step,iterate_norm,relative_norm,beta,direction_norm,leaveout_residual,psnr,ssim"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float) and not np.isfinite(value):
        return repr(value)  # inf / -inf / nan, parseable by float()
    return f"{value:.17g}"


def emit_trace(trace, path, diverged_at: int | None = None) -> None:
    """Write a trace CSV; a divergent run gets a footer naming the failing step."""
    rows = [TRACE_HEADER]
    for r in trace.records:
        rows.append(
            ",".join(
                [
                    str(r.step),
                    _fmt(r.iterate_norm),
                    _fmt(r.relative_norm),
                    _fmt(r.beta),
                    _fmt(r.direction_norm),
                    _fmt(r.leaveout_residual),
                    _fmt(r.psnr),
                    _fmt(r.ssim),
                ]
            )
        )
    if diverged_at is not None:
        rows.append(f"# diverged at step {diverged_at}")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(rows) + "\n")


def read_trace(path):
    """Parse a trace CSV back into a list of per-step dicts plus the divergence step."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != TRACE_HEADER:
        raise ValueError("not a trace CSV")
    diverged_at = None
    records = []
    names = TRACE_HEADER.split(",")
    for line in lines[1:]:
        if not line:
            continue
        if line.startswith("#"):
            if "diverged at step" in line:
                diverged_at = int(line.rsplit(" ", 1)[1])
            continue
        cells = line.split(",")
        rec = {}
        for name, cell in zip(names, cells):
            if cell == "":
                rec[name] = None
            elif name == "step":
                rec[name] = int(cell)
            else:
                rec[name] = float(cell)
        records.append(rec)
    return records, diverged_at


def emit_probe(report, path) -> None:
    rows = [f"# sigma={_fmt(report.sigma)} seed={report.seed}", "step,base_g,perturbed_g,paired_g"]
    for i in range(len(report.paired_g)):
        rows.append(
            f"{i + 1},{_fmt(float(report.base_g[i]))},"
            f"{_fmt(float(report.perturbed_g[i]))},{_fmt(float(report.paired_g[i]))}"
        )
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(rows) + "\n")


def write_svg_lines(series: dict, path, width: int = 640, height: int = 360) -> None:
    """Minimal line-chart SVG (log-free, linear axes) for quick trace inspection."""
    palette = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
    finite = [
        np.asarray(v, dtype=np.float64)
        for v in series.values()
        if len(v) and np.isfinite(v).any()
    ]
    lo = min((np.nanmin(v[np.isfinite(v)]) for v in finite), default=0.0)
    hi = max((np.nanmax(v[np.isfinite(v)]) for v in finite), default=1.0)
    if hi <= lo:
        hi = lo + 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    margin = 40
    for idx, (name, values) in enumerate(series.items()):
        values = np.asarray(values, dtype=np.float64)
        if len(values) == 0:
            continue
        xs = margin + (width - 2 * margin) * np.arange(len(values)) / max(len(values) - 1, 1)
        clipped = np.clip(values, lo, hi)
        ys = height - margin - (height - 2 * margin) * (clipped - lo) / (hi - lo)
        pts = " ".join(
            f"{x:.1f},{y:.1f}" for x, y, v in zip(xs, ys, values) if np.isfinite(v)
        )
        color = palette[idx % len(palette)]
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        parts.append(
            f'<text x="{margin}" y="{16 + 14 * idx}" fill="{color}" font-size="12">{name}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(parts) + "\n")


def make_denoiser_spec(text: str) -> DenoiserSpec:
    """Parse a denoiser config string like ``gain:1.5`` or ``conv_residual:w.dnwt``."""
    kind, _, arg = text.partition(":")
    if kind == "identity":
        return DenoiserSpec.identity()
    if kind == "gain":
        return DenoiserSpec.gain(float(arg) if arg else 1.0)
    if kind == "gaussian":
        return DenoiserSpec.gaussian(float(arg) if arg else 1.0)
    if kind == "median":
        return DenoiserSpec.median(int(arg) if arg else 3)
    if kind == "conv_residual":
        return DenoiserSpec.conv_residual(arg if arg else fixture_weights_path())
    raise ValueError(f"unknown denoiser {text!r}")


def _resolve_tau(tau, op) -> float:
    if tau == "auto":
        return 1.0 / operator_norm_sq(op, iterations=200, seed=0)
    return float(tau)


def _beta_label(mode) -> str:
    return mode if isinstance(mode, str) else f"{mode:g}"


class _Pipeline:
    """Operators, data, and splits shared across the sweep points of one config."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.phantom = make_phantom(
            config["phantom.kind"],
            config["geometry.n1"],
            config["geometry.n2"],
            config["phantom.seed"],
        )
        self._ops = {}

    def operator(self, views: int):
        if views not in self._ops:
            op = build_parallel_radon(
                self.config["geometry.n1"],
                self.config["geometry.n2"],
                self.config["geometry.m1"],
                views,
                self.config["geometry.angle_span"],
            )
            clean = synthesize_clean(op, self.phantom)
            split = make_leaveout_split(
                op.rows, self.config["scheme.leaveout_fraction"], self.config["scheme.seed"]
            )
            tau = _resolve_tau(self.config["scheme.tau"], op)
            self._ops[views] = (op, clean, split, tau)
        return self._ops[views]

    def noisy(self, views: int, intensity: float):
        op, clean, _, _ = self.operator(views)
        return add_poisson_noise(clean, NoiseModel(intensity, self.config["noise.seed"]))

    def unroll_config(self, inner_steps: int, beta_mode, tau: float) -> UnrollConfig:
        cfg = self.config
        return UnrollConfig(
            n_steps=cfg["scheme.n_steps"],
            inner_steps=inner_steps,
            tau=tau,
            denoiser=make_denoiser_spec(cfg["scheme.denoiser"]),
            structure=cfg["scheme.structure"],
            beta_mode=beta_mode,
            momentum=cfg["scheme.momentum"],
            nonneg=cfg["scheme.nonneg"],
            leaveout_fraction=cfg["scheme.leaveout_fraction"],
            seed=cfg["scheme.seed"],
        )


def _point_label(point) -> str:
    return (
        f"views{point['views']}_i0{point['intensity']:g}"
        f"_n0{point['inner_steps']}_beta{_beta_label(point['beta_mode'])}"
    )


def _run_point(pipeline: _Pipeline, point, out_dir, plot: bool, probe: bool):
    os.makedirs(out_dir, exist_ok=True)
    op, _, split, tau = pipeline.operator(point["views"])
    y_noisy = pipeline.noisy(point["views"], point["intensity"])
    run_cfg = pipeline.unroll_config(point["inner_steps"], point["beta_mode"], tau)
    row = dict(point)
    row["beta_mode"] = _beta_label(point["beta_mode"])
    try:
        final, s0_pick, trace = run_unrolled(
            run_cfg, op, y_noisy, split, ground_truth=pipeline.phantom
        )
    except DivergenceError as err:
        emit_trace(err.trace, os.path.join(out_dir, "trace.csv"), diverged_at=err.step)
        row.update(status="diverged", psnr=None, ssim=None, i_s0=None, r_n=None)
        return row
    emit_trace(trace, os.path.join(out_dir, "trace.csv"))
    write_pgm(final, os.path.join(out_dir, "final.pgm"))
    write_pgm(s0_pick, os.path.join(out_dir, "s0_pick.pgm"))
    last = trace.records[-1]
    row.update(
        status="ok",
        psnr=last.psnr,
        ssim=last.ssim,
        i_s0=trace.s0_index,
        r_n=last.relative_norm,
    )
    if probe:
        report = continuity_probe(run_cfg, op, y_noisy, split, seed=run_cfg.seed)
        emit_probe(report, os.path.join(out_dir, "probe.csv"))
    if plot:
        write_svg_lines(
            {"relative_norm": trace.column("relative_norm"), "beta": trace.column("beta")},
            os.path.join(out_dir, "trace.svg"),
        )
    return row


def run_experiment(config: ExperimentConfig, out_dir=None, jobs: int = 1, plot: bool = False):
    """Run every sweep point; returns (exit code, summary rows)."""
    out_root = out_dir or config["output.dir"]
    os.makedirs(out_root, exist_ok=True)
    started = time.strftime("%Y-%m-%d %H:%M:%S")
    pipeline = _Pipeline(config)
    write_pgm(pipeline.phantom, os.path.join(out_root, "phantom.pgm"))
    grid = config.sweep_grid()
    dirs = [os.path.join(out_root, _point_label(p)) for p in grid]
    probe = config["output.probe"]

    # build each distinct operator once, before any worker threads race for it
    for views in sorted({p["views"] for p in grid}):
        pipeline.operator(views)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(
                pool.map(lambda pd: _run_point(pipeline, pd[0], pd[1], plot, probe), zip(grid, dirs))
            )
    else:
        rows = [_run_point(pipeline, p, d, plot, probe) for p, d in zip(grid, dirs)]

    header = "views,intensity,inner_steps,beta_mode,status,psnr,ssim,i_s0,r_n"
    lines = [header]
    for row in rows:
        lines.append(
            ",".join(
                [
                    str(row["views"]),
                    _fmt(float(row["intensity"])),
                    str(row["inner_steps"]),
                    row["beta_mode"],
                    row["status"],
                    _fmt(row["psnr"]),
                    _fmt(row["ssim"]),
                    "" if row["i_s0"] is None else str(row["i_s0"]),
                    _fmt(row["r_n"]),
                ]
            )
        )
    with open(os.path.join(out_root, "summary.csv"), "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")
    with open(os.path.join(out_root, "run.log"), "a", encoding="ascii") as fh:
        fh.write(f"started {started} finished {time.strftime('%Y-%m-%d %H:%M:%S')} points {len(grid)}\n")
    if all(row["status"] == "diverged" for row in rows):
        return 3, rows
    return 0, rows


def _cmd_phantom(config, out_root, args):
    pipeline = _Pipeline(config)
    write_pgm(pipeline.phantom, os.path.join(out_root, "phantom.pgm"))
    return 0


def _cmd_sinogram(config, out_root, args):
    pipeline = _Pipeline(config)
    views = config["geometry.m2"]
    _, clean, _, _ = pipeline.operator(views)
    noisy = pipeline.noisy(views, config["noise.intensity"])
    write_pgm(clean, os.path.join(out_root, "sinogram_clean.pgm"))
    write_pgm(noisy, os.path.join(out_root, "sinogram_noisy.pgm"))
    print(f"noise level {noise_level(clean, noisy):.6g}")
    return 0


def _cmd_reconstruct(config, out_root, args):
    code, _ = run_experiment(config, out_dir=out_root, jobs=1, plot=args.plot)
    return code


def _cmd_probe(config, out_root, args):
    pipeline = _Pipeline(config)
    views = config["geometry.m2"]
    op, _, split, tau = pipeline.operator(views)
    noisy = pipeline.noisy(views, config["noise.intensity"])
    run_cfg = pipeline.unroll_config(config["scheme.inner_steps"], config["scheme.beta_mode"], tau)
    try:
        report = continuity_probe(run_cfg, op, noisy, split, seed=run_cfg.seed)
    except DivergenceError as err:
        print(f"probe diverged: {err}", file=sys.stderr)
        return 3
    emit_probe(report, os.path.join(out_root, "probe.csv"))
    return 0


def _cmd_sweep(config, out_root, args):
    code, _ = run_experiment(config, out_dir=out_root, jobs=args.jobs, plot=args.plot)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="unrollreg", description="Unrolled reconstruction experiment runner"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    handlers = {
        "phantom": _cmd_phantom,
        "sinogram": _cmd_sinogram,
        "reconstruct": _cmd_reconstruct,
        "probe": _cmd_probe,
        "sweep": _cmd_sweep,
    }
    for name in handlers:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config file")
        p.add_argument("--out", default=None, help="output directory (default: output.dir)")
        p.add_argument("--seed", type=int, default=None, help="override every config seed")
        if name in {"reconstruct", "sweep"}:
            p.add_argument("--plot", action="store_true", help="emit trace SVG charts")
        if name == "sweep":
            p.add_argument("--jobs", type=int, default=1, help="parallel sweep points")
    args = parser.parse_args(argv)

    try:
        config = parse_config(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"cannot read config: {err}", file=sys.stderr)
        return 2
    if args.seed is not None:
        for key in ("noise.seed", "phantom.seed", "scheme.seed"):
            config.values[key] = args.seed

    out_root = args.out or config["output.dir"]
    try:
        os.makedirs(out_root, exist_ok=True)
        return handlers[args.command](config, out_root, args)
    except OSError as err:
        print(f"I/O error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
