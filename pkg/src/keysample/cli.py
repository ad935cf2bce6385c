"""Command-line entry point: sample / evaluate / terms / synth / bench.

Configuration precedence is CLI flag > `key = value` config file > built-in
default; the resolved values are frozen into a manifest written alongside
every output. Exit codes: 2 bad arguments, 3 I/O failure, 4 data
validation failure.

All randomness flows from --seed. Outputs are written atomically and are
byte-identical across runs with identical inputs (manifests differ only in
their timing fields).
"""
from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time

import numpy as np

from . import __version__
from .core import Session, ValidationError
from .dataset_io import (
    SyntheticSessionSpec,
    atomic_write_text,
    generate_synthetic_session,
    read_kitti_poses,
    read_tum_poses,
    write_kitti_poses,
    write_results,
    write_svg_plot,
)
from .descriptors import SyntheticFieldConfig, load_descriptors, save_descriptors
from .evaluation import EvalConfig, evaluate_gpr, evaluate_lcd, query_benchmark
from .optimizer import WindowConfig, run as run_optimizer
from .samplers import make_sampler
from .terms import ObjectiveParams, preservation, redundancy

EXIT_BAD_ARGS = 2
EXIT_IO = 3
EXIT_DATA = 4


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValidationError(
                    f"{path}:{lineno}: expected 'key = value'"
                )
            key, _, value = line.partition("=")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _resolve(args, defaults: dict):
    """CLI flag > config file > default; returns the resolved mapping."""
    file_cfg = {}
    if getattr(args, "config", None):
        file_cfg = _read_config_file(args.config)
    resolved = {}
    for key, default in defaults.items():
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            resolved[key] = cli_value
        elif key in file_cfg:
            caster = type(default) if default is not None else str
            resolved[key] = caster(file_cfg[key])
        else:
            resolved[key] = default
    return resolved


def _write_manifest(out_dir, command, resolved, inputs, seed, t0):
    lines = [
        f"command = {command}",
        f"tool_version = {__version__}",
        f"seed = {seed}",
    ]
    for key in sorted(resolved):
        lines.append(f"{key} = {resolved[key]}")
    for path in sorted(inputs):
        lines.append(f"input.{os.path.basename(path)} = {_sha256(path)}")
    lines.append(f"wall_time_s = {time.perf_counter() - t0:.3f}")
    atomic_write_text(os.path.join(out_dir, "manifest.txt"), "\n".join(lines) + "\n")


def _load_session(poses_path, pose_format, descriptors_path, scans_dir=None):
    if pose_format == "tum":
        poses = [p for _, p in read_tum_poses(poses_path)]
    else:
        poses = read_kitti_poses(poses_path)
    descriptors = None
    if descriptors_path:
        descriptors = load_descriptors(descriptors_path, len(poses))
    scan_paths = None
    if scans_dir:
        scan_paths = sorted(
            os.path.join(scans_dir, f)
            for f in os.listdir(scans_dir)
            if f.endswith(".bin")
        )
        if len(scan_paths) != len(poses):
            raise ValidationError(
                f"{scans_dir}: {len(scan_paths)} scans but {len(poses)} poses"
            )
    return Session(poses=poses, descriptors=descriptors, scan_paths=scan_paths)


def _read_ids(path) -> list[int]:
    ids = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                ids.append(int(line))
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from exc
    return ids


SAMPLE_DEFAULTS = dict(
    method="optimized",
    interval=1.0,
    alpha=1.0,
    beta=1.0,
    window=10,
    dl=1.0,
    du=5.0,
    entropy_threshold=0.05,
    entropy_bins=64,
)


def cmd_sample(args) -> int:
    t0 = time.perf_counter()
    cfg = _resolve(args, SAMPLE_DEFAULTS)
    session = _load_session(
        args.poses, args.pose_format, args.descriptors, args.scans
    )
    method = cfg["method"]
    if method == "constant":
        sampler = make_sampler("constant", interval=cfg["interval"])
    elif method == "optimized":
        sampler = make_sampler(
            "optimized",
            config=WindowConfig(
                window_size=int(cfg["window"]),
                delta_lower=cfg["dl"],
                delta_upper=cfg["du"],
                params=ObjectiveParams(cfg["alpha"], cfg["beta"]),
            ),
        )
    elif method == "entropy":
        sampler = make_sampler(
            "entropy",
            threshold=cfg["entropy_threshold"],
            bins=int(cfg["entropy_bins"]),
        )
    else:
        sampler = make_sampler(method)
    sampler.fit(session)

    os.makedirs(args.out, exist_ok=True)
    ids_text = "".join(f"{i}\n" for i in sampler.selected_ids_)
    atomic_write_text(os.path.join(args.out, "ids.txt"), ids_text)
    diag = sampler.per_frame_state_ or {}
    diag_lines = ["key,value"] + [
        f"{k},{diag[k]:.12g}" for k in sorted(diag)
    ]
    atomic_write_text(
        os.path.join(args.out, "diagnostics.csv"), "\n".join(diag_lines) + "\n"
    )
    inputs = [p for p in (args.poses, args.descriptors) if p]
    _write_manifest(args.out, "sample", cfg, inputs, args.seed, t0)
    return 0


EVAL_DEFAULTS = dict(task="gpr", tp_radius=5.0, k=25, exclusion=100, thresholds=200)


def cmd_evaluate(args) -> int:
    t0 = time.perf_counter()
    cfg = _resolve(args, EVAL_DEFAULTS)
    econf = EvalConfig(
        tp_radius=cfg["tp_radius"],
        lcd_k=int(cfg["k"]),
        lcd_exclusion_frames=int(cfg["exclusion"]),
        thresholds=int(cfg["thresholds"]),
    )
    inputs = []
    if cfg["task"] == "gpr":
        map_session = _load_session(
            args.map_poses, args.pose_format, args.map_descriptors
        )
        query_session = _load_session(
            args.query_poses, args.pose_format, args.query_descriptors
        )
        keyframes = map_session.keyframes()
        total = map_session.frame_count
        if args.map_ids:
            ids = _read_ids(args.map_ids)
            keyframes = [keyframes[i] for i in ids]
            inputs.append(args.map_ids)
        report = evaluate_gpr(
            keyframes, query_session, econf, total_map_frames=total
        )
        inputs += [
            args.map_poses,
            args.map_descriptors,
            args.query_poses,
            args.query_descriptors,
        ]
    else:
        session = _load_session(args.poses, args.pose_format, args.descriptors)
        ids = _read_ids(args.ids)
        report = evaluate_lcd(session, ids, econf)
        inputs += [args.poses, args.descriptors, args.ids]

    os.makedirs(args.out, exist_ok=True)
    write_results(report, args.out)
    write_svg_plot(report.pr_points, os.path.join(args.out, "pr.svg"))
    _write_manifest(args.out, "evaluate", cfg, inputs, args.seed, t0)
    return 0


def sliding_window_preservation(keyframes, window: int = 10) -> float:
    """Preservation averaged over sliding `window`-keyframe spans."""
    n = len(keyframes)
    if n < 2:
        raise ValidationError("need at least two keyframes")
    if n <= window:
        return preservation(keyframes)
    values = [
        preservation(keyframes[i : i + window])
        for i in range(n - window + 1)
    ]
    return float(np.mean(values))


def cmd_terms(args) -> int:
    session = _load_session(args.poses, args.pose_format, args.descriptors)
    keyframes = session.keyframes()
    if args.ids:
        ids = _read_ids(args.ids)
        keyframes = [keyframes[i] for i in ids]
    rho = redundancy(keyframes)
    pi = sliding_window_preservation(keyframes, window=10)
    print(f"redundancy = {rho:.6f}")
    print(f"preservation = {pi:.6f}")
    return 0


SYNTH_DEFAULTS = dict(
    shape="loop",
    length=100.0,
    spacing=0.5,
    laps=2,
    dim=64,
    noise=0.0,
    pose_noise=0.0,
)


def cmd_synth(args) -> int:
    t0 = time.perf_counter()
    cfg = _resolve(args, SYNTH_DEFAULTS)
    spec = SyntheticSessionSpec(
        shape=cfg["shape"],
        length=cfg["length"],
        frame_spacing=cfg["spacing"],
        revisit_laps=int(cfg["laps"]),
        descriptor=SyntheticFieldConfig(
            dimension=int(cfg["dim"]),
            seed=args.seed,
            noise_sigma=cfg["noise"],
        ),
        pose_noise_sigma=cfg["pose_noise"],
        seed=args.seed,
    )
    session = generate_synthetic_session(spec)
    os.makedirs(args.out, exist_ok=True)
    write_kitti_poses(os.path.join(args.out, "poses.txt"), session.poses)
    save_descriptors(
        os.path.join(args.out, "descriptors.kdsc"), session.descriptors
    )
    _write_manifest(args.out, "synth", cfg, [], args.seed, t0)
    print(f"wrote {session.frame_count} frames to {args.out}")
    return 0


BENCH_DEFAULTS = dict(
    window=10, alpha=1.0, beta=1.0, dl=1.0, du=5.0, frames=300, spacing=2.0
)


def cmd_bench(args) -> int:
    cfg = _resolve(args, BENCH_DEFAULTS)
    spec = SyntheticSessionSpec(
        shape="loop",
        length=cfg["frames"] * cfg["spacing"],
        frame_spacing=cfg["spacing"],
        revisit_laps=1,
        descriptor=SyntheticFieldConfig(dimension=64, seed=args.seed),
        seed=args.seed,
    )
    session = generate_synthetic_session(spec)
    config = WindowConfig(
        window_size=int(cfg["window"]),
        delta_lower=cfg["dl"],
        delta_upper=cfg["du"],
        params=ObjectiveParams(cfg["alpha"], cfg["beta"]),
    )
    state = run_optimizer(session.keyframes(), config)
    times_ms = [t * 1e3 for t in state.cycle_times]
    if times_ms:
        print(
            f"window optimization ms (min/avg/max): "
            f"{min(times_ms):.2f} / {sum(times_ms) / len(times_ms):.2f} / "
            f"{max(times_ms):.2f} over {len(times_ms)} windows"
        )
    kept = state.store.keyframes
    bench = query_benchmark(kept, session.descriptors)
    print(
        f"query sweep: {bench.comparisons} comparisons "
        f"({bench.query_size} queries x {bench.map_size} map) in "
        f"{bench.seconds:.4f} s"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="keysample",
        description="Keyframe sampling and retrieval evaluation toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config", help="plain 'key = value' config file")
        p.add_argument(
            "--pose-format", choices=("kitti", "tum"), default="kitti"
        )

    p = sub.add_parser("sample", help="run a keyframe sampler over a session")
    add_common(p)
    p.add_argument("--poses", required=True)
    p.add_argument("--descriptors")
    p.add_argument("--scans")
    p.add_argument(
        "--method",
        choices=("all", "constant", "spaciousness", "entropy", "optimized"),
    )
    p.add_argument("--interval", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--window", type=int)
    p.add_argument("--dl", type=float)
    p.add_argument("--du", type=float)
    p.add_argument("--entropy-threshold", type=float, dest="entropy_threshold")
    p.add_argument("--entropy-bins", type=int, dest="entropy_bins")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("evaluate", help="score retrieval for a sampled map")
    add_common(p)
    p.add_argument("--task", choices=("gpr", "lcd"))
    p.add_argument("--map-poses")
    p.add_argument("--map-descriptors")
    p.add_argument("--map-ids")
    p.add_argument("--query-poses")
    p.add_argument("--query-descriptors")
    p.add_argument("--poses")
    p.add_argument("--descriptors")
    p.add_argument("--ids")
    p.add_argument("--tp-radius", type=float, dest="tp_radius")
    p.add_argument("--k", type=int)
    p.add_argument("--exclusion", type=int)
    p.add_argument("--thresholds", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser(
        "terms", help="print redundancy / preservation for a keyframe set"
    )
    add_common(p)
    p.add_argument("--poses", required=True)
    p.add_argument("--descriptors", required=True)
    p.add_argument("--ids")
    p.set_defaults(func=cmd_terms)

    p = sub.add_parser("synth", help="generate a synthetic session on disk")
    add_common(p)
    p.add_argument("--shape", choices=("loop", "figure_eight", "line"))
    p.add_argument("--length", type=float)
    p.add_argument("--spacing", type=float)
    p.add_argument("--laps", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--noise", type=float)
    p.add_argument("--pose-noise", type=float, dest="pose_noise")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="time window optimization and querying")
    add_common(p)
    p.add_argument("--window", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--dl", type=float)
    p.add_argument("--du", type=float)
    p.add_argument("--frames", type=int)
    p.add_argument("--spacing", type=float)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
