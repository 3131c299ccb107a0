"""Command-line entry point.

Subcommands: perturb (trace -> released trace), eval (metrics over perturbed
pairs), bench (per-fix latency), sweep (mechanism x epsilon x window grid),
synth (synthetic walks), serve (HTTP demo backend).

Exit codes: 0 success, 1 usage or validation failure, 2 runtime failure,
3 budget-exhausted truncation during perturb.
"""
from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .attack import build_attack_dataset, estimate_bayes_risk
from .geo import GeoPoint, PlanarPoint
from .ingest import (
    DEFAULT_CELLS_PER_SIDE,
    DEFAULT_REGION_SIDE_M,
    Grid,
    Region,
    Trace,
    load_trace_pairs,
    load_traces,
    synth_walk,
    write_traces,
)
from .metrics import bench_perturb, mne, sweep
from .objects import ObjectFieldConfig, catchable_split, generate_field
from .pipeline import MECHANISMS, MechanismConfig, perturb_points

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_EXHAUSTED = 3


class _UsageError(Exception):
    """Flag or config validation failure; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _csv_list(text: str) -> list[str]:
    items = [part.strip() for part in text.split(",") if part.strip()]
    if not items:
        raise argparse.ArgumentTypeError("expected a comma-separated list")
    return items


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in _csv_list(text)]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in _csv_list(text)]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _latlon(text: str) -> GeoPoint:
    try:
        lat, lon = (float(v) for v in text.split(","))
        return GeoPoint(lat, lon)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected LAT,LON: {exc}")


def _add_region_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--region-side", type=float, default=DEFAULT_REGION_SIDE_M, help="region side in meters")
    p.add_argument("--region-center", type=_latlon, default=None, help="region center as LAT,LON")
    p.add_argument("--grid-cells", type=int, default=DEFAULT_CELLS_PER_SIDE, help="grid cells per side")


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="RNG seed; omit for entropy")
    p.add_argument("--config", type=str, default=None, help="flat key=value config file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="locpriv", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("perturb", help="perturb a trace CSV with one mechanism")
    p.add_argument("--input", required=True, help="CSV with user_id,timestamp,lat,lon")
    p.add_argument("--output", required=True, help="CSV with released_lat,released_lon appended")
    p.add_argument("--mechanism", choices=MECHANISMS, required=True)
    p.add_argument("--epsilon", type=float, required=True, help="per-release budget (1/m)")
    p.add_argument("--epsilon-total", type=float, default=None, help="session budget (trpsm)")
    p.add_argument("--delta", type=float, default=5.0, help="reuse threshold in meters (trpsm)")
    _add_common_flags(p)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("eval", help="compute metrics over a perturbed pairs CSV")
    p.add_argument("--input", required=True, help="CSV from perturb (with released columns)")
    p.add_argument("--output", required=True, help="directory for metric CSVs")
    p.add_argument("--metrics", type=_csv_list, default=["mne"], help="comma list of mne,bayes,catchable")
    p.add_argument("--window-len", type=_int_list, default=[1], help="comma list of window lengths")
    p.add_argument("--mechanism", default="unknown", help="label column for output rows")
    p.add_argument("--epsilon", type=float, default=float("nan"), help="label column for output rows")
    p.add_argument("--density", choices=("sparse", "dense"), default="sparse")
    _add_region_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="benchmark per-fix perturbation latency")
    p.add_argument("--mechanisms", type=_csv_list, default=list(MECHANISMS))
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--warmup", type=int, default=1000)
    p.add_argument("--output", default=None, help="optional CSV path")
    _add_common_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="evaluate mechanisms across epsilons and window lengths")
    p.add_argument("--mechanisms", type=_csv_list, default=["plm", "psm"])
    p.add_argument("--epsilons", type=_float_list, default=[0.1, 0.5, 1.0, 2.0])
    p.add_argument("--window-lens", type=_int_list, default=[1])
    p.add_argument("--kind", choices=("stationary", "line", "random_walk"), default="random_walk")
    p.add_argument("--step", type=float, default=8.0, help="walk step in meters")
    p.add_argument("--count", type=int, default=2000, help="fixes per synthetic trace")
    p.add_argument("--n-traces", type=int, default=5)
    p.add_argument("--delta", type=float, default=5.0)
    p.add_argument("--epsilon-total", type=float, default=None, help="session budget (trpsm); default auto-sized")
    p.add_argument("--jobs", type=int, default=None, help="parallel cells; default one thread per core")
    p.add_argument("--output", required=True, help="results CSV path")
    _add_region_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth", help="generate synthetic walk traces")
    p.add_argument("--kind", choices=("stationary", "line", "random_walk"), required=True)
    p.add_argument("--step", type=float, default=8.0)
    p.add_argument("--count", type=int, required=True, help="fixes per trace")
    p.add_argument("--n-traces", type=int, default=1)
    p.add_argument("--interval", type=float, default=1.0, help="seconds between fixes")
    p.add_argument("--output", required=True)
    _add_region_flags(p)
    _add_common_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("serve", help="run the HTTP demo backend")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8470)
    p.add_argument("--density", choices=("sparse", "dense"), default="sparse")
    p.add_argument("--field-radius", type=float, default=150.0)
    p.add_argument("--session-ttl", type=float, default=600.0)
    p.add_argument("--snapshot-path", default=None)
    _add_common_flags(p)
    p.set_defaults(func=cmd_serve)

    return parser


def _config_flags(path: str) -> list[str]:
    """Translate a flat key=value file into injectable command-line flags."""
    flags = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise _UsageError(f"cannot read config file: {exc}")
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("_", "-")
        if not sep or not key:
            raise _UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
        if key == "config":
            raise _UsageError(f"{path}:{lineno}: config files cannot nest")
        flags += [f"--{key}", value.strip()]
    return flags


def _rng_children(seed, n: int) -> list[np.random.Generator]:
    seq = np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in seq.spawn(n)]


def _region(args, default_center: GeoPoint | None = None) -> Region:
    center = args.region_center or default_center
    if center is None:
        return Region(side=args.region_side)
    return Region(center=center, side=args.region_side)


def cmd_perturb(args) -> int:
    if args.mechanism == "trpsm" and args.epsilon_total is None:
        raise _UsageError("locpriv perturb: error: trpsm requires --epsilon-total")
    cfg = MechanismConfig(
        args.mechanism, args.epsilon, epsilon_total=args.epsilon_total, delta=args.delta
    )
    traces, report = load_traces(args.input)
    rngs = _rng_children(args.seed, len(traces))
    out_traces, out_released = [], []
    exhausted_users = []
    for trace, rng in zip(traces, rngs):
        result = perturb_points(trace.planar(), cfg, rng)
        m = result.released.shape[0]
        if result.exhausted:
            exhausted_users.append(trace.user)
            trace = Trace(trace.fixes[:m], trace.projection)
        out_traces.append(trace)
        out_released.append(result.released)
    write_traces(args.output, out_traces, out_released)
    print(f"perturbed {sum(len(t) for t in out_traces)} fixes from {len(traces)} trace(s) -> {args.output}")
    if exhausted_users:
        print(
            f"warning: session budget exhausted; truncated trace(s) for user(s): "
            f"{', '.join(exhausted_users)}",
            file=sys.stderr,
        )
        return EXIT_EXHAUSTED
    return EXIT_OK


def cmd_eval(args) -> int:
    known = {"mne", "bayes", "catchable"}
    unknown = set(args.metrics) - known
    if unknown:
        raise _UsageError(f"locpriv eval: error: unknown metrics {sorted(unknown)}")
    pairs = load_trace_pairs(args.input)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    seed_label = args.seed if args.seed is not None else ""

    if "mne" in args.metrics:
        result = mne([(t, r) for t, r in pairs])
        path = out_dir / "mne.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mechanism", "epsilon", "mne", "n_traces", "seed"])
            w.writerow([args.mechanism, args.epsilon, f"{result.mne:.6f}", result.n_traces, seed_label])
        print(f"mne {result.mne:.3f} m over {result.n_traces} trace(s) -> {path}")

    if "bayes" in args.metrics:
        center = args.region_center or pairs[0][0].projection.origin
        grid = Grid(Region(center=center, side=args.region_side), args.grid_cells)
        path = out_dir / "bayes.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mechanism", "epsilon", "window_len", "bayes_risk", "n_eval", "seed"])
            for window_len in args.window_len:
                dataset = build_attack_dataset(pairs, grid, window_len)
                est = estimate_bayes_risk(dataset, rng)
                w.writerow(
                    [args.mechanism, args.epsilon, window_len, f"{est.bayes_risk:.6f}", est.n_eval, seed_label]
                )
                print(f"bayes risk {est.bayes_risk:.3f} at window_len {window_len} -> {path}")

    if "catchable" in args.metrics:
        field_cfg = ObjectFieldConfig.for_density(args.density)
        per_step = []
        fractions = []
        for trace, released in pairs:
            true_points = trace.planar()
            for xy_true, xy_rel in zip(true_points, released):
                x = PlanarPoint(float(xy_true[0]), float(xy_true[1]))
                z = PlanarPoint(float(xy_rel[0]), float(xy_rel[1]))
                objs = generate_field(z, field_cfg, rng)
                n_true, n_inter = catchable_split(x, z, objs, field_cfg)
                per_step.append((n_true, n_inter))
                if n_true > 0:
                    fractions.append(100.0 * n_inter / n_true)
        loss = sum(v - i for v, i in per_step)
        mean_pct = float(np.mean(fractions)) if fractions else float("nan")
        path = out_dir / "catchable.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["mechanism", "epsilon", "density", "mean_catchable_pct", "accumulated_loss", "n_steps", "seed"]
            )
            w.writerow(
                [args.mechanism, args.epsilon, args.density, f"{mean_pct:.4f}", loss, len(per_step), seed_label]
            )
        print(f"catchable {mean_pct:.1f}% mean, loss {loss} over {len(per_step)} steps -> {path}")

    return EXIT_OK


def cmd_bench(args) -> int:
    unknown = set(args.mechanisms) - set(MECHANISMS)
    if unknown:
        raise _UsageError(f"locpriv bench: error: unknown mechanisms {sorted(unknown)}")
    rows = []
    rngs = _rng_children(args.seed, len(args.mechanisms))
    for mech, rng in zip(args.mechanisms, rngs):
        cfg = MechanismConfig(mech, args.epsilon)
        report = bench_perturb(cfg, n=args.n, warmup=args.warmup, rng=rng)
        rows.append(report)
        print(
            f"{mech}: mean {report.mean_ms:.4f} ms, p50 {report.p50_ms:.4f}, "
            f"p95 {report.p95_ms:.4f}, p99 {report.p99_ms:.4f} (n={report.n})"
        )
    if args.output:
        with open(args.output, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mechanism", "epsilon", "n", "mean_ms", "p50_ms", "p95_ms", "p99_ms"])
            for r in rows:
                w.writerow(
                    [r.mechanism, args.epsilon, r.n, f"{r.mean_ms:.6f}", f"{r.p50_ms:.6f}", f"{r.p95_ms:.6f}", f"{r.p99_ms:.6f}"]
                )
    return EXIT_OK


def cmd_sweep(args) -> int:
    unknown = set(args.mechanisms) - set(MECHANISMS)
    if unknown:
        raise _UsageError(f"locpriv sweep: error: unknown mechanisms {sorted(unknown)}")
    region = _region(args)
    grid = Grid(region, args.grid_cells)
    trace_rngs = _rng_children(args.seed, args.n_traces)
    traces = [
        synth_walk(args.kind, args.step, args.count, rng, region, user=f"synth-{i:03d}")
        for i, rng in enumerate(trace_rngs)
    ]
    seed = args.seed if args.seed is not None else int(np.random.SeedSequence().generate_state(1)[0])
    rows = sweep(
        args.mechanisms,
        args.epsilons,
        traces,
        args.window_lens,
        grid,
        seed=seed,
        jobs=args.jobs,
        delta=args.delta,
        epsilon_total=args.epsilon_total,
    )
    with open(args.output, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mechanism", "epsilon", "window_len", "mne", "bayes_risk", "n_eval", "seed"])
        for r in rows:
            w.writerow(
                [
                    r.mechanism,
                    r.epsilon,
                    "" if r.window_len is None else r.window_len,
                    f"{r.mne:.6f}",
                    "" if r.bayes_risk is None else f"{r.bayes_risk:.6f}",
                    "" if r.n_eval is None else r.n_eval,
                    r.seed,
                ]
            )
    print(f"swept {len(rows)} cell(s) -> {args.output}")
    return EXIT_OK


def cmd_synth(args) -> int:
    region = _region(args)
    rngs = _rng_children(args.seed, args.n_traces)
    traces = [
        synth_walk(
            args.kind, args.step, args.count, rng, region, dt=args.interval, user=f"synth-{i:03d}"
        )
        for i, rng in enumerate(rngs)
    ]
    write_traces(args.output, traces)
    print(f"wrote {args.n_traces} trace(s) x {args.count} fixes -> {args.output}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceSettings, create_app

    settings = ServiceSettings(
        default_density=args.density,
        field_radius=args.field_radius,
        session_ttl=args.session_ttl,
        snapshot_path=args.snapshot_path,
    )
    app = create_app(settings)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def _extract_config(argv: list[str]) -> str | None:
    """Prescan for --config so a config file can supply required flags."""
    for i, tok in enumerate(argv):
        if tok == "--config":
            if i + 1 >= len(argv):
                raise _UsageError("locpriv: error: --config requires a path")
            return argv[i + 1]
        if tok.startswith("--config="):
            return tok.partition("=")[2]
    return None


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        config = _extract_config(argv)
        if config is not None and argv:
            # Inject config-derived flags right after the subcommand;
            # explicit flags come later and therefore win.
            argv = [argv[0], *_config_flags(config), *argv[1:]]
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except KeyboardInterrupt:
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
