"""Command-line front end.

    twoaxis simulate --n 1000 --ts 0.004 --trials 1000 --seed 0 --out sim.csv
    twoaxis sweep    --n-list 16,32,64 --trials 1000 --seed 0 --out sweep.csv
    twoaxis husimi   --n 100 --ts 0.02 --phi 0.5 --out q.csv
    twoaxis curve    --n 1000 --ts 0.004 --out curve.csv
    twoaxis fit      sweep.csv --out fit.csv

Every output is UTF-8 CSV with '#' comment lines.  The first comment line is
the schema tag; ``# <kind>: col,col,...`` lines declare the columns of data
rows whose first field is ``<kind>``.  Each command also writes
``<out>.manifest.json`` listing every file written with its SHA-256 digest.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .metrology import ExperimentConfig, apply_channel, default_workers, run_experiment
from .optimize import (
    DEFAULT_N_LIST,
    fit_power_law,
    hl_reference,
    optimize_squeezing_time,
    sql_reference,
    sweep_point,
)
from .spin import expectation, grid_normalization, husimi_grid, variance
from .squeezing import SqueezingConfig, prepare, quantum_fisher_information

log = logging.getLogger("twoaxis")

SWEEP_FLOOR = 16
CURVE_POINTS = 720


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# file plumbing
# ---------------------------------------------------------------------------

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.17g}"


def row(kind: str, *values) -> str:
    return ",".join([kind, *(fmt(v) for v in values)])


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def header(schema: str, config: dict, columns: dict[str, list[str]]) -> list[str]:
    lines = [f"# schema: twoaxis-{schema}/1",
             f"# version: {__version__}",
             "# config: " + json.dumps(config, sort_keys=True)]
    lines += [f"# {kind}: " + ",".join(cols) for kind, cols in columns.items()]
    return lines


class Outputs:
    """Collects files for one command and writes the manifest last."""

    def __init__(self, command: str, config: dict, seed: int | None):
        self.command = command
        self.config = config
        self.seed = seed
        self.paths: list[Path] = []
        self.started = time.perf_counter()

    def write(self, path: Path, lines: list[str]) -> None:
        atomic_write(path, "\n".join(lines) + "\n")
        self.paths.append(Path(path))

    def finish(self, manifest_path: Path) -> None:
        manifest = {
            "command": self.command,
            "config": self.config,
            "master_seed": self.seed,
            "version": __version__,
            "duration_s": round(time.perf_counter() - self.started, 3),
            "outputs": [{"path": str(p), "sha256": sha256(p)} for p in self.paths],
        }
        atomic_write(manifest_path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def read_rows(path: Path) -> dict[str, list[list[str]]]:
    """Group the data rows of an output file by their record kind."""
    rows: dict[str, list[list[str]]] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        kind, *fields = line.split(",")
        rows.setdefault(kind, []).append(fields)
    return rows


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def resolve_ts(args, n_spins: int) -> float:
    if args.ts == "opt":
        t_s, _ = optimize_squeezing_time(n_spins, args.trials, args.seed, workers=args.workers)
        log.info("optimized t_s = %.6g for N = %d", t_s, n_spins)
        return t_s
    return float(args.ts)


def cmd_simulate(args) -> int:
    if args.n < 3:
        raise UsageError("--n must be >= 3")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    t_s = resolve_ts(args, args.n)
    cfg = ExperimentConfig(args.n, t_s, args.trials, args.seed)
    result, records = run_experiment(cfg, workers=args.workers)
    prepared = prepare(SqueezingConfig(args.n, t_s))
    config = {"n_spins": args.n, "t_s": t_s, "delta_adj": prepared.delta_adj,
              "trials": args.trials, "repetitions": cfg.repetitions, "seed": args.seed}
    lines = header("simulate", config, {
        "trial": ["index", "phi_true", "j_x", "j_z", "phi_est", "error", "degenerate"],
        "summary": ["delta_phi", "stderr", "degenerate_count", "trials", "sql", "hl"],
    })
    for i, r in enumerate(records):
        lines.append(row("trial", i, r.phi_true, r.j_x, r.j_z, r.phi_est, r.error, r.degenerate))
    lines.append(row("summary", result.delta_phi, result.stderr, result.degenerate_count,
                     result.trials_used, sql_reference(args.n), hl_reference(args.n)))
    out = Outputs("simulate", config, args.seed)
    out.write(args.out, lines)
    out.finish(manifest_path(args.out))
    print(f"N={args.n} t_s={t_s:.6g} delta_phi={result.delta_phi:.6g} "
          f"+- {result.stderr:.2g} degenerate={result.degenerate_count}")
    return 0


def _fit_rows(points: list[tuple[int, float, float]]) -> list[str]:
    lines = []
    if len(points) < 3:
        return lines
    for quantity, idx, decaying in (("delta_phi", 1, True), ("fisher", 2, False)):
        fit = fit_power_law([(p[0], p[idx]) for p in points], decaying=decaying)
        lines.append(row("fit", quantity, fit.prefactor, fit.stderr_prefactor, fit.exponent,
                         fit.stderr_exponent, fit.sample_count,
                         "a/N^b" if decaying else "a*N^b"))
    return lines


FIT_COLUMNS = ["quantity", "prefactor", "stderr_prefactor", "exponent", "stderr_exponent",
               "sample_count", "form"]


def cmd_sweep(args) -> int:
    n_list = args.n_list
    low = [n for n in n_list if n < SWEEP_FLOOR]
    if low:
        raise UsageError(f"sweep needs every N >= {SWEEP_FLOOR}; got {low}")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    config = {"n_list": list(n_list), "trials": args.trials, "seed": args.seed}
    lines = header("sweep", config, {
        "point": ["n_spins", "t_s", "scaled_time", "delta_phi", "stderr", "fisher",
                  "sql", "hl", "degenerate_count"],
        "failed": ["n_spins", "message"],
        "fit": FIT_COLUMNS,
    })
    done = []
    for n in n_list:
        try:
            p, _ = sweep_point(n, args.trials, args.seed, workers=args.workers)
        except Exception as exc:  # recorded and skipped
            log.error("N=%d failed: %s", n, exc)
            lines.append(row("failed", n, str(exc).replace(",", ";").replace("\n", " ")))
            continue
        log.info("N=%d t_s*N^(2/3)=%.3f delta_phi=%.5g F=%.5g",
                 n, p.scaled_time, p.delta_phi, p.fisher)
        lines.append(row("point", n, p.t_s, p.scaled_time, p.delta_phi, p.stderr, p.fisher,
                         sql_reference(n), hl_reference(n), p.degenerate_count))
        done.append((n, p.delta_phi, p.fisher))
    if not done:
        print("sweep: every N failed", file=sys.stderr)
        return 1
    lines += _fit_rows(done)
    out = Outputs("sweep", config, args.seed)
    out.write(args.out, lines)
    out.finish(manifest_path(args.out))
    for line in lines:
        if line.startswith("fit,"):
            print(line)
    return 0


def cmd_fit(args) -> int:
    rows = read_rows(args.sweep_file)
    points = [(int(r[0]), float(r[3]), float(r[5])) for r in rows.get("point", [])]
    if len(points) < 3:
        raise UsageError(f"{args.sweep_file}: need at least 3 sweep points, found {len(points)}")
    fit_lines = _fit_rows(points)
    if args.out is None:
        print("\n".join(fit_lines))
        return 0
    config = {"source": str(args.sweep_file), "source_sha256": sha256(Path(args.sweep_file))}
    lines = header("fit", config, {"fit": FIT_COLUMNS}) + fit_lines
    out = Outputs("fit", config, None)
    out.write(args.out, lines)
    out.finish(manifest_path(args.out))
    print("\n".join(fit_lines))
    return 0


def cmd_husimi(args) -> int:
    if args.n < 3:
        raise UsageError("--n must be >= 3")
    if args.theta_count < 2 or args.phi_count < 2:
        raise UsageError("--theta-count and --phi-count must be >= 2")
    t_s = resolve_ts(args, args.n)
    prepared = prepare(SqueezingConfig(args.n, t_s))
    state = apply_channel(prepared, args.phi % (2 * math.pi))
    grid = husimi_grid(state, args.theta_count, args.phi_count)
    theta_max, phi_max = grid.argmax()
    config = {"n_spins": args.n, "t_s": t_s, "phi": args.phi, "delta_adj": prepared.delta_adj,
              "theta_count": args.theta_count, "phi_count": args.phi_count}
    lines = header("husimi", config, {"row": ["theta", "P(theta, phi_k) for each phi_k"]})
    lines.append("# phi_k: " + ",".join(fmt(p) for p in grid.phi))
    lines.append(f"# normalization: {fmt(grid_normalization(grid))}")
    lines.append(f"# argmax: theta={fmt(theta_max)} phi={fmt(phi_max)}")
    for th, vals in zip(grid.theta, grid.values):
        lines.append(row("row", th, *vals))
    out = Outputs("husimi", config, None)
    out.write(args.out, lines)
    out.finish(manifest_path(args.out))
    print(f"max P at theta={theta_max:.4f} phi={phi_max:.4f}")
    return 0


def cmd_curve(args) -> int:
    if args.n < 3:
        raise UsageError("--n must be >= 3")
    t_s = resolve_ts(args, args.n)
    prepared = prepare(SqueezingConfig(args.n, t_s))
    state = prepared.state
    n = args.n
    config = {"n_spins": n, "t_s": t_s, "delta_adj": prepared.delta_adj,
              "fisher": quantum_fisher_information(prepared), "points": CURVE_POINTS}
    lines = header("curve", config, {"curve": ["varphi", "mean_over_n", "std_over_sqrt_n"]})
    for k in range(CURVE_POINTS):
        vp = 2 * math.pi * k / CURVE_POINTS
        lines.append(row("curve", vp, expectation(state, vp) / n,
                         math.sqrt(variance(state, vp)) / math.sqrt(n)))
    out = Outputs("curve", config, None)
    out.write(args.out, lines)
    out.finish(manifest_path(args.out))
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _n_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty --n-list")
    return values


def _ts(text: str):
    if text == "opt":
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--ts must be a number or 'opt', got {text!r}")
    if not (value >= 0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError("--ts must be finite and non-negative")
    return value


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("--seed must fit in 64 unsigned bits")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twoaxis", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True, trials=True):
        p.add_argument("--out", type=Path, required=True)
        p.add_argument("--workers", type=int, default=None,
                       help="threads for trial blocks (default: TWOAXIS_WORKERS or cores)")
        if trials:
            p.add_argument("--trials", type=int, default=1000)
        if seed:
            p.add_argument("--seed", type=_seed, default=0)

    p = sub.add_parser("simulate", help="Monte Carlo imprecision at one (N, t_s)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ts", type=_ts, required=True, help="squeezing time, or 'opt'")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="optimize t_s over a list of N and fit power laws")
    p.add_argument("--n-list", type=_n_list, default=list(DEFAULT_N_LIST))
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("husimi", help="Husimi quasiprobability on a (theta, phi) grid")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ts", type=_ts, default=0.0)
    p.add_argument("--phi", type=float, default=0.0, help="channel phase")
    p.add_argument("--theta-count", type=int, default=181)
    p.add_argument("--phi-count", type=int, default=360)
    common(p)
    p.set_defaults(func=cmd_husimi)

    p = sub.add_parser("curve", help="<J_varphi>/N and std/sqrt(N) over the x-z plane")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ts", type=_ts, default=0.0)
    common(p)
    p.set_defaults(func=cmd_curve)

    p = sub.add_parser("fit", help="refit the power laws of a sweep file")
    p.add_argument("sweep_file", type=Path)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "workers", None) is None and hasattr(args, "workers"):
        args.workers = default_workers()
    out = getattr(args, "out", None)
    if out is not None and not Path(out).parent.is_dir():
        parser.error(f"output directory does not exist: {Path(out).parent}")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except OSError as exc:
        print(f"twoaxis: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
