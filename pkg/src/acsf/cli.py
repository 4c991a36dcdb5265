"""Command-line entry point: ``acsf {evolve,classify,invariance,arrival,ndcheck}``.

Each command reads an optional YAML config, runs the matching experiment and
writes its CSV/JSON/SVG outputs into ``--out``.  Outputs are staged in a
temporary sibling directory and moved into place only after the command has
finished, so a failing run leaves nothing behind.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 IO failure.
"""

import argparse
import csv
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from . import experiments, plotting
from .arrival import write_field
from .curve import area, boundary_points
from .errors import ACSFError, InvalidInputError, LostConvexityError
from .flow import evolve, summary_rows, write_jsonl
from .invariants import ratio_series

log = logging.getLogger("acsf")

COMMANDS = ("evolve", "classify", "invariance", "arrival", "ndcheck")
EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

# per-command defaults that differ from the dataclass defaults
COMMAND_DEFAULTS = {
    "arrival": {"snapshot_fraction": 0.0025, "area_floor": 0.01},
    "invariance": {"curve": {"kind": "fourier", "modes": [[3, 0.1]]}},
    "classify": {"curve": {"kind": "fourier", "modes": [[3, 0.1]]}},
    "ndcheck": {"n": 128},
}


@dataclass
class ExperimentConfig:
    """Validated parameters for one CLI command.

    ``area_floor`` is relative to the initial area.  ``grid_nodes`` is the
    number of arrival-grid nodes per axis.  ``matrix`` may be the string
    ``"random"`` to draw a unimodular matrix from ``seed``.
    """

    command: str
    curve: dict = field(default_factory=lambda: {"kind": "circle", "radius": 1.0})
    n: int = 256
    safety: float = 0.2
    area_floor: float = 1e-4
    target_time: float = None
    snapshot_fraction: float = 0.01
    frame_stride: int = 10
    schedule_base: float = 4.0
    schedule_k_max: int = 6
    mvee_tol: float = 1e-6
    matrix: object = field(default_factory=lambda: [[1.0, 1.0], [0.0, 1.0]])
    t_end: float = 0.3
    scale_lambda: float = 16.0
    grid_nodes: int = 256
    grid_margin: float = 0.05
    h0: float = None
    r_min: float = None
    r_max: float = None
    n_max: int = 5
    lambdas: list = field(default_factory=lambda: [0.25, 1.0, 4.0, 16.0])
    seed: int = 0

    @classmethod
    def build(cls, command, data=None, base_dir=".", **overrides):
        data = dict(data or {})
        unknown = set(data) - {f.name for f in fields(cls)} - {"command"}
        if unknown:
            raise InvalidInputError(f"unknown config keys: {sorted(unknown)}")
        data.pop("command", None)
        merged = {**COMMAND_DEFAULTS.get(command, {}), **data}
        merged.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls(command=command, **merged)
        cfg._validate(Path(base_dir))
        return cfg

    def _validate(self, base_dir):
        def check(name, ok, what):
            if not ok:
                raise InvalidInputError(f"{name} = {getattr(self, name)!r}: {what}")

        def num(name):
            v = getattr(self, name)
            if isinstance(v, str):
                # YAML 1.1 reads exponents without a dot, such as 1e-4, as strings
                try:
                    v = float(v)
                except ValueError:
                    raise InvalidInputError(f"{name} must be a number, got {v!r}") from None
                setattr(self, name, v)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise InvalidInputError(f"{name} must be a number, got {v!r}")
            return v

        def integer(name):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int):
                raise InvalidInputError(f"{name} must be an integer, got {v!r}")
            return v

        check("command", self.command in COMMANDS, f"expected one of {COMMANDS}")
        check("n", 16 <= integer("n") <= 8192, "must lie in [16, 8192]")
        check("safety", 0 < num("safety") <= 1, "must lie in (0, 1]")
        check("area_floor", 0 < num("area_floor") < 1, "must lie in (0, 1) as a fraction of the initial area")
        if self.target_time is not None:
            check("target_time", num("target_time") > 0, "must be positive")
        check("snapshot_fraction", 0 < num("snapshot_fraction") < 1, "must lie in (0, 1)")
        check("frame_stride", integer("frame_stride") >= 1, "must be at least 1")
        check("schedule_base", num("schedule_base") > 1, "must exceed 1")
        check("schedule_k_max", 1 <= integer("schedule_k_max") <= 12, "must lie in [1, 12]")
        check("mvee_tol", 0 < num("mvee_tol") <= 1e-2, "must lie in (0, 1e-2]")
        check("t_end", num("t_end") > 0, "must be positive")
        check("scale_lambda", num("scale_lambda") > 0, "must be positive")
        check("grid_nodes", 3 <= integer("grid_nodes") <= 4096, "must lie in [3, 4096]")
        check("grid_margin", 0 <= num("grid_margin") <= 1, "must lie in [0, 1]")
        for name in ("h0", "r_min", "r_max"):
            if getattr(self, name) is not None:
                check(name, num(name) >= 0, "must be non-negative")
        check("n_max", 1 <= integer("n_max") <= 8, "must lie in [1, 8]")
        check("lambdas", isinstance(self.lambdas, list) and len(self.lambdas) > 0
              and all(isinstance(v, (int, float)) and v > 0 for v in self.lambdas), "must be a list of positive numbers")
        check("seed", integer("seed") >= 0, "must be non-negative")
        if isinstance(self.matrix, str):
            check("matrix", self.matrix == "random", "must be a 2x2 list or 'random'")
        else:
            try:
                check("matrix", np.asarray(self.matrix, dtype=float).shape == (2, 2), "must be 2x2")
            except (TypeError, ValueError):
                raise InvalidInputError(f"matrix = {self.matrix!r}: must be 2x2 numbers") from None
        if not isinstance(self.curve, dict) or "kind" not in self.curve:
            raise InvalidInputError("curve must be a mapping with a 'kind' key")
        if self.curve.get("kind") == "polygon" and "path" in self.curve:
            path = Path(self.curve["path"])
            path = path if path.is_absolute() else base_dir / path
            if not path.is_file():
                raise InvalidInputError(f"polygon file {path} does not exist")
            self.curve = {**self.curve, "path": str(path)}

    def digest(self):
        """Short hash of the resolved parameters, stored in every report."""
        text = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def load_config(command, path=None, **overrides):
    data, base_dir = {}, "."
    if path is not None:
        with open(path) as fh:
            try:
                data = yaml.safe_load(fh) or {}
            except yaml.YAMLError as exc:
                raise InvalidInputError(f"{path}: malformed config ({exc})") from None
        if not isinstance(data, dict):
            raise InvalidInputError(f"{path}: config must be a mapping")
        base_dir = Path(path).parent
    return ExperimentConfig.build(command, data, base_dir, **overrides)


@contextmanager
def staged_output(out):
    """Yield a temporary directory whose contents replace ``out`` on success."""
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    # mkdtemp creates 0700; give the final directory the usual umask permissions
    mask = os.umask(0)
    os.umask(mask)
    os.chmod(tmp, 0o777 & ~mask)
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if not out.exists():
        os.rename(tmp, out)
        return
    if not out.is_dir():
        shutil.rmtree(tmp, ignore_errors=True)
        raise NotADirectoryError(f"{out} exists and is not a directory")
    for entry in sorted(tmp.iterdir()):
        target = out / entry.name
        if target.is_dir() and entry.is_dir():
            shutil.rmtree(target)
        os.replace(entry, target)
    tmp.rmdir()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, np.integer):
        return str(int(v))
    return v


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    return obj


def write_json(path, data):
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _initial_curve(cfg):
    rng = np.random.default_rng(cfg.seed)
    return experiments.build_curve(cfg.curve, cfg.n, rng=rng)


def cmd_evolve(cfg, out):
    c = _initial_curve(cfg)
    floor = None if cfg.target_time is not None else cfg.area_floor * area(c)
    traj = evolve(c, area_floor=floor, target_time=cfg.target_time, safety=cfg.safety,
                  snapshot_fraction=cfg.snapshot_fraction)
    if traj.stop_reason == "lost_convexity":
        raise LostConvexityError(f"flow lost convexity at t = {traj.times[-1]:.6g}; "
                                 "reduce safety or refine the grid")
    summary = experiments.evolve_summary(traj)
    with staged_output(out) as tmp:
        write_jsonl(traj, tmp / "trajectory.jsonl")
        write_csv(tmp / "summary.csv", ["t", "area", "affine_length", "iso_ratio", "radius"],
                  [(*row, np.sqrt(row[1] / np.pi)) for row in summary_rows(traj)])
        write_csv(tmp / "ratio.csv", ["t", "ratio", "gap_to_sup"], ratio_series(traj).rows())
        write_json(tmp / "report.json", {"command": "evolve", "config_digest": cfg.digest(),
                                         "step_policy": traj.step_policy, **summary})
        frames = tmp / "frames"
        frames.mkdir()
        picks = sorted(set(range(0, len(traj), cfg.frame_stride)) | {len(traj) - 1})
        pts_lim = _limits(traj.states[0].curve)
        for k in picks:
            plotting.snapshot_frame(traj.states[k], frames / f"frame_{k:04d}.svg", pts_lim)
        plotting.trajectory_overview(traj, tmp / "overview.svg")
    return [f"stop_reason={summary['stop_reason']} snapshots={summary['n_snapshots']} "
            f"extinction_estimate={summary['extinction_estimate']:.9f} "
            f"area_law_deviation={summary['area_law_deviation']:.3e} "
            f"final_ratio_gap={summary['final_ratio_gap']:.3e}"]


def _limits(c):
    pts = boundary_points(c)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = 0.05 * float(np.max(hi - lo))
    return (lo[0] - pad, hi[0] + pad), (lo[1] - pad, hi[1] + pad)


def cmd_classify(cfg, out):
    c = _initial_curve(cfg)
    result = experiments.classify(c, cfg.schedule_base, cfg.schedule_k_max, cfg.safety, cfg.mvee_tol)
    if result.stop_reason == "lost_convexity":
        raise LostConvexityError(f"flow lost convexity after {len(result.milestones)} milestones "
                                 f"(stop reason {result.stop_reason})")
    report = {"command": "classify", "config_digest": cfg.digest(), **result.to_dict()}
    with staged_output(out) as tmp:
        write_json(tmp / "classify.json", report)
        write_csv(tmp / "milestones.csv", ["k", "lambda", "t", "area", "eps", "iso_gap", "good_shape_lambda"],
                  [(m.k, m.lam, m.t, m.area, m.eps, m.gap, m.shape_lambda) for m in result.milestones])
        for m in result.milestones:
            plotting.milestone_overlay(m, tmp / f"overlay_k{m.k}.svg")
        plotting.classify_decay(result, tmp / "decay.svg")
    return [f"k={m.k} t={m.t:.9f} eps={m.eps:.3e} iso_gap={m.gap:.3e}" for m in result.milestones] + [
        f"eps_strictly_decreasing={str(report['eps_strictly_decreasing']).lower()} "
        f"final_eps={report['final_eps']:.3e} final_gap={report['final_gap']:.3e}"]


def cmd_invariance(cfg, out):
    c = _initial_curve(cfg)
    if cfg.matrix == "random":
        matrix = experiments.random_unimodular(np.random.default_rng(cfg.seed))
    else:
        matrix = np.asarray(cfg.matrix, dtype=float)
    report = experiments.invariance(c, matrix, cfg.t_end, cfg.scale_lambda, cfg.safety)
    report = {"command": "invariance", "config_digest": cfg.digest(), "seed": cfg.seed, **report}
    with staged_output(out) as tmp:
        write_json(tmp / "invariance.json", report)
    return [f"affine_deviation={report['affine_deviation']:.3e} scaling_deviation={report['scaling_deviation']:.3e}"]


def cmd_arrival(cfg, out):
    c = _initial_curve(cfg)
    fld, res, conc, traj = experiments.arrival_experiment(
        c, cfg.grid_nodes, cfg.grid_margin, cfg.safety, cfg.snapshot_fraction, cfg.area_floor,
        cfg.h0, cfg.r_min, cfg.r_max)
    report = {
        "command": "arrival",
        "config_digest": cfg.digest(),
        "grid": fld.grid.to_dict(),
        "extinction_time": fld.extinction_time,
        "u_floor": fld.u_floor,
        "resolved_nodes": int(fld.resolved.sum()),
        "residual": {"max_abs": res.max_abs, "median_abs": res.median_abs, "count": res.count,
                     "excluded_radius": res.excluded_radius, "r_min": cfg.r_min, "r_max": cfg.r_max},
        "concavity": conc.to_dict(),
        "n_snapshots": len(traj),
    }
    with staged_output(out) as tmp:
        write_field(fld, tmp / "field.csv", tmp / "field.json")
        write_json(tmp / "arrival_report.json", report)
        plotting.arrival_map(fld, res, tmp / "arrival.svg")
    return [f"resolved_nodes={report['resolved_nodes']} residual_median={res.median_abs:.3e} "
            f"residual_max={res.max_abs:.3e} concavity_passed={str(conc.passed).lower()}"]


def cmd_ndcheck(cfg, out):
    rows = experiments.ndcheck(cfg.n_max, tuple(float(v) for v in cfg.lambdas), solver_n=cfg.n)
    header = ["check", "n", "parameter", "deviation", "tolerance", "passed"]
    with staged_output(out) as tmp:
        write_csv(tmp / "ndcheck.csv", header, rows)
        write_json(tmp / "ndcheck.json", {"command": "ndcheck", "config_digest": cfg.digest(),
                                          "all_passed": all(r[-1] for r in rows),
                                          "rows": [dict(zip(header, r)) for r in rows]})
    lines = [f"{'check':<30} {'n':>2} {'parameter':>10} {'deviation':>11}  result"]
    for name, n, p, dev, tol, ok in rows:
        lines.append(f"{name:<30} {n:>2} {p:>10.4g} {dev:>11.3e}  {'PASS' if ok else 'FAIL'}")
    return lines


HANDLERS = {"evolve": cmd_evolve, "classify": cmd_classify, "invariance": cmd_invariance,
            "arrival": cmd_arrival, "ndcheck": cmd_ndcheck}


def build_parser():
    parser = argparse.ArgumentParser(prog="acsf", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "evolve": "evolve a curve; write trajectory, series and snapshot frames",
        "classify": "normalize area milestones and measure distance from an ellipse",
        "invariance": "check affine and space-time scaling invariance",
        "arrival": "reconstruct the arrival-time field and test it",
        "ndcheck": "check the higher-dimensional closed forms",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", type=Path, help="YAML config file")
        p.add_argument("--out", type=Path, default=Path("out") / name, help="output directory (default: out/<command>)")
        p.add_argument("--seed", type=int, help="seed for randomized inputs")
        p.add_argument("--grid", type=int,
                       help="support samples n; for arrival, grid nodes per axis")
        p.add_argument("--safety", type=float, help="CFL safety factor in (0, 1]")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"seed": args.seed, "safety": args.safety}
    overrides["grid_nodes" if args.command == "arrival" else "n"] = args.grid
    try:
        cfg = load_config(args.command, args.config, **overrides)
        lines = HANDLERS[args.command](cfg, args.out)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ACSFError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    for line in lines:
        print(line)
    print(f"outputs written to {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
