"""Reproduction harness: JSON-configured runs, references, comparisons.

Results are emitted as versioned CSV (schema tag ``# ttflow-csv v1``) with
one row per step: time, relative error against the reference (blank when no
snapshot exists at that time), interior ranks, the per-level smallest
relative singular values, interface condition numbers, and cumulative wall
seconds. All outputs are byte-reproducible for a fixed config and seed,
except the wall-time column, which is excluded from golden comparisons.
"""

import argparse
import concurrent.futures
import hashlib
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import tt as ttm
from .integrators import RankPolicy, StepperConfig, TrajectoryRecord, integrate
from .problems import adr_4d, allen_cahn_3d, dense_reference, manufactured_problem, vlasov_poisson_2d

SCHEMA = "ttflow-csv v1"
PRESET_DIR = Path(__file__).parent / "presets"

PROBLEMS = {
    "vp2d": lambda n: vlasov_poisson_2d(n),
    "ac3d": lambda n: allen_cahn_3d(n),
    "adr4d": lambda n: adr_4d(n),
    "manufactured": lambda n: manufactured_problem(shape=(n,) * 3, ranks=(2, 2), lam=0.5),
}


@dataclass
class RunConfig:
    problem: str
    n: int
    method: str
    stepper: dict = field(default_factory=dict)
    policy: dict = field(default_factory=dict)
    reference: str = "compute"        # compute | none | path to a reference dir
    reference_dt: float = 1e-3
    sample_every: float = 0.1
    init_tol: float = None
    init_ranks: list = None
    rank_schedule_from: str = None    # results.csv whose rank columns to follow
    full_scale: bool = False
    checkpoint_final: bool = False
    seed: int = 0

    def validate(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}")
        if self.method not in ("tt_cross", "ips", "ops", "st_svd"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.init_tol is None and self.init_ranks is None:
            raise ValueError("config must set init_tol or init_ranks for the starting train")
        StepperConfig(**self.stepper)
        RankPolicy(**self.policy)
        if self.n <= 0:
            raise ValueError("n must be positive")
        if self.problem != "manufactured" and self.n % 2:
            raise ValueError("pseudo-spectral grids need an even n")


def load_config(path_or_name: str) -> RunConfig:
    path = Path(path_or_name)
    if not path.exists():
        candidate = PRESET_DIR / f"{path_or_name}.json"
        if candidate.exists():
            path = candidate
        else:
            raise FileNotFoundError(f"no config file or preset named {path_or_name!r}")
    cfg = RunConfig(**json.loads(path.read_text()))
    cfg.validate()
    return cfg


def _fmt(x, spec=".12g") -> str:
    if x is None:
        return ""
    return format(float(x), spec)


def write_csv(record: TrajectoryRecord, path: Path):
    d = len(record.shape)
    levels = range(1, d)
    cols = (["t", "err"] + [f"r_{k}" for k in levels] + [f"eps_{k}" for k in levels]
            + [f"condM_{k}" for k in levels] + [f"condN_{k}" for k in levels] + ["wall_s"])
    lines = [f"# {SCHEMA}", ",".join(cols)]
    for row in record.rows:
        vals = [_fmt(row.t, ".9g"), _fmt(row.err)]
        vals += [str(r) for r in row.ranks]
        vals += [_fmt(e, ".6g") for e in row.eps]
        vals += [_fmt(c, ".6g") for c in row.cond_m] if row.cond_m else [""] * (d - 1)
        vals += [_fmt(c, ".6g") for c in row.cond_n] if row.cond_n else [""] * (d - 1)
        vals += [_fmt(row.wall, ".3f")]
        lines.append(",".join(vals))
    path.write_text("\n".join(lines) + "\n")


def read_csv(path) -> dict:
    lines = Path(path).read_text().strip().splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ValueError(f"{path}: missing schema line")
    schema = lines[0][2:].strip()
    if schema != SCHEMA:
        raise ValueError(f"{path}: schema {schema!r} not supported (expected {SCHEMA!r})")
    header = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:]]
    cols = {name: [r[i] if i < len(r) else "" for r in rows] for i, name in enumerate(header)}
    return {"schema": schema, "header": header, "columns": cols, "path": str(path)}


def _reference_paths(outdir: Path):
    return outdir / "snapshots.npy", outdir / "times.npy", outdir / "manifest.json"


def save_reference(outdir: Path, problem_name: str, n: int, dt: float, snaps):
    outdir.mkdir(parents=True, exist_ok=True)
    snap_path, time_path, man_path = _reference_paths(outdir)
    times = np.array([t for t, _ in snaps])
    stack = np.stack([s for _, s in snaps])
    np.save(snap_path, stack)
    np.save(time_path, times)
    checksum = hashlib.sha256(stack.tobytes() + times.tobytes()).hexdigest()
    man_path.write_text(json.dumps({
        "problem": problem_name, "n": n, "dt": dt,
        "times": [float(t) for t in times], "sha256": checksum,
    }, indent=2) + "\n")
    return checksum


def load_reference(path: Path):
    snap_path, time_path, _ = _reference_paths(Path(path))
    stack = np.load(snap_path)
    times = np.load(time_path)
    return [(float(t), stack[i]) for i, t in enumerate(times)]


def _sample_times(cfg: RunConfig) -> list:
    t_end = float(cfg.stepper.get("t_end", 1.0))
    k, out = 0, []
    while True:
        t = round(k * cfg.sample_every, 9)
        if t > t_end + 1e-12:
            break
        out.append(t)
        k += 1
    return out


def _schedule_from_csv(path) -> list:
    data = read_csv(path)
    rank_cols = [c for c in data["header"] if c.startswith("r_")]
    rows = list(zip(*[data["columns"][c] for c in rank_cols]))
    return [tuple(int(v) for v in row) for row in rows[1:]]   # skip the t=0 row


def run_one(config_path: str, output: str, full_scale: bool = False) -> Path:
    cfg = load_config(config_path)
    if cfg.full_scale and not full_scale:
        raise SystemExit(f"{config_path}: full-scale config requires --full-scale")
    outdir = Path(output)
    outdir.mkdir(parents=True, exist_ok=True)
    t_total = time.perf_counter()
    problem = PROBLEMS[cfg.problem](cfg.n)
    stepper = StepperConfig(**cfg.stepper)
    policy = RankPolicy(**cfg.policy)

    reference = None
    if cfg.reference == "compute":
        snaps = dense_reference(problem, cfg.reference_dt, stepper.t_end, _sample_times(cfg))
        save_reference(outdir / "reference", cfg.problem, cfg.n, cfg.reference_dt, snaps)
        reference = snaps
    elif cfg.reference not in ("none", None):
        reference = load_reference(cfg.reference)

    u0 = problem.u0_dense()
    if cfg.init_ranks is not None:
        y0 = ttm.tt_svd(u0, max_ranks=cfg.init_ranks)
    else:
        y0 = ttm.tt_svd(u0, tol=cfg.init_tol)

    schedule = _schedule_from_csv(cfg.rank_schedule_from) if cfg.rank_schedule_from else None
    record = integrate(problem, cfg.method, stepper, policy, y0,
                       reference=reference, rank_schedule=schedule)

    write_csv(record, outdir / "results.csv")
    if cfg.checkpoint_final:
        ttm.save_checkpoint(record.final_tt, outdir / "final.ttck")
    meta = {
        "config": asdict(cfg),
        "schema": SCHEMA,
        "ttflow_version": __version__,
        "numpy_version": np.__version__,
        "final_ranks": list(record.final_rank),
        "total_runtime_s": round(time.perf_counter() - t_total, 3),
    }
    (outdir / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return outdir / "results.csv"


def summarize(csv_paths) -> list:
    out = []
    for path in csv_paths:
        data = read_csv(path)
        cols = data["columns"]
        rank_cols = [c for c in data["header"] if c.startswith("r_")]
        norms = [2 + sum(int(cols[c][i]) for c in rank_cols) for i in range(len(cols["t"]))]
        errs = [float(e) for e in cols["err"] if e]
        out.append({
            "run": str(path),
            "avg_rank_norm": sum(norms) / len(norms),
            "final_err": errs[-1] if errs else float("nan"),
            "runtime_s": float(cols["wall_s"][-1]) if cols["wall_s"][-1] else 0.0,
        })
    return out


def cmd_compare(args) -> int:
    rows = summarize(args.csvs)
    header = ["run", "avg_rank_norm", "final_err", "runtime_s"]
    text_rows = [[r["run"], f"{r['avg_rank_norm']:.6g}", f"{r['final_err']:.6g}",
                  f"{r['runtime_s']:.3f}"] for r in rows]
    widths = [max(len(h), *(len(tr[i]) for tr in text_rows)) for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(tr, widths)) for tr in text_rows]
    table = "\n".join(lines)
    print(table)
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        csv_lines = [",".join(header)]
        csv_lines += [",".join(tr) for tr in text_rows]
        (out / "summary.csv").write_text("\n".join(csv_lines) + "\n")
        (out / "summary.txt").write_text(table + "\n")
    return 0


def cmd_run(args) -> int:
    outputs = []
    if len(args.configs) == 1 or args.threads <= 1:
        for i, cfg in enumerate(args.configs):
            sub = Path(args.output) if len(args.configs) == 1 else Path(args.output) / f"run{i:02d}"
            outputs.append(run_one(cfg, sub, full_scale=args.full_scale))
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.threads) as pool:
            futs = [pool.submit(run_one, cfg, str(Path(args.output) / f"run{i:02d}"),
                                args.full_scale)
                    for i, cfg in enumerate(args.configs)]
            outputs = [f.result() for f in futs]
    for path in outputs:
        print(path)
    return 0


def cmd_reference(args) -> int:
    cfg = load_config(args.preset)
    problem = PROBLEMS[cfg.problem](cfg.n)
    t_end = float(cfg.stepper.get("t_end", 1.0))
    snaps = dense_reference(problem, cfg.reference_dt, t_end, _sample_times(cfg))
    checksum = save_reference(Path(args.output), cfg.problem, cfg.n, cfg.reference_dt, snaps)
    print(f"{len(snaps)} snapshots -> {args.output} (sha256 {checksum[:12]})")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ttflow",
                                     description="low-rank tensor-train time integration")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one or more JSON configs")
    p_run.add_argument("configs", nargs="+", help="config file paths or preset names")
    p_run.add_argument("--output", default="out", help="output directory")
    p_run.add_argument("--threads", type=int, default=1, help="parallel runs for multiple configs")
    p_run.add_argument("--full-scale", action="store_true",
                       help="allow configs marked full_scale")
    p_run.set_defaults(func=cmd_run)

    p_ref = sub.add_parser("reference", help="compute and store a dense reference")
    p_ref.add_argument("preset", help="preset name or config path")
    p_ref.add_argument("--output", default="reference", help="output directory")
    p_ref.set_defaults(func=cmd_reference)

    p_cmp = sub.add_parser("compare", help="summarize result CSVs")
    p_cmp.add_argument("csvs", nargs="+")
    p_cmp.add_argument("--output", default=None, help="directory for summary files")
    p_cmp.set_defaults(func=cmd_compare)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
