"""Benchmark command line: generate problems, run multiplications under
placement and chunking modes against the two-level memory model, and emit
metric tables as JSON or CSV.

Subcommands: ``generate`` (write Matrix Market files), ``multiply`` (one
product under one mode), ``sweep`` (grid of scales x modes), ``triangles``
(count triangles in a graph file).  Exit codes: 0 success, 2 validation
failure, 3 verify mismatch.
"""

import argparse
import json
import os
import statistics
import sys
import time
from dataclasses import dataclass

from . import chunking
from .csr import OFFSET_BYTES, products_match, validate
from .errors import TieredSpgemmError, VerifyError
from .generators import (STENCIL_KINDS, StencilSpec, generate_interpolation,
                         generate_random_rhs, generate_stencil,
                         grid_for_target_bytes)
from .kernel import compress, spgemm_numeric, spgemm_symbolic
from .matrix_market import read_matrix_market, write_matrix_market
from .memory import (CHUNKED, MemoryModel, MemorySpaceSpec, PlacementPolicy,
                     compute_access_stats, estimate_kernel_time,
                     validate_placement)
from .triangles import count_triangles, load_graph

SCHEMA_VERSION = 1

MODES = ("all_fast", "all_slow", "b_in_fast", "chunk")
PRODUCTS = ("AxP", "RxA")
PROBLEMS = STENCIL_KINDS + ("file",)

_DEFAULTS = {
    "problem": "laplace3d",
    "product": "RxA",
    "grid": (9, 9, 9),
    "target_bytes": None,
    "mode": "all_slow",
    "fast_size": None,
    "fast_bandwidth": 400e9,
    "slow_bandwidth": 20e9,
    "fast_latency": 1e-7,
    "slow_latency": 1e-6,
    "seed": 0,
    "reps": 5,
    "verify": False,
    "workers": os.cpu_count() or 1,
    "format": "json",
    "out": None,
}


@dataclass
class ExperimentSpec:
    problem: str
    product: str
    grid: tuple | None
    mode: str
    fast_size: int | None
    fast_bandwidth: float
    slow_bandwidth: float
    fast_latency: float
    slow_latency: float
    seed: int
    reps: int
    verify: bool
    workers: int
    target_bytes: int | None = None
    file_a: str | None = None
    file_b: str | None = None

    def check(self):
        if self.problem not in PROBLEMS:
            raise ValueError("unknown problem %r" % self.problem)
        if self.mode not in MODES:
            raise ValueError("unknown mode %r" % self.mode)
        if self.product not in PRODUCTS:
            raise ValueError("unknown product %r" % self.product)
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.mode == "chunk" and not self.fast_size:
            raise ValueError("chunk mode requires --fast-size")
        if self.problem == "file" and not (self.file_a and self.file_b):
            raise ValueError("file problem requires --file-a and --file-b")
        if self.problem != "file" and self.grid is None and self.target_bytes is None:
            raise ValueError("need --grid or --target-bytes")

    def resolve_scale(self):
        """Turn a byte target into concrete grid dims."""
        if self.problem != "file" and self.target_bytes is not None:
            self.grid = grid_for_target_bytes(self.problem, self.target_bytes)

    def grid_label(self):
        if self.problem == "file":
            return "file"
        return "x".join(str(d) for d in self.grid)

    def to_json_dict(self):
        return {
            "problem": self.problem, "product": self.product,
            "grid": self.grid_label(), "mode": self.mode,
            "fast_size": self.fast_size,
            "fast_bandwidth": self.fast_bandwidth,
            "slow_bandwidth": self.slow_bandwidth,
            "fast_latency": self.fast_latency,
            "slow_latency": self.slow_latency,
            "target_bytes": self.target_bytes,
            "seed": self.seed, "reps": self.reps,
            "verify": self.verify, "workers": self.workers,
        }


def _memory_model(spec: ExperimentSpec) -> MemoryModel:
    capacity = spec.fast_size if spec.fast_size else 16 * 2**30
    fast = MemorySpaceSpec("fast", capacity, spec.fast_bandwidth, spec.fast_latency)
    slow = MemorySpaceSpec("slow", None, spec.slow_bandwidth, spec.slow_latency)
    return MemoryModel(fast, slow)


def build_operands(spec: ExperimentSpec):
    """The (left, right) operands of the requested product."""
    if spec.problem == "file":
        a = read_matrix_market(spec.file_a)
        b = read_matrix_market(spec.file_b)
        validate(a)
        validate(b)
        return a, b
    stencil = StencilSpec(spec.problem, spec.grid)
    a = generate_stencil(stencil)
    p, r = generate_interpolation(stencil)
    if spec.product == "AxP":
        return a, p
    return r, a


_RUN_FIELDS = ("rep", "flops", "multiplications", "c_nnz", "simulated_seconds",
               "kernel_seconds", "copy_seconds", "copy_bytes_slow_to_fast",
               "copy_bytes_fast_to_slow", "ledger_events", "algorithm",
               "predicted_copy_bytes", "wall_seconds_informational")


def run_experiment(spec: ExperimentSpec, ledger_capture: list | None = None) -> dict:
    """Execute one experiment spec: reps repetitions of one product/mode.

    When ``ledger_capture`` is a list, the last chunk-mode copy ledger is
    appended to it.
    """
    spec.check()
    spec.resolve_scale()
    a, b = build_operands(spec)
    model = _memory_model(spec)

    runs = []
    chunk_plan_dict = None
    for rep in range(spec.reps):
        wall_start = time.perf_counter()
        cb = compress(b)
        counts = spgemm_symbolic(a, cb, workers=spec.workers)
        stats = compute_access_stats(a, b, counts)
        size_a = a.byte_size
        size_b = b.byte_size
        size_c = OFFSET_BYTES * (a.num_rows + 1) + 16 * int(counts.sum())
        row_bytes_b = b.row_byte_sizes()

        if spec.mode == "chunk":
            plan = chunking.plan_for_multiply(a, b, counts, spec.fast_size)
            c, ledger = chunking.execute_plan(a, b, counts, plan, model,
                                              workers=spec.workers)
            actual = ledger.total_bytes()
            if actual != plan.predicted_copy_bytes:
                raise TieredSpgemmError(
                    "ledger bytes %d diverged from plan's %d"
                    % (actual, plan.predicted_copy_bytes))
            policy = PlacementPolicy.from_name(CHUNKED)
            kernel_seconds = estimate_kernel_time(
                stats, policy, model, size_a=size_a, size_c=size_c,
                row_bytes_b=row_bytes_b)
            copy_seconds = ledger.total_seconds
            summary = ledger.summary()
            algorithm = plan.algorithm
            predicted = plan.predicted_copy_bytes
            chunk_plan_dict = plan.to_json_dict()
            if ledger_capture is not None:
                ledger_capture.append(ledger)
        else:
            policy = PlacementPolicy.from_name(spec.mode)
            validate_placement(policy, size_a, size_b, size_c, model)
            c = spgemm_numeric(a, b, counts, workers=spec.workers)
            kernel_seconds = estimate_kernel_time(
                stats, policy, model, size_a=size_a, size_c=size_c,
                row_bytes_b=row_bytes_b)
            copy_seconds = 0.0
            summary = {"events": 0, "bytes_slow_to_fast": 0,
                       "bytes_fast_to_slow": 0}
            algorithm = ""
            predicted = None
        wall = time.perf_counter() - wall_start

        if spec.verify:
            reference = spgemm_numeric(a, b, counts)
            ok, max_rel = products_match(c, reference, rtol=1e-12)
            if not ok:
                raise VerifyError(
                    "mode %s result diverges from the plain kernel "
                    "(max relative difference %.3e)" % (spec.mode, max_rel))

        runs.append({
            "rep": rep,
            "flops": 2 * stats.accumulator_inserts,
            "multiplications": stats.accumulator_inserts,
            "c_nnz": c.nnz,
            "simulated_seconds": kernel_seconds + copy_seconds,
            "kernel_seconds": kernel_seconds,
            "copy_seconds": copy_seconds,
            "copy_bytes_slow_to_fast": summary["bytes_slow_to_fast"],
            "copy_bytes_fast_to_slow": summary["bytes_fast_to_slow"],
            "ledger_events": summary["events"],
            "algorithm": algorithm,
            "predicted_copy_bytes": predicted,
            "wall_seconds_informational": wall,
        })

    median = {"rep": "median"}
    for key in _RUN_FIELDS:
        if key in ("rep", "algorithm", "predicted_copy_bytes"):
            continue
        median[key] = statistics.median(r[key] for r in runs)
    median["algorithm"] = runs[0]["algorithm"]
    median["predicted_copy_bytes"] = runs[0]["predicted_copy_bytes"]

    return {
        "schema_version": SCHEMA_VERSION,
        "spec": spec.to_json_dict(),
        "chunk_plan": chunk_plan_dict,
        "runs": runs,
        "median": median,
    }


def _csv_rows(report: dict):
    spec = report["spec"]
    prefix = [spec["problem"], spec["product"], spec["grid"], spec["mode"]]
    for record in report["runs"] + [report["median"]]:
        row = prefix + [record.get(k, "") for k in _RUN_FIELDS]
        yield ["" if v is None else v for v in row]


_CSV_HEADER = ["problem", "product", "grid", "mode"] + list(_RUN_FIELDS)


def emit_report(report: dict, fmt: str, out: str | None) -> None:
    """Serialize a report (or a sweep of reports) to stdout or a file."""
    if fmt == "json":
        text = json.dumps(report, indent=2) + "\n"
    elif fmt == "csv":
        reports = report["experiments"] if "experiments" in report else [report]
        lines = [",".join(_CSV_HEADER)]
        for rep in reports:
            for row in _csv_rows(rep):
                lines.append(",".join(str(v) for v in row))
        text = "\n".join(lines) + "\n"
    else:
        raise ValueError("unknown format %r" % fmt)
    if out:
        with open(out, "w", encoding="ascii") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_grid(text):
    if isinstance(text, (tuple, list)):
        return tuple(int(v) for v in text)
    parts = text.replace("x", " ").split()
    return tuple(int(p) for p in parts)


def _parse_size(text):
    """Byte count with optional k/m/g suffix (binary units)."""
    if text is None:
        return None
    s = str(text).strip().lower()
    mult = 1
    if s and s[-1] in "kmg":
        mult = {"k": 2**10, "m": 2**20, "g": 2**30}[s[-1]]
        s = s[:-1]
    return int(float(s) * mult)


def _load_config(path) -> dict:
    values = {}
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ValueError("config lines must be key=value, got %r" % stripped)
            key, _, val = stripped.partition("=")
            values[key.strip()] = val.strip()
    return values


_CONFIG_PARSERS = {
    "grid": _parse_grid,
    "fast_size": _parse_size,
    "target_bytes": _parse_size,
    "fast_bandwidth": float, "slow_bandwidth": float,
    "fast_latency": float, "slow_latency": float,
    "seed": int, "reps": int, "workers": int,
    "verify": lambda v: str(v).lower() in ("1", "true", "yes"),
}


def _merge(args, keys) -> dict:
    """Defaults, then config file values, then explicit flags."""
    merged = dict(_DEFAULTS)
    config = _load_config(args.config) if getattr(args, "config", None) else {}
    for key, raw in config.items():
        if key not in merged:
            raise ValueError("unknown config key %r" % key)
        merged[key] = _CONFIG_PARSERS.get(key, str)(raw)
    for key in keys:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


_SPEC_KEYS = ("problem", "product", "grid", "target_bytes", "mode",
              "fast_size", "fast_bandwidth", "slow_bandwidth", "fast_latency",
              "slow_latency", "seed", "reps", "verify", "workers",
              "format", "out")


def _spec_from(merged, file_a=None, file_b=None,
               grid_explicit=False) -> ExperimentSpec:
    target = merged["target_bytes"]
    if target is not None and grid_explicit:
        raise ValueError("--grid and --target-bytes are mutually exclusive")
    grid = None if target is not None else \
        (tuple(merged["grid"]) if merged["grid"] else None)
    return ExperimentSpec(
        problem=merged["problem"], product=merged["product"],
        grid=grid, target_bytes=target,
        mode=merged["mode"], fast_size=merged["fast_size"],
        fast_bandwidth=merged["fast_bandwidth"],
        slow_bandwidth=merged["slow_bandwidth"],
        fast_latency=merged["fast_latency"],
        slow_latency=merged["slow_latency"],
        seed=merged["seed"], reps=merged["reps"],
        verify=bool(merged["verify"]), workers=merged["workers"],
        file_a=file_a, file_b=file_b)


def _add_common_flags(p):
    p.add_argument("--config", help="key=value defaults file; flags win")
    p.add_argument("--problem", choices=PROBLEMS)
    p.add_argument("--product", choices=PRODUCTS)
    p.add_argument("--grid", nargs="+", type=int, metavar="N",
                   help="per-axis grid point counts")
    p.add_argument("--target-bytes", dest="target_bytes", type=_parse_size,
                   help="pick the smallest grid whose stencil matrix reaches "
                        "this byte size (alternative to --grid)")
    p.add_argument("--fast-size", dest="fast_size", type=_parse_size,
                   help="fast tier capacity in bytes (k/m/g suffixes allowed)")
    p.add_argument("--fast-bandwidth", dest="fast_bandwidth", type=float)
    p.add_argument("--slow-bandwidth", dest="slow_bandwidth", type=float)
    p.add_argument("--fast-latency", dest="fast_latency", type=float)
    p.add_argument("--slow-latency", dest="slow_latency", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--verify", action="store_const", const=True, default=None,
                   help="fail with exit code 3 if the result diverges from the plain kernel")
    p.add_argument("--workers", type=int)
    p.add_argument("--format", choices=("json", "csv"))
    p.add_argument("--out", help="output path (stdout when omitted)")


def cmd_generate(args) -> int:
    merged = _merge(args, _SPEC_KEYS)
    if args.matrix == "rhs":
        if args.rows is None or args.cols is None or args.delta is None:
            raise ValueError("rhs generation needs --rows, --cols and --delta")
        m = generate_random_rhs(args.rows, args.cols, args.delta, merged["seed"])
    else:
        stencil = StencilSpec(merged["problem"], tuple(merged["grid"]))
        if args.matrix == "A":
            m = generate_stencil(stencil)
        else:
            p, r = generate_interpolation(stencil)
            m = p if args.matrix == "P" else r
    if not args.out_path:
        raise ValueError("generate requires an output path")
    write_matrix_market(m, args.out_path)
    print("wrote %s: %d x %d, %d nonzeros"
          % (args.out_path, m.num_rows, m.num_cols, m.nnz))
    return 0


def cmd_multiply(args) -> int:
    merged = _merge(args, _SPEC_KEYS)
    spec = _spec_from(merged, file_a=args.file_a, file_b=args.file_b,
                      grid_explicit=args.grid is not None)
    ledgers = [] if args.ledger_out else None
    report = run_experiment(spec, ledger_capture=ledgers)
    if args.ledger_out:
        if not ledgers:
            raise ValueError("--ledger-out needs --mode chunk")
        with open(args.ledger_out, "w", encoding="ascii") as fh:
            fh.write(ledgers[-1].to_json_lines())
    emit_report(report, merged["format"], merged["out"])
    return 0


def cmd_sweep(args) -> int:
    merged = _merge(args, _SPEC_KEYS)
    grids = [_parse_grid(g) for g in args.grids] if args.grids else [merged["grid"]]
    modes = args.modes.split(",") if args.modes else [merged["mode"]]
    experiments = []
    for grid in grids:
        for mode in modes:
            one = dict(merged)
            one["grid"] = grid
            one["mode"] = mode
            spec = _spec_from(one)
            experiments.append(run_experiment(spec))
    report = {"schema_version": SCHEMA_VERSION, "experiments": experiments}
    emit_report(report, merged["format"], merged["out"])
    return 0


def cmd_triangles(args) -> int:
    merged = _merge(args, ("seed", "reps", "workers"))
    wall_start = time.perf_counter()
    g = load_graph(args.graph)
    n_triangles = count_triangles(g, workers=merged["workers"])
    wall = time.perf_counter() - wall_start
    report = {
        "schema_version": SCHEMA_VERSION,
        "graph": args.graph,
        "vertices": g.num_rows,
        "edges": g.nnz // 2,
        "triangles": n_triangles,
        "wall_seconds_informational": wall,
    }
    fmt = args.format or "json"
    if fmt == "csv":
        text = ("graph,vertices,edges,triangles,wall_seconds_informational\n"
                "%s,%d,%d,%d,%s\n" % (args.graph, g.num_rows, g.nnz // 2,
                                      n_triangles, wall))
        if args.out:
            with open(args.out, "w", encoding="ascii") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    else:
        emit_report(report, "json", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tiered-spgemm",
        description="Sparse matrix-matrix multiplication benchmarks over a "
                    "two-level memory cost model")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="write a generated matrix as Matrix Market")
    _add_common_flags(p_gen)
    p_gen.add_argument("--matrix", choices=("A", "P", "R", "rhs"), default="A")
    p_gen.add_argument("--rows", type=int)
    p_gen.add_argument("--cols", type=int)
    p_gen.add_argument("--delta", type=int)
    p_gen.add_argument("out_path", nargs="?", help="destination .mtx path")
    p_gen.set_defaults(func=cmd_generate)

    p_mul = sub.add_parser("multiply", help="run one product under one mode")
    _add_common_flags(p_mul)
    p_mul.add_argument("--mode", choices=MODES)
    p_mul.add_argument("--file-a", dest="file_a", help="left operand for --problem file")
    p_mul.add_argument("--file-b", dest="file_b", help="right operand for --problem file")
    p_mul.add_argument("--ledger-out", dest="ledger_out",
                       help="write the chunk copy ledger as JSON lines")
    p_mul.set_defaults(func=cmd_multiply)

    p_sweep = sub.add_parser("sweep", help="run a grid of scales x modes")
    _add_common_flags(p_sweep)
    p_sweep.add_argument("--grids", nargs="+", metavar="GRID",
                         help="grids like 9x9x9 17x17x17")
    p_sweep.add_argument("--modes", help="comma-separated mode list")
    p_sweep.set_defaults(func=cmd_sweep, mode=None)

    p_tri = sub.add_parser("triangles", help="count triangles in a graph file")
    _add_common_flags(p_tri)
    p_tri.add_argument("graph", help="Matrix Market file or edge list")
    p_tri.set_defaults(func=cmd_triangles)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except VerifyError as exc:
        print("verify failed: %s" % exc, file=sys.stderr)
        return 3
    except (TieredSpgemmError, ValueError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
