"""Command-line frontend: ``amic analyze|synth|compare|rank|bench``.

Exit codes: 0 on success (an empty result included), 1 on data or I/O
failure, 2 on bad usage.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .ingest import IngestError, align_pair, clean, load_series, native_step, rank_transform, resample
from .ksg import ksg_mi
from .parallel import recursive_parallel_search
from .search import (Absolute, CoverageTarget, SearchConfig, TwoStep, WindowResult, rank_windows)
from .synth import RELATIONS, compose, dcor, gen_relation, pearson
from .window import WindowState

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2


class DataError(Exception):
    """Failure caused by input data or files; maps to exit code 1."""


# ---------------------------------------------------------------------------
# helpers


def _int_list(text: str) -> list[int]:
    out = []
    for tok in text.split(","):
        tok = tok.strip().lower()
        if not tok:
            continue
        mult = 1
        if tok.endswith("k"):
            tok, mult = tok[:-1], 1000
        try:
            out.append(int(float(tok) * mult))
        except ValueError:
            raise argparse.ArgumentTypeError(f"not an integer list: {text!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _name_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def load_pair(x_path, y_path, resolution=None, agg="mean"):
    """Load, clean, resample and align two series files, then rank-transform."""
    try:
        sx = load_series(x_path)
        sy = load_series(y_path)
        step_x, step_y = native_step(sx), native_step(sy)
        sx, sy = clean(sx, step_x), clean(sy, step_y)
        res = resolution if resolution is not None else max(step_x, step_y)
        pair = align_pair(resample(sx, res, agg), resample(sy, res, agg))
    except OSError as exc:
        raise DataError(str(exc)) from None
    except IngestError as exc:
        raise DataError(str(exc)) from None
    return rank_transform(pair)


def _fmt(v):
    return f"{v:.6f}" if isinstance(v, float) else str(v)


def _table(rows, cols) -> str:
    cells = [[str(c) for c in cols]] + [[_fmt(r[c]) for c in cols] for r in rows]
    widths = [max(len(row[j]) for row in cells) for j in range(len(cols))]
    return "\n".join("  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in cells) + "\n"


def _jsonl(rows) -> str:
    return "".join(json.dumps(r) + "\n" for r in rows)


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise DataError(str(exc)) from None


# ---------------------------------------------------------------------------
# analyze


def _threshold(args, parser):
    mode = args.threshold_mode
    if mode == "absolute":
        if args.sigma is None:
            parser.error("--sigma is required with --threshold-mode absolute")
        return Absolute(args.sigma)
    two = TwoStep(args.sigma_h, args.sigma_i, args.norm)
    if mode == "two-step":
        return two
    if args.coverage is None:
        parser.error("--coverage is required with --threshold-mode coverage")
    if not 0 < args.coverage <= 1:
        parser.error("--coverage must lie in (0, 1]")
    inner = Absolute(args.sigma) if args.sigma is not None else two
    return CoverageTarget(args.coverage, inner)


def build_config(args, parser) -> SearchConfig:
    """Validate analysis flags and turn them into a SearchConfig (exit 2 on misuse)."""
    if args.ladder is not None and (args.g_max is not None or args.g_min is not None):
        parser.error("--ladder cannot be combined with --g-max/--g-min")
    if args.k < 1:
        parser.error("--k must be >= 1")
    if not 0 < args.slide_frac <= 1:
        parser.error("--slide-frac must lie in (0, 1]")
    if args.partitions < 1:
        parser.error("--partitions must be >= 1")
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    if args.resolution is not None and args.resolution <= 0:
        parser.error("--resolution must be positive")
    if args.sigma is not None and args.sigma < 0:
        parser.error("--sigma must be >= 0")
    for flag, val in (("--sigma-h", args.sigma_h), ("--sigma-i", args.sigma_i)):
        if not 0 <= val <= 1:
            parser.error(f"{flag} must lie in [0, 1]")
    for flag, val in (("--g-max", args.g_max), ("--g-min", args.g_min)):
        if val is not None and val < args.k + 2:
            parser.error(f"{flag} must be at least k + 2")
    if args.g_max is not None and args.g_min is not None and args.g_min > args.g_max:
        parser.error("--g-min exceeds --g-max")
    ladder = tuple(args.ladder) if args.ladder is not None else None
    if ladder is not None and (any(g < args.k + 2 for g in ladder)):
        parser.error("--ladder sizes must be at least k + 2")
    return SearchConfig(k=args.k, ladder=ladder, g_max=args.g_max, g_min=args.g_min,
                        slide_frac=args.slide_frac, threshold=_threshold(args, parser),
                        partitions=args.partitions, workers=args.workers)


def cmd_analyze(args, parser) -> int:
    config = build_config(args, parser)
    pair = load_pair(args.x, args.y, args.resolution, args.agg)
    try:
        result = recursive_parallel_search(pair, config)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    rows = [w.to_dict() for w in sorted(result.windows, key=lambda w: w.s_idx)]
    if args.format == "table":
        _emit(_table(rows, WindowResult.FIELDS), args.out)
    else:
        _emit(_jsonl(rows), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth


def _write_csv(path: Path, ts, values):
    lines = ["timestamp,value"] + [f"{int(t)},{float(v)!r}" for t, v in zip(ts, values)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_synth(args, parser) -> int:
    if (args.relation is None) == (args.compose is None):
        parser.error("give exactly one of --relation or --compose")
    kinds = [args.relation] if args.relation is not None else args.compose
    bad = [k for k in kinds if k not in RELATIONS]
    if bad:
        parser.error(f"unknown relation {bad[0]!r}; choose from {', '.join(RELATIONS)}")
    if args.n < 10:
        parser.error("--n must be >= 10")
    if args.noise < 0:
        parser.error("--noise must be >= 0")
    if args.gap < 0:
        parser.error("--gap must be >= 0")
    if args.relation is not None:
        pair = gen_relation(args.relation, args.n, args.noise, args.seed)
        spans = [{"kind": args.relation, "s_idx": 0, "e_idx": args.n}]
    else:
        pair, gt = compose(kinds, args.n, args.gap, seed=args.seed, noise=args.noise)
        spans = [{"kind": s.kind, "s_idx": s.s_idx, "e_idx": s.e_idx} for s in gt]
    prefix = Path(args.out)
    try:
        if prefix.parent and not prefix.parent.exists():
            prefix.parent.mkdir(parents=True)
        _write_csv(prefix.with_name(prefix.name + "_x.csv"), pair.timestamps, pair.x)
        _write_csv(prefix.with_name(prefix.name + "_y.csv"), pair.timestamps, pair.y)
        meta = {"n": len(pair), "seed": args.seed, "noise": args.noise, "gap": args.gap, "spans": spans}
        prefix.with_name(prefix.name + "_truth.json").write_text(json.dumps(meta, indent=2) + "\n",
                                                                  encoding="utf-8")
    except OSError as exc:
        raise DataError(str(exc)) from None
    return EXIT_OK


# ---------------------------------------------------------------------------
# compare


def cmd_compare(args, parser) -> int:
    if args.k < 1:
        parser.error("--k must be >= 1")
    pair = load_pair(args.x, args.y, args.resolution, args.agg)
    if len(pair) < args.k + 2:
        raise DataError(f"need at least {args.k + 2} aligned samples")
    src = pair.source
    try:
        pcc = pearson(src.x, src.y)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    mi = ksg_mi(pair.u, pair.v, args.k)
    row = {"n": len(pair), "mi_raw": mi.raw, "mi": mi.clamped, "pcc": pcc, "dcor": dcor(src.x, src.y)}
    if args.format == "table":
        sys.stdout.write(_table([row], list(row)))
    else:
        sys.stdout.write(json.dumps(row) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# rank


def _read_windows(path):
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(str(exc)) from None
    out = []
    for no, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ValueError("not an object")
            w = WindowResult(**{f: obj[f] for f in WindowResult.FIELDS})
            float(w.mi), int(w.s_idx)
        except (ValueError, KeyError, TypeError) as exc:
            raise DataError(f"{path}: line {no}: malformed window ({exc})") from None
        out.append(w)
    return out


def cmd_rank(args, parser) -> int:
    if args.top is not None and args.top < 0:
        parser.error("--top must be >= 0")
    ranked = rank_windows(_read_windows(args.input), args.top)
    rows = [{"From": w.start_ts, "To": w.end_ts, "MI": float(w.mi), "sign": w.sign} for w in ranked]
    if args.format == "jsonl":
        sys.stdout.write(_jsonl([w.to_dict() for w in ranked]))
    elif rows:
        sys.stdout.write(_table(rows, ["From", "To", "MI", "sign"]))
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench

BENCH_WINDOW_DIVISOR = 10  # window = size / 10
BENCH_SLIDES_PER_WINDOW = 100  # slide = window / 100
BENCH_K = 6


def bench_scan(size: int):
    """Window length and slide of the fixed benchmark scan for a series of `size`."""
    g = max(BENCH_K + 2, size // BENCH_WINDOW_DIVISOR)
    return g, max(1, g // BENCH_SLIDES_PER_WINDOW)


def bench_data(size: int, seed: int = 0):
    return rank_transform(gen_relation("sine", size, seed=seed))


def run_bench(size: int, mode: str, seed: int = 0) -> tuple[float, float]:
    """Time the fixed sliding scan; returns (seconds, sum of MI over windows)."""
    pair = bench_data(size, seed)
    u, v = pair.u, pair.v
    g, slide = bench_scan(size)
    starts = range(0, size - g + 1, slide)
    total = 0.0
    t0 = time.perf_counter()
    if mode == "brute":
        for s in starts:
            total += ksg_mi(u[s:s + g], v[s:s + g], BENCH_K).raw
    else:
        state = WindowState(u, v, BENCH_K, window_hint=g)
        for s in starts:
            total += state.slide_to(s, s + g).raw
    return time.perf_counter() - t0, total


def _warm_up():
    pair = bench_data(200, 1)
    ksg_mi(pair.u[:50], pair.v[:50], BENCH_K)
    st = WindowState(pair.u, pair.v, BENCH_K)
    st.slide_to(0, 50)
    st.slide_to(1, 51)


def cmd_bench(args, parser) -> int:
    if any(s < 1000 for s in args.sizes):
        parser.error("--sizes must all be >= 1000")
    modes = ["incremental", "brute"] if args.mode == "both" else [args.mode]
    _warm_up()
    sys.stdout.write("size,mode,seconds\n")
    for size in args.sizes:
        for mode in modes:
            sec, _ = run_bench(size, mode, args.seed)
            sys.stdout.write(f"{size},{mode},{sec:.6f}\n")
            sys.stdout.flush()
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _add_input(p, fmt_choices=("jsonl", "table")):
    p.add_argument("--x", required=True, help="CSV file with header timestamp,value")
    p.add_argument("--y", required=True, help="CSV file with header timestamp,value")
    p.add_argument("--resolution", type=int, default=None,
                   help="resampling step in seconds (default: the coarser native step)")
    p.add_argument("--agg", choices=("mean", "sum"), default="mean")
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--format", choices=fmt_choices, default=fmt_choices[0])


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="amic", description="Adaptive mutual-information correlation search")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="find correlated windows in a pair of series")
    _add_input(p)
    p.add_argument("--ladder", type=_int_list, default=None, help="comma-separated window sizes")
    p.add_argument("--g-max", type=int, default=None)
    p.add_argument("--g-min", type=int, default=None)
    p.add_argument("--slide-frac", type=float, default=1 / 8)
    p.add_argument("--threshold-mode", choices=("absolute", "two-step", "coverage"), default="two-step")
    p.add_argument("--sigma", type=float, default=None, help="absolute MI threshold")
    p.add_argument("--sigma-h", type=float, default=0.2)
    p.add_argument("--sigma-i", type=float, default=0.2)
    p.add_argument("--norm", choices=("max", "entropy"), default="entropy")
    p.add_argument("--coverage", type=float, default=None, help="target data coverage in (0, 1]")
    p.add_argument("--partitions", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("synth", help="generate synthetic series")
    p.add_argument("--relation", default=None, help=f"one of: {', '.join(RELATIONS)}")
    p.add_argument("--compose", type=_name_list, default=None, help="comma-separated relation kinds")
    p.add_argument("--n", type=int, default=2000, help="samples per relation")
    p.add_argument("--gap", type=int, default=1000, help="noise samples between composed relations")
    p.add_argument("--noise", type=float, default=0.02)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output prefix; writes PREFIX_x.csv, PREFIX_y.csv, PREFIX_truth.json")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("compare", help="whole-series MI, Pearson and distance correlation")
    _add_input(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("rank", help="rank windows from an analyze output by MI")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--top", type=int, default=None)
    p.add_argument("--format", choices=("table", "jsonl"), default="table")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("bench", help="time incremental vs brute-force sliding MI")
    p.add_argument("--sizes", type=_int_list, default=[1000, 4000, 16000, 50000])
    p.add_argument("--mode", choices=("incremental", "brute", "both"), default="both")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args, parser)
    except SystemExit as exc:  # parser.error inside a command
        return int(exc.code) if exc.code is not None else EXIT_OK
    except DataError as exc:
        print(f"amic: error: {exc}", file=sys.stderr)
        return EXIT_DATA
