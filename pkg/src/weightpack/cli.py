"""Command-line front end: pack, unpack, bench-codec, train, report.

Exit codes: 0 success, 1 I/O or runtime failure, 2 usage or configuration
error (argparse's convention), 3 malformed packed stream.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import bench, codec
from .config import DEFAULT_CONFIG, ConfigError, MODES, load_config
from .report import write_report
from .training import run_training, write_run_outputs

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_MALFORMED = 3

_TEXT_SUFFIXES = (".csv", ".txt")


def _read_weights(path: Path) -> np.ndarray:
    """Load a float32 stream: raw little-endian words, or one value per CSV row."""
    if path.suffix.lower() in _TEXT_SUFFIXES:
        text = path.read_text().strip()
        if not text:
            return np.empty(0, dtype=np.float32)
        return np.loadtxt(path, delimiter=",", ndmin=1).astype(np.float32).reshape(-1)
    data = path.read_bytes()
    if len(data) % 4:
        raise ValueError(f"{path}: {len(data)} bytes is not a whole number of float32 words")
    return np.frombuffer(data, dtype="<f4").astype(np.float32)


def _write_weights(path: Path, weights: np.ndarray) -> None:
    if path.suffix.lower() in _TEXT_SUFFIXES:
        np.savetxt(path, weights, fmt="%.9g")
    else:
        weights.astype("<f4").tofile(path)


def _cmd_pack(args) -> int:
    try:
        weights = _read_weights(Path(args.input))
    except (OSError, ValueError) as exc:
        print(f"pack: {exc}", file=sys.stderr)
        return EXIT_ERROR
    block = codec.pack_vectorized(weights, args.round_to)
    try:
        with open(args.output, "wb") as fp:
            written = codec.write_stream(fp, block)
    except OSError as exc:
        print(f"pack: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(
        f"packed {block.weight_count} weights at {block.round_to} bytes/weight: "
        f"payload {len(block.payload)} B + header {codec.STREAM_HEADER_BYTES} B "
        f"({written} B total), raw {block.raw_bytes} B, "
        f"payload/raw ratio {block.round_to / 4:.4f}"
    )
    return EXIT_OK


def _cmd_unpack(args) -> int:
    try:
        with open(args.input, "rb") as fp:
            block = codec.read_stream(fp)
    except codec.MalformedBlock as exc:
        print(f"unpack: {args.input}: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except OSError as exc:
        print(f"unpack: {exc}", file=sys.stderr)
        return EXIT_ERROR
    weights = codec.unpack(block)
    try:
        _write_weights(Path(args.output), weights)
    except OSError as exc:
        print(f"unpack: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"unpacked {block.weight_count} weights from round_to={block.round_to}")
    return EXIT_OK


def _int_list(raw: str) -> list[int]:
    values = [int(part) for part in raw.split(",") if part.strip()]
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _cmd_bench(args) -> int:
    rng = np.random.default_rng(args.seed)
    bad_r = [r for r in args.round_tos if not 1 <= r <= 4]
    if bad_r:
        print(f"bench-codec: round_to values {bad_r} outside [1, 4]", file=sys.stderr)
        return EXIT_USAGE
    print(f"equivalence precheck on {args.check_size} random weights ...", flush=True)
    try:
        bench.equivalence_precheck(args.check_size, args.round_tos, args.workers, rng)
    except AssertionError as exc:
        print(f"bench-codec: precheck FAILED: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print("precheck passed: all paths byte-identical to scalar pack")
    rows = bench.run_bench(args.sizes, args.round_tos, args.workers, args.repeats, rng)
    print(bench.render_bench_table(rows), end="")
    for warning in bench.slow_vector_warnings(rows):
        print(warning)
    if args.csv:
        with open(args.csv, "w") as fp:
            bench.write_bench_csv(fp, rows)
        print(f"wrote {args.csv}")
    return EXIT_OK


def _cmd_train(args, parser: argparse.ArgumentParser) -> int:
    if args.print_defaults:
        print(DEFAULT_CONFIG, end="")
        return EXIT_OK
    missing = [name for name in ("config", "seed", "out") if getattr(args, name) is None]
    if missing:
        parser.error(f"the following arguments are required: {', '.join('--' + m for m in missing)}")
    try:
        cfg = load_config(args.config, args.seed, args.mode)
    except ConfigError as exc:
        print(f"train: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = run_training(cfg)
    except (OSError, ValueError) as exc:
        print(f"train: {exc}", file=sys.stderr)
        return EXIT_ERROR
    paths = write_run_outputs(args.out, result)
    wire = result.ledger.total_wire_bytes()
    print(
        f"mode={cfg.mode} seed={cfg.seed} epochs={cfg.epochs}: "
        f"final val top-1 {result.val_top1[-1]:.4f}, "
        f"final loss {result.losses[-1]:.4f}, wire bytes {wire}"
    )
    print("outputs: " + ", ".join(str(p) for p in paths.values()))
    return EXIT_OK


def _cmd_report(args) -> int:
    try:
        outputs = write_report(args.run, args.out)
    except (FileNotFoundError, ValueError) as exc:
        print(f"report: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(outputs["table"], end="")
    figures = ", ".join(str(p) for p in outputs["figures"])
    print(f"wrote {Path(args.out) / 'report.txt'}, {Path(args.out) / 'report.json'}, {figures}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weightpack",
        description="Byte-truncation codec and adaptive-precision training harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pack", help="pack a float32 stream into a container file")
    p.add_argument("--input", required=True, help="raw little-endian float32 file, or .csv/.txt")
    p.add_argument("--round-to", type=int, choices=(1, 2, 3, 4), required=True,
                   help="bytes kept per weight")
    p.add_argument("--output", required=True, help="container file to write")

    p = sub.add_parser("unpack", help="restore float32 weights from a container file")
    p.add_argument("--input", required=True, help="container file")
    p.add_argument("--output", required=True, help="raw float32 file, or .csv/.txt")

    p = sub.add_parser("bench-codec", help="benchmark the codec paths")
    p.add_argument("--sizes", type=_int_list, default=[1_000_000],
                   help="comma-separated weight counts (default 1000000)")
    p.add_argument("--round-tos", type=_int_list, default=[1, 2, 3, 4])
    p.add_argument("--workers", type=_int_list, default=[1, 2, 8])
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--check-size", type=int, default=1_000_000,
                   help="input size of the equivalence precheck")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", help="also write results to this CSV file")

    p = sub.add_parser("train", help="run a training experiment")
    p.add_argument("--config", help="experiment config file")
    p.add_argument("--seed", type=int, help="RNG seed (required)")
    p.add_argument("--out", help="output directory for run artifacts")
    p.add_argument("--mode", choices=MODES, help="override the config's [run] mode")
    p.add_argument("--print-defaults", action="store_true",
                   help="print the default config file and exit")

    p = sub.add_parser("report", help="render tables and figures for finished runs")
    p.add_argument("--run", action="append", required=True,
                   help="training run directory (repeat to compare runs)")
    p.add_argument("--out", required=True, help="report output directory")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "pack":
        return _cmd_pack(args)
    if args.command == "unpack":
        return _cmd_unpack(args)
    if args.command == "bench-codec":
        return _cmd_bench(args)
    if args.command == "train":
        return _cmd_train(args, parser)
    return _cmd_report(args)


if __name__ == "__main__":
    sys.exit(main())
