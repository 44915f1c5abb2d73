"""Command-line front end.

Exit codes:
  0  success
  1  selftest failure
  2  usage error
  3  malformed sealed message (shorter than 28 bytes)
  4  authentication failure (tag mismatch)
  5  environment error (entropy failure, unwritable output, I/O error)
  6  key file error (not exactly 32 bytes)
"""

import argparse
import os
import sys
from dataclasses import dataclass, field

from . import bench, envelope, report
from .aead import KEY_SIZE, AuthenticationError
from .vectors import run_selftest

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_USAGE = 2
EXIT_MALFORMED = 3
EXIT_AUTH = 4
EXIT_ENV = 5
EXIT_KEY = 6

DEFAULT_SIZES = (28, 56, 112, 224)


@dataclass
class CampaignGrid:
    sizes: tuple = DEFAULT_SIZES
    runs: int = bench.DEFAULT_RUNS
    warmup_runs: int = bench.DEFAULT_WARMUP
    budgets: tuple = bench.DEFAULT_BUDGETS
    label: str = ""
    entropy: object = field(default=os.urandom, repr=False)

    def __post_init__(self):
        if not self.sizes:
            raise ValueError("grid needs at least one payload size")
        if any(s < 0 for s in self.sizes):
            raise ValueError("payload sizes must be >= 0")

    def configs(self):
        for size in self.sizes:
            yield bench.RunConfig(size, self.runs, self.warmup_runs, self.entropy, self.label)


def run_grid(grid: CampaignGrid, key: bytes, environment=None, **kwargs) -> dict:
    """Run every campaign of ``grid`` and return the consolidated report.

    An aborted campaign yields a report marked partial that still holds the
    samples gathered so far.
    """
    if environment is None:
        environment = bench.environment_probe()
    results = []
    for config in grid.configs():
        try:
            results.append(bench.run_campaign(config, key, grid.budgets, **kwargs))
        except bench.BenchmarkAborted as exc:
            results.append(bench.judge(config, exc.samples, grid.budgets, partial=True))
            return report.build_report(results, environment, partial=True, abort_reason=str(exc))
    return report.build_report(results, environment)


def _sizes(text):
    try:
        sizes = tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"sizes must be comma-separated integers: {text!r}")
    if not sizes or any(s < 0 for s in sizes):
        raise argparse.ArgumentTypeError("sizes must be a non-empty list of integers >= 0")
    return sizes


def _budget(text):
    try:
        return bench.BudgetSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _non_negative(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return value


def build_parser():
    parser = argparse.ArgumentParser(
        prog="icsaead",
        description="ChaCha20-Poly1305 library and ICS latency benchmark.",
        epilog=__doc__.split("\n", 2)[2],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("selftest", help="check the RFC 8439 reference vectors")

    b = sub.add_parser("bench", help="run phase-timed benchmark campaigns")
    b.add_argument("--sizes", type=_sizes, default=DEFAULT_SIZES,
                   help="comma-separated payload sizes in bytes (default 28,56,112,224)")
    b.add_argument("--runs", type=_positive, default=bench.DEFAULT_RUNS)
    b.add_argument("--warmup", type=_non_negative, default=bench.DEFAULT_WARMUP)
    b.add_argument("--budget", type=_budget, action="append", metavar="NAME=LIMIT_MS",
                   help="latency budget, repeatable (default GOOSE=4, IEC 60834-1=10, SCADA=1000)")
    b.add_argument("--format", choices=("csv", "json"), default="json")
    b.add_argument("--out", default="-", help="report path, '-' for stdout")
    b.add_argument("--key", help="32-byte raw key file (default: random key)")
    b.add_argument("--label", default="")
    b.add_argument("--skip-selftest", action="store_true")

    for name, helptext in (("seal", "encrypt a file into a sealed message"),
                           ("open", "authenticate and decrypt a sealed message")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--key", required=True, help="32-byte raw key file")
        p.add_argument("infile")
        p.add_argument("outfile")

    k = sub.add_parser("keygen", help="write a random 32-byte key file")
    k.add_argument("keyfile")
    return parser


def _err(msg):
    print(f"icsaead: {msg}", file=sys.stderr)


def _load_key(path):
    try:
        return envelope.read_key(path), EXIT_OK
    except envelope.KeyFileError as exc:
        _err(str(exc))
        return None, EXIT_KEY
    except OSError as exc:
        _err(str(exc))
        return None, EXIT_ENV


def cmd_selftest() -> int:
    return EXIT_OK if run_selftest() else EXIT_SELFTEST


def cmd_bench(grid: CampaignGrid, fmt: str, out_path: str, key: bytes = None,
              skip_selftest: bool = False) -> int:
    # Open the output first so an unwritable path fails before any timing.
    try:
        sink = sys.stdout if out_path == "-" else open(out_path, "w")
    except OSError as exc:
        _err(f"cannot write report: {exc}")
        return EXIT_ENV
    try:
        if not skip_selftest and not run_selftest(out=lambda line: print(line, file=sys.stderr)):
            _err("selftest failed; refusing to benchmark")
            return EXIT_SELFTEST
        if key is None:
            key = os.urandom(KEY_SIZE)
        result = run_grid(grid, key)
        sink.write(report.render(result, fmt))
        sink.flush()
    finally:
        if sink is not sys.stdout:
            sink.close()
    if result["partial"]:
        _err(f"benchmark aborted: {result['abort_reason']}")
        return EXIT_ENV
    return EXIT_OK


def cmd_seal(keyfile, infile, outfile) -> int:
    key, code = _load_key(keyfile)
    if key is None:
        return code
    try:
        with open(infile, "rb") as f:
            payload = f.read()
        sealed = envelope.seal(key, payload)
        with open(outfile, "wb") as f:
            f.write(sealed)
    except (OSError, envelope.EntropyError) as exc:
        _err(str(exc))
        return EXIT_ENV
    return EXIT_OK


def cmd_open(keyfile, infile, outfile) -> int:
    key, code = _load_key(keyfile)
    if key is None:
        return code
    try:
        with open(infile, "rb") as f:
            buffer = f.read()
    except OSError as exc:
        _err(str(exc))
        return EXIT_ENV
    try:
        plaintext = envelope.open_sealed(key, buffer)
    except envelope.MalformedMessageError as exc:
        _err(f"malformed message: {exc}")
        return EXIT_MALFORMED
    except AuthenticationError:
        _err("authentication failed: message discarded")
        return EXIT_AUTH
    try:
        with open(outfile, "wb") as f:
            f.write(plaintext)
    except OSError as exc:
        _err(str(exc))
        return EXIT_ENV
    return EXIT_OK


def cmd_keygen(keyfile) -> int:
    try:
        envelope.write_key(keyfile, os.urandom(KEY_SIZE))
    except OSError as exc:
        _err(str(exc))
        return EXIT_ENV
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "selftest":
        return cmd_selftest()
    if args.command == "bench":
        key = None
        if args.key:
            key, code = _load_key(args.key)
            if key is None:
                return code
        grid = CampaignGrid(
            sizes=args.sizes,
            runs=args.runs,
            warmup_runs=args.warmup,
            budgets=tuple(args.budget) if args.budget else bench.DEFAULT_BUDGETS,
            label=args.label,
        )
        return cmd_bench(grid, args.format, args.out, key, args.skip_selftest)
    if args.command == "seal":
        return cmd_seal(args.key, args.infile, args.outfile)
    if args.command == "open":
        return cmd_open(args.key, args.infile, args.outfile)
    return cmd_keygen(args.keyfile)


if __name__ == "__main__":
    sys.exit(main())
