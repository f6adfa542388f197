"""Command-line entry point: ``scma sweep`` and ``scma dfg``."""

from __future__ import annotations

import argparse
import itertools
import sys
from fractions import Fraction

from . import dfg as dfgmod
from .decoder import ALGORITHMS, APPROXIMATIONS, ConfigError, DecoderConfig
from .fixedpoint import Quantization
from .sim import SweepConfig, format_tradeoff, parse_snr_grid, run_sweep, tradeoff_report


def _csv_list(text: str, cast=str) -> list:
    return [cast(t.strip()) for t in text.split(",") if t.strip()]


def _onoff(text: str) -> bool:
    t = text.lower()
    if t in ("on", "true", "1", "yes"):
        return True
    if t in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scma", description="SCMA decoding experiments and DFG scheduling analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    sw = sub.add_parser("sweep", help="Monte-Carlo error-rate sweep",
                        description="Simulate decoder variants over an Eb/N0 grid and write CSV. "
                                    "Comma lists in --algorithm, --approx and --iters form every combination.")
    sw.add_argument("--codebook", metavar="FILE", help="codebook JSON (default: shipped reference codebook)")
    sw.add_argument("--snr-db", default="0:12:2", metavar="A:B:STEP", help="Eb/N0 grid in dB, or a comma list")
    sw.add_argument("--frames", type=int, default=10000, help="frames per SNR point")
    sw.add_argument("--algorithm", default="maxlog", help=f"one or more of {'|'.join(ALGORITHMS)}")
    sw.add_argument("--approx", default="exact", help=f"one or more of {'|'.join(APPROXIMATIONS)}")
    sw.add_argument("--iters", default="5", help="maximum iterations (comma list allowed)")
    sw.add_argument("--early-term", nargs="?", const=0.01, type=float, default=None, metavar="EPS",
                    help="stop once beliefs are stable (default EPS 0.01)")
    sw.add_argument("--adapt", nargs="?", const="0.01,1.1,0.9", default=None, metavar="EPS,ALPHA,BETA",
                    help="self-adaption (default 0.01,1.1,0.9)")
    sw.add_argument("--monitor", default=None, choices=("both", "r2l", "l2r", "beliefs"),
                    help="what the stability test watches")
    sw.add_argument("--noise-reduction", default="off", metavar="FILE|hadamard|off",
                    help="distributed matrix applied across resources")
    sw.add_argument("--quantize", type=_onoff, default=False, metavar="on|off", help="fixed-point decoder model")
    sw.add_argument("--oracle", type=_onoff, default=False, metavar="on|off", help="add the exhaustive ML decoder")
    sw.add_argument("--fading", default="awgn", choices=("awgn", "rayleigh"))
    sw.add_argument("--stop-errors", type=int, default=None, metavar="N",
                    help="end a point early once every variant has N block errors")
    sw.add_argument("--batch", type=int, default=4096, help="frames decoded per vectorized batch")
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--out", metavar="FILE.csv", help="CSV destination (default: stdout)")
    sw.add_argument("--tradeoff", action="store_true", help="print the 1%% BLER trade-off table to stderr")
    sw.add_argument("--dump-config", action="store_true", help="print the resolved configuration as JSON and exit")

    dg = sub.add_parser("dfg", help="folding, lifetime, register and iteration-bound analysis")
    dg.add_argument("--graph", required=True, metavar="FILE", help="plain-text DFG")
    dg.add_argument("--fold", metavar="SPEC", help="folding sets file (may also be inside --graph)")
    dg.add_argument("--report", default="all", choices=("folding", "lifetime", "alloc", "bound", "all"))
    dg.add_argument("--times", default=None, metavar="SYM=VAL,...",
                    help="values for symbolic node times, e.g. T_A=2,T_C=1,T_S=1")
    dg.add_argument("--csv", metavar="FILE", help="also write the report as CSV")
    return parser


def sweep_config(args) -> SweepConfig:
    quant = Quantization() if args.quantize else None
    extra = {}
    if args.adapt is not None:
        eps, alpha, beta = _csv_list(args.adapt, float)
        extra.update(self_adaption=True, epsilon=eps, alpha=alpha, beta=beta)
    elif args.early_term is not None:
        extra.update(early_termination=True, epsilon=args.early_term)
    if args.monitor:
        extra["monitor"] = args.monitor
    variants = tuple(
        DecoderConfig(algorithm=a, approximation=ap, max_iterations=i, quantization=quant, **extra)
        for a, ap, i in itertools.product(_csv_list(args.algorithm), _csv_list(args.approx),
                                          _csv_list(args.iters, int))
    )
    return SweepConfig(
        snr_db=parse_snr_grid(args.snr_db),
        frames=args.frames,
        variants=variants,
        seed=args.seed,
        oracle=args.oracle,
        codebook=args.codebook,
        noise_reduction=args.noise_reduction,
        fading=args.fading,
        stop_errors=args.stop_errors,
        batch=args.batch,
        out=args.out,
    )


def cmd_sweep(args) -> int:
    cfg = sweep_config(args)
    if args.dump_config:
        print(cfg.dumps())
        return 0
    result = run_sweep(cfg)
    if not cfg.out:
        sys.stdout.write(result.to_csv())
    if args.tradeoff:
        print(format_tradeoff(tradeoff_report(result)), file=sys.stderr)
    return 0


def _times(text: str | None) -> dict[str, Fraction] | None:
    if not text:
        return None
    out = {}
    for item in _csv_list(text):
        key, _, value = item.partition("=")
        out[key.strip()] = Fraction(value.strip())
    return out


def cmd_dfg(args) -> int:
    paths = [args.graph] + ([args.fold] if args.fold else [])
    graph, spec = dfgmod.load(*paths)
    text, table = dfgmod.report(graph, spec, args.report, _times(args.times))
    print(text)
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(table)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_dfg(args)
    except (ConfigError, dfgmod.DfgError, ValueError, OSError) as exc:
        print(f"scma: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
