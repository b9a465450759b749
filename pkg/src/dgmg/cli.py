"""Command-line benchmark harness.

Subcommands: ``table`` (contraction tables), ``converge`` (manufactured-
solution rate study), ``eigs`` (extreme-eigenvalue report), ``props``
(identity/property suite), ``kernels`` (compiled-vs-python backend
benchmark).  Any flag may also be supplied through a line-oriented
``key = value`` config file via --config; command-line flags override the
file.
"""

import argparse
import sys

import numpy as np

from . import __version__
from .bench import (ExperimentConfig, benchmark_backends, convergence_study,
                    format_benchmark, format_rates, format_table, run_table,
                    write_csv)
from .errors import ConfigError
from .hierarchy import build_hierarchy
from .props import format_checks, run_identity_checks

DOMAIN_ALIASES = {
    "square": "unit_square", "unit_square": "unit_square",
    "lshaped": "l_shaped", "l_shaped": "l_shaped", "l": "l_shaped",
}

DEFAULTS = {
    "domain": "unit_square",
    "beta": [1e-2],
    "levels": 5,
    "m": [1, 2, 4, 8, 16, 32, 64],
    "cycle": "W",
    "sigma": 6.0,
    "seed": 0,
    "out": None,
    "format": "table",
    "backend": None,
    "starts": 3,
    "max_cycles": 60,
    "inner_smoothing": 4,
    "inner_cycles": 1,
    "inner_smoother": "block_sym_gs",
    "count": 20,
    "repeat": 3,
    "quiet": None,
}

_PARSERS = {
    "domain": lambda s: DOMAIN_ALIASES[s.lower()],
    "beta": lambda s: [float(v) for v in s.split(",")],
    "m": lambda s: [int(v) for v in s.split(",")],
    "levels": int, "cycle": str, "sigma": float, "seed": int, "out": str,
    "format": str, "backend": str, "starts": int, "max_cycles": int,
    "inner_smoothing": int, "inner_cycles": int, "inner_smoother": str,
    "count": int, "repeat": int,
}


def _domain(arg):
    try:
        return DOMAIN_ALIASES[arg.lower()]
    except KeyError:
        raise argparse.ArgumentTypeError(
            f"unknown domain {arg!r} (choose square or lshaped)") from None


def parse_config_file(path):
    """Parse a line-oriented `key = value` file; '#' starts a comment.
    Repeatable keys (beta, m) take comma-separated lists."""
    values = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"bad config line (need key = value): {raw!r}")
            key, _, val = line.partition("=")
            key = key.strip().replace("-", "_")
            if key not in _PARSERS:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _PARSERS[key](val.strip())
    return values


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dgmg",
        description="beta-robust multigrid benchmark for DG optimal control")
    parser.add_argument("--version", action="version",
                        version=f"dgmg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--domain", type=_domain)
        p.add_argument("--beta", action="append", type=float)
        p.add_argument("--levels", type=int)
        p.add_argument("--sigma", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--format", choices=("table", "csv"))
        p.add_argument("--backend", choices=("compiled", "python"))
        p.add_argument("--inner-smoothing", type=int)
        p.add_argument("--inner-cycles", type=int)
        p.add_argument("--inner-smoother")
        return p

    p = add_common(sub.add_parser("table", help="contraction-number tables"))
    p.add_argument("--m", action="append", type=int)
    p.add_argument("--cycle", choices=("w", "v", "W", "V"))
    p.add_argument("--starts", type=int)
    p.add_argument("--max-cycles", type=int)
    p.add_argument("--quiet", action="store_const", const=True)

    add_common(sub.add_parser("converge", help="manufactured-solution rates"))
    add_common(sub.add_parser("eigs", help="extreme-eigenvalue bound report"))

    p = add_common(sub.add_parser("props", help="identity/property suite"))
    p.add_argument("--count", type=int)

    p = add_common(sub.add_parser("kernels",
                                  help="benchmark compiled vs python core"))
    p.add_argument("--m", action="append", type=int)
    p.add_argument("--repeat", type=int)
    return parser


def resolve_options(args):
    """Merge precedence: command-line flag > config file > built-in default."""
    from_file = parse_config_file(args.config) if args.config else {}
    opts = {}
    for key, fallback in DEFAULTS.items():
        explicit = getattr(args, key, None)
        if explicit is not None:
            opts[key] = explicit
        elif key in from_file:
            opts[key] = from_file[key]
        else:
            opts[key] = fallback
    return opts


def main(argv=None):
    args = build_parser().parse_args(argv)
    o = resolve_options(args)
    betas = tuple(o["beta"])

    if args.command == "table":
        cfg = ExperimentConfig(
            domain=o["domain"], betas=betas, levels=o["levels"],
            m_values=tuple(o["m"]), cycle=o["cycle"].upper(),
            sigma=o["sigma"], seed=o["seed"], output=o["out"],
            format=o["format"], starts=o["starts"],
            max_cycles=o["max_cycles"],
            inner_smoothing=o["inner_smoothing"],
            inner_cycles=o["inner_cycles"],
            inner_smoother=o["inner_smoother"], backend=o["backend"])
        progress = None
        if not o["quiet"]:
            def progress(beta, k, m, res, secs):
                print(f"beta={beta:g} k={k} m={m}: {res.value:.3e} "
                      f"[{res.flag}, {res.cycles_used} cycles, {secs:.1f}s]",
                      file=sys.stderr)
        results = run_table(cfg, progress=progress)
        if cfg.output is None:
            if cfg.format == "csv":
                write_csv(results, sys.stdout)
            else:
                for t in results:
                    print(format_table(t))
        return 0

    if args.command == "converge":
        for beta in betas:
            rates = convergence_study(o["domain"], beta, o["levels"],
                                      sigma=o["sigma"])
            print(format_rates(rates))
        return 0

    if args.command == "eigs":
        for beta in betas:
            stack = build_hierarchy(
                o["domain"], o["levels"], beta, sigma=o["sigma"],
                seed=o["seed"], inner_smoothing=o["inner_smoothing"],
                inner_cycles=o["inner_cycles"],
                inner_smoother=o["inner_smoother"], backend=o["backend"])
            print(f"# domain={o['domain']} beta={beta:.1e} dgmg {__version__}")
            print(f"{'k':>2} {'lambda_min':>12} {'lambda_max':>12} "
                  f"{'stiffness':>12} {'bound ratio':>12} {'converged':>10}")
            for k in range(stack.num_levels):
                e = stack.eigs[k]
                stiff = np.sqrt(beta) / stack.h2(k)
                print(f"{k:>2} {e.lambda_min:12.4e} {e.lambda_max:12.4e} "
                      f"{stiff:12.4e} {e.lambda_max / (stiff + 1):12.4e} "
                      f"{str(e.converged):>10}")
            print()
        return 0

    if args.command == "props":
        failed = False
        for beta in betas:
            stack = build_hierarchy(
                o["domain"], o["levels"], beta, sigma=o["sigma"],
                seed=o["seed"], inner_smoothing=o["inner_smoothing"],
                inner_cycles=o["inner_cycles"],
                inner_smoother=o["inner_smoother"], backend=o["backend"])
            checks = run_identity_checks(stack, count=o["count"], seed=o["seed"])
            print(f"# domain={o['domain']} beta={beta:.1e}")
            print(format_checks(checks))
            print()
            failed = failed or any(not c.passed for c in checks)
        return 1 if failed else 0

    if args.command == "kernels":
        rows = benchmark_backends(domain=o["domain"], levels=o["levels"],
                                  beta=betas[0], m=o["m"][0],
                                  repeats=o["repeat"], seed=o["seed"])
        print(format_benchmark(rows))
        return 0

    raise ConfigError(f"unknown command {args.command!r}")


def entry():
    sys.exit(main())
