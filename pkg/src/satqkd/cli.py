"""Command-line front end: ``satqkd {channel,keyrate,scan,figure}``.

Tables are written as UTF-8 CSV (LF line endings, 12 significant digits)
to ``--out DIR`` or, without ``--out``, to standard output.  Human-readable
summaries go to standard error.

Exit codes: 0 success, 2 configuration error, 3 physics-domain error,
4 solver failure.
"""

import argparse
import csv
import io
import logging
import math
import sys
import warnings
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import figures, scan
from .channel import aperture_eta, link_report
from .config import KEY_INDEX, SWEEP_VARIABLES, RunConfig
from .errors import ConfigError, PhysicsDomainError, SolverError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PHYSICS = 3
EXIT_SOLVER = 4

KEYRATE_COLUMNS = [
    "eta_total",
    "xi_effective",
    "rate_bits_per_use",
    "lower_bound",
    "gap",
    "p_pass",
    "delta_ec",
    "iterations",
    "status",
]
SCAN_COLUMNS = ["swept_value"] + KEYRATE_COLUMNS
CHANNEL_COLUMNS = ["r_m", "eta"]

log = logging.getLogger("satqkd")


class UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    # raise instead of exiting so usage errors share the config-error path
    def error(self, message):
        raise UsageError(message)


def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    if isinstance(value, tuple):
        return ";".join(fmt(v) for v in value)
    return str(value)


def write_csv(columns, rows, path=None):
    """Write ``rows`` (lists of raw values) under ``columns``; stdout if no path."""
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def _keyrate_values(eta, xi, kr):
    return [eta, xi, kr.rate, kr.lower_bound, kr.gap, kr.p_pass, kr.delta_ec, kr.iterations, kr.status]


def _row_values(row, factor=1.0):
    value = row.value if isinstance(row.value, tuple) else row.value / factor
    return [
        value,
        row.eta_total,
        row.xi_effective,
        row.rate,
        row.lower_bound,
        row.gap,
        row.p_pass,
        row.delta_ec,
        row.iterations,
        row.status,
    ]


def _out_path(args, name):
    return None if args.out is None else Path(args.out) / name


# -- subcommands ------------------------------------------------------------


def cmd_channel(cfg, args):
    geom, atm, det = cfg.geometry(), cfg.atmosphere_params(), cfg.detector_model()
    rep = link_report(geom, atm, det, cfg.noise.xi_ch, cfg.protocol.detection)
    summary = {
        "eta_ext": rep.eta_ext,
        "w_rx_m": rep.w_rx,
        "sigma_r_m": rep.sigma_r,
        "eta_geo": rep.eta_geo,
        "eta_atmospheric": rep.eta_atmospheric,
        "eta_dev": rep.eta_dev,
        "eta_total": rep.eta_total,
        "xi_effective": rep.xi_effective,
        "r_s_m": rep.r_s,
        "yura_ratio": rep.yura_ratio,
    }
    for key, value in summary.items():
        print(f"{key} = {fmt(value)}")
    if args.out is not None:
        r = np.linspace(0.0, max(4 * rep.sigma_r, 2 * geom.aperture), 201)
        write_csv(CHANNEL_COLUMNS, [[x, aperture_eta(x, rep.w_rx, geom.aperture)] for x in r],
                  _out_path(args, "channel_eta_r.csv"))
    return EXIT_OK


def cmd_keyrate(cfg, args):
    sc = cfg.scenario()
    chan, kr = scan.evaluate(sc)
    log.info("solver finished in %.1f s", kr.solver.seconds)
    print(
        f"rate = {fmt(kr.rate)} bits/use ({'secure' if kr.secure else 'insecure'}), "
        f"gap = {kr.gap:.2e}, status = {kr.status}",
        file=sys.stderr,
    )
    write_csv(KEYRATE_COLUMNS, [_keyrate_values(chan.eta_total, chan.xi_effective, kr)],
              _out_path(args, "keyrate.csv"))
    return EXIT_OK


def _report_rows(rows, label):
    for r in rows:
        log.info("%s: %s -> rate %s (%s) in %.1f s", label, fmt(r.value), fmt(r.rate), r.status, r.seconds)
    failed = [r for r in rows if not r.ok]
    for r in failed:
        print(f"{label}: point {fmt(r.value)} failed: {r.message}", file=sys.stderr)
    return len(rows) - len(failed)


def cmd_scan(cfg, args):
    spec = cfg.sweep_spec()
    _, factor = SWEEP_VARIABLES[cfg.sweep.variable]
    rows = scan.sweep(spec, jobs=args.jobs, deterministic=args.deterministic)
    write_csv(SCAN_COLUMNS, [_row_values(r, factor) for r in rows], _out_path(args, "scan.csv"))
    return EXIT_OK if _report_rows(rows, "scan") else EXIT_SOLVER


def cmd_figure(cfg, args):
    curves = figures.figure_curves(args.name, args.fidelity, cfg.scenario())
    out = Path(args.out) if args.out is not None else Path(args.name)
    any_ok = False
    for curve, spec in curves:
        factor = math.pi / 180 if spec.variable == scan.ZENITH else 1.0
        rows = scan.sweep(spec, jobs=args.jobs, deterministic=args.deterministic)
        path = out / f"{args.name}_{curve}.csv"
        write_csv(SCAN_COLUMNS, [_row_values(r, factor) for r in rows], path)
        print(f"wrote {path}", file=sys.stderr)
        any_ok |= _report_rows(rows, curve) > 0
    return EXIT_OK if any_ok else EXIT_SOLVER


COMMANDS = {"channel": cmd_channel, "keyrate": cmd_keyrate, "scan": cmd_scan, "figure": cmd_figure}


# -- argument parsing -------------------------------------------------------


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="YAML run configuration")
    common.add_argument("--out", metavar="DIR", help="directory for CSV output (default: stdout)")
    common.add_argument("--jobs", type=int, default=1, metavar="N", help="worker processes for sweeps")
    common.add_argument("--deterministic", action="store_true", help="single-threaded numerical kernels")
    common.add_argument("--dump-config", action="store_true", help="print the effective configuration and exit")
    common.add_argument("-v", "--verbose", action="count", default=0)
    group = common.add_argument_group("configuration overrides")
    for key, section in KEY_INDEX.items():
        group.add_argument(f"--{key}", dest=f"set_{key}", metavar="VALUE", help=f"{section}.{key}")

    parser = _Parser(prog="satqkd", description="QPSK CV-QKD key rates over satellite-ground links")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("channel", parents=[common], help="link budget report")
    sub.add_parser("keyrate", parents=[common], help="single key-rate evaluation")
    sub.add_parser("scan", parents=[common], help="sweep one variable from the config's sweep section")
    fig = sub.add_parser("figure", parents=[common], help="preset figure sweeps")
    fig.add_argument("name", help=", ".join(figures.FIGURES))
    fig.add_argument("fidelity", nargs="?", default="fast", help="fast (default) or full")
    return parser


def load_config(args):
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    for key in KEY_INDEX:
        text = getattr(args, f"set_{key}")
        if text is not None:
            cfg.override(key, text)
    return cfg


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as err:
        print(f"satqkd: error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("default")
    if args.deterministic:
        from threadpoolctl import threadpool_limits

        limiter = threadpool_limits(1)
    else:
        limiter = nullcontext()
    with limiter:
        try:
            cfg = load_config(args)
            if args.dump_config:
                sys.stdout.write(cfg.dump())
                return EXIT_OK
            return COMMANDS[args.command](cfg, args)
        except ConfigError as err:
            print(f"satqkd: configuration error: {err}", file=sys.stderr)
            return EXIT_CONFIG
        except PhysicsDomainError as err:
            print(f"satqkd: outside model domain: {err}", file=sys.stderr)
            return EXIT_PHYSICS
        except SolverError as err:
            print(f"satqkd: solver failure: {err}", file=sys.stderr)
            return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
