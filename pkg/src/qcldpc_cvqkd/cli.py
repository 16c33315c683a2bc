"""Command-line harness.

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 experiment infeasible.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import math
import sys
from dataclasses import replace

from . import __version__
from .construction import (MET_RATE_01, MET_RATE_02, ConstructionError, girth,
                           load_distribution, plan_blocks, qc_peg, realized_distribution,
                           validate_distribution)
from .erasure import EraseConfig
from .experiment import (FIXTURES, SweepConfig, fer_sweep, fixed_arithmetic, read_sweep_csv,
                         snr_grid, write_sweep_csv)
from .pipeline_model import PipelineError, ThroughputModel, bram_estimate_kbits, throughput
from .qc_code import BaseMatrixError, expand, format_support, load_base, save_base, stats
from .quantize import parse_format
from .skr import SkrError, fit_fer, gain, optimize_va, preset, realtime_skr

log = logging.getLogger("qcldpc_cvqkd")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 0, 1, 2, 3

SKR_COLUMNS = ("R", "d_km", "erase", "V_A", "snr", "fer", "K_opt", "G_K", "gain_ratio",
               "realtime_skr_mbps")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------------------------------------------------------
# helpers


@contextlib.contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _load_code(args):
    if getattr(args, "fixture", None):
        return FIXTURES[args.fixture].code()
    if not getattr(args, "code", None):
        raise UsageError("give --code FILE or --fixture NAME")
    try:
        base = load_base(args.code)
    except OSError as exc:
        raise BaseMatrixError(f"cannot read {args.code}: {exc.strerror}") from None
    return expand(base, rate=args.rate) if getattr(args, "rate", None) else expand(base)


def _distribution(args):
    if args.dist:
        return load_distribution(args.dist)
    return {"0.1": MET_RATE_01, "0.2": MET_RATE_02}[args.met_dist]


def _dump(obj, fmt, out):
    if fmt == "json":
        json.dump(obj, out, indent=2, sort_keys=True)
        out.write("\n")
    else:
        w = csv.writer(out, lineterminator="\n")
        rows = obj if isinstance(obj, list) else [obj]
        keys = list(rows[0])
        w.writerow(keys)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in keys])


def _fmt(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) else f"{v:.6g}"
    return v


# --------------------------------------------------------------------------
# commands


def cmd_construct(args) -> int:
    dist = _distribution(args)
    report = validate_distribution(dist)
    # Socket imbalance in tabulated fractions is rebalanced by the block
    # plan and checked on the realised distribution below.
    fatal = [e for e in report.errors if "imbalanced" not in e]
    if fatal:
        log.error("distribution invalid: %s", "; ".join(fatal))
        return EXIT_DATA
    for e in report.errors:
        log.warning("%s (rebalanced per block)", e)
    base = qc_peg(dist, args.n, args.z, args.seed)
    if args.output:
        save_base(base, args.output)
    else:
        save_base(base, sys.stdout)
    code = expand(base)
    st = stats(code)
    plan = plan_blocks(dist, args.n, args.z)
    realized = realized_distribution(base, plan, dist)
    check = validate_distribution(realized, n=args.n // args.z)
    g = girth(code)
    summary = {"n": st["n"], "m": st["m"], "n_total": st["n_total"], "n_avr": st["n_avr"],
               "girth": g if g is not None else ">=12", "valid": check.ok,
               "col_hist": st["col_hist"], "row_hist": st["row_hist"]}
    print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    return EXIT_OK if check.ok else EXIT_DATA


def cmd_expand(args) -> int:
    code = _load_code(args)
    with _output(args.output) as out:
        out.write(format_support(code))
    return EXIT_OK


def cmd_validate(args) -> int:
    code = _load_code(args)
    st = stats(code)
    g = girth(code)
    out = {"n": st["n"], "m": st["m"], "n_total": st["n_total"], "n_avr": st["n_avr"],
           "girth": g if g is not None else ">=12", "row_hist": st["row_hist"],
           "col_hist": st["col_hist"]}
    ok = True
    if args.dist or args.met_dist:
        dist = _distribution(args)
        plan = plan_blocks(dist, code.n, code.Z)
        need = (len(plan.chk_deg), len(plan.var_deg))
        if need != (code.base.rows, code.base.cols):
            log.error("base is %dx%d, distribution needs %dx%d", code.base.rows,
                      code.base.cols, *need)
            return EXIT_DATA
        rep = validate_distribution(realized_distribution(code.base, plan, dist),
                                    n=code.base.cols)
        out["distribution_ok"] = rep.ok
        out["errors"] = rep.errors
        ok = rep.ok
    if args.min_girth and (g is not None and g < args.min_girth):
        out["girth_ok"] = False
        ok = False
    json.dump(out, sys.stdout, sort_keys=True)
    sys.stdout.write("\n")
    return EXIT_OK if ok else EXIT_DATA


def cmd_fer_sweep(args) -> int:
    code = _load_code(args)
    fx = FIXTURES.get(args.fixture) if args.fixture else None
    if args.snrs:
        snrs = tuple(float(s) for s in args.snrs.split(","))
    else:
        lo, hi = (args.snr_min, args.snr_max)
        if lo is None or hi is None:
            if fx is None:
                raise UsageError("give --snrs or --snr-min/--snr-max")
            lo, hi = fx.snr_range
        snrs = snr_grid(lo, hi, args.snr_step)
    if args.format is None:
        fmt = fx.fmt if fx else None
    else:
        fmt = None if args.format == "float" else parse_format(args.format)
    t_max = args.t_max or (fx.t_max if fx else 13)
    delta = args.delta
    if delta is None:
        delta = fx.delta if fx else (180 if fmt is not None and fmt.w >= 10 else 40)
        if fmt is None:
            delta = delta / 2 ** (fx.fmt.f_bits if fx else 3)
    erase_cfg = None if args.no_erase else EraseConfig(delta=delta, max_flips=args.max_flips,
                                                      mode=args.erase_mode)
    cfg = SweepConfig(snrs=snrs, frames=args.frames, seed=args.seed, t_max=t_max,
                      arithmetic=fixed_arithmetic(fmt, args.guard_bits), erase=erase_cfg,
                      delta=delta, batch=args.batch, workers=args.workers)
    log.info("fer-sweep: %d points x %d frames, %s, t_max=%d, delta=%g", len(snrs),
             args.frames, fmt or "float", t_max, delta)
    pts = fer_sweep(code, cfg, progress=lambda p: log.info(
        "snr %.4f: raw %d, erased %d, N_err %d", p.snr, p.failures_raw,
        p.failures_after_erase, p.n_err))
    with _output(args.output) as out:
        write_sweep_csv(pts, out)
    return EXIT_OK


def cmd_throughput(args) -> int:
    if args.fixture or args.code:
        code = _load_code(args)
        model = ThroughputModel.for_code(code, f=args.f, p=args.p, t_max=args.t_max,
                                         erase_iterations=args.erase_iterations,
                                         decoders=args.decoders)
        st = stats(code)
        m = code.m
    else:
        if args.n is None or args.rate is None or args.n_avr is None:
            raise UsageError("give a code or --n, --rate and --n-avr")
        k = (1 - args.rate) * args.n * args.n_avr / args.p
        model = ThroughputModel(f=args.f, p=args.p, t_max=args.t_max, n=args.n,
                                rate=args.rate, n_avr=args.n_avr,
                                d_e=args.erase_iterations * k, decoders=args.decoders)
        st = {"n_total": model.edges}
        m = int(round((1 - args.rate) * args.n))
    res = throughput(model)
    row = {
        "N": model.n, "R": model.rate, "N_avr": model.n_avr, "n_total": st["n_total"],
        "f_MHz": model.f / 1e6, "p": model.p, "t_max": model.t_max, "K": res["K"],
        "D_e_cycles": model.d_e, "D_e_iterations": args.erase_iterations,
        "D_e_normalized": model.d_e_normalized, "decoders": model.decoders,
        "T_eq6_mbps": res["T_eq6"] / 1e6, "T_eq7_mbps": res["T_eq7"] / 1e6,
        "T_eq8_mbps": res["T_eq8"] / 1e6, "T_total_mbps": res["T_total"] / 1e6,
    }
    if args.width:
        row["bram_kbit"] = bram_estimate_kbits(model.n, int(st["n_total"]), m, args.width)["total"]
    with _output(args.output) as out:
        _dump(row, args.out_format, out)
    return EXIT_OK


def _fer_points(points, column):
    return [(p.snr, getattr(p, column)) for p in points]


def cmd_skr(args) -> int:
    if args.sweep:
        with open(args.sweep) as fh:
            pts = read_sweep_csv(fh)
        with_pts, without_pts = pts, pts
    elif args.with_erase and args.without_erase:
        with open(args.with_erase) as fh:
            with_pts = read_sweep_csv(fh)
        with open(args.without_erase) as fh:
            without_pts = read_sweep_csv(fh)
        lo = max(min(p.snr for p in with_pts), min(p.snr for p in without_pts))
        hi = min(max(p.snr for p in with_pts), max(p.snr for p in without_pts))
        if lo >= hi:
            raise SkrError("the two sweeps do not overlap in SNR")
    else:
        raise UsageError("give --sweep FILE or both --with-erase and --without-erase")
    frames = with_pts[0].frames
    m_with = fit_fer(_fer_points(with_pts, "fer_erased"), frames=frames)
    m_without = fit_fer(_fer_points(without_pts, "fer_raw"), frames=frames)
    # The detector stays calibrated to the reference link; --distance and
    # --xi then move the link away from that point.
    params = preset(args.rate)
    if args.distance is not None:
        params = replace(params, d=args.distance)
    if args.xi is not None:
        params = replace(params, xi=args.xi)
    bounds = (args.va_min, args.va_max)
    r_with = optimize_va(params, m_with, bounds)
    r_without = optimize_va(params, m_without, bounds)
    g = gain(r_with, r_without)
    ratio = r_with.K_opt / r_without.K_opt if r_without.K_opt > 0 else math.inf
    rows = []
    for flag, r in (("yes", r_with), ("no", r_without)):
        rows.append({"R": params.rate, "d_km": params.d, "erase": flag, "V_A": r.V_A,
                     "snr": r.snr, "fer": r.fer, "K_opt": r.K_opt, "G_K": g,
                     "gain_ratio": ratio,
                     "realtime_skr_mbps": realtime_skr(r.K_opt, args.throughput_mbps * 1e6) / 1e6})
        if r.zero_rate:
            log.warning("erase=%s: key rate is non-positive over the whole V_A range", flag)
    with _output(args.output) as out:
        _dump(rows, args.out_format, out)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _read_config(path):
    out = {}
    with open(path) as fh:
        for k, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{k}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def _code_args(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--code", help="base-matrix file")
    g.add_argument("--fixture", choices=sorted(FIXTURES), help="shipped fixture code")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="qcldpc", description="QC-LDPC reconciliation experiments")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--config", help="key=value file with option defaults")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("construct", help="build a QC MET-LDPC base matrix")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--dist", help="degree-distribution file")
    g.add_argument("--met-dist", choices=("0.1", "0.2"), help="shipped distribution")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--z", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("expand", help="list the expanded parity-check matrix")
    _code_args(p)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("validate", help="check a base-matrix file")
    _code_args(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--dist")
    g.add_argument("--met-dist", choices=("0.1", "0.2"))
    p.add_argument("--min-girth", type=int, default=0)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("fer-sweep", help="FER against SNR with and without erase")
    _code_args(p)
    p.add_argument("--rate", type=float, help="declared code rate (default from base)")
    p.add_argument("--snrs", help="comma-separated SNR list")
    p.add_argument("--snr-min", type=float)
    p.add_argument("--snr-max", type=float)
    p.add_argument("--snr-step", type=float, default=0.001)
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-max", type=int)
    p.add_argument("--format", help="'float' or 'w,I[,F]' (default: fixture format, else float)")
    p.add_argument("--guard-bits", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--max-flips", type=int, default=1000)
    p.add_argument("--no-erase", action="store_true")
    p.add_argument("--erase-mode", choices=("greedy", "peel", "exhaustive"), default="greedy")
    p.add_argument("--batch", type=int, default=50)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_fer_sweep)

    p = sub.add_parser("throughput", help="throughput equations for a code")
    _code_args(p)
    p.add_argument("--n", type=int)
    p.add_argument("--rate", type=float)
    p.add_argument("--n-avr", type=float)
    p.add_argument("--f", type=float, default=100e6, help="clock in Hz")
    p.add_argument("--p", type=int, default=100)
    p.add_argument("--t-max", type=int, default=13)
    p.add_argument("--erase-iterations", type=float, default=0.0)
    p.add_argument("--decoders", type=int, default=1)
    p.add_argument("--width", type=int, help="message width for the BRAM estimate")
    p.add_argument("--out-format", choices=("csv", "json"), default="csv")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_throughput)

    p = sub.add_parser("skr-opt", help="optimise V_A with and without erase")
    p.add_argument("--sweep", help="fer-sweep CSV with both FER columns")
    p.add_argument("--with-erase", help="sweep whose fer_erased column is used")
    p.add_argument("--without-erase", help="sweep whose fer_raw column is used")
    p.add_argument("--rate", type=float, choices=(0.1, 0.2), required=True)
    p.add_argument("--distance", type=float)
    p.add_argument("--xi", type=float)
    p.add_argument("--va-min", type=float, default=0.5)
    p.add_argument("--va-max", type=float, default=20.0)
    p.add_argument("--throughput-mbps", type=float, default=0.0)
    p.add_argument("--out-format", choices=("csv", "json"), default="csv")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_skr)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    cfg_idx = [i for i, a in enumerate(argv) if a == "--config" or a.startswith("--config=")]
    if cfg_idx:
        i = cfg_idx[0]
        path = argv[i].split("=", 1)[1] if "=" in argv[i] else (argv[i + 1] if i + 1 < len(argv) else None)
        if path is None:
            ap.error("--config needs a file")
        try:
            defaults = _read_config(path)
        except (OSError, UsageError) as exc:
            print(f"qcldpc: {exc}", file=sys.stderr)
            return EXIT_USAGE
        for action in ap._subparsers._group_actions:
            for sp in action.choices.values():
                known = {a.dest: a for a in sp._actions}
                sp.set_defaults(**{k: (known[k].type(v) if known[k].type else v)
                                   for k, v in defaults.items() if k in known})
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(message)s")
    if not getattr(args, "func", None):
        ap.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"qcldpc: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (BaseMatrixError, OSError, PipelineError) as exc:
        print(f"qcldpc: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConstructionError, SkrError) as exc:
        print(f"qcldpc: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"qcldpc: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
