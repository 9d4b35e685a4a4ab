"""Command-line front end: ``ddbound <command> [options]``.

Every command reads an :class:`~ddbound.config.ExperimentConfig` assembled
from (in order) the defaults, ``--preset``, ``--config`` and ``--set``
overrides, and writes CSV, JSON or a sequence file to ``--out`` (stdout by
default). Exit codes: 0 ok, 2 configuration or input error, 3 timing
constraints infeasible, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import ConfigError, ExperimentConfig, load_preset, preset_names
from .error import bound_cauchy, bound_fast, chi, purity_loss, udd_upper_bounds
from .filterfn import filter_magnitude_sq
from .optimize import FeasibilityError, badd, lodd, ofdd
from .sequences import (PulseSequence, format_sequence, make_udd, read_sequence,
                        tailored_udd_n, udd_with_min_interval, uniform_sequence)
from .spectra import FlatMeasure, measure_M, measure_m

__all__ = ["main", "build_parser", "cmd_evaluate", "cmd_filter", "cmd_fig1", "cmd_fig2",
           "cmd_fig3", "format_csv"]

log = logging.getLogger("ddbound")

EXIT_OK, EXIT_CONFIG, EXIT_FEASIBILITY, EXIT_NUMERICAL = 0, 2, 3, 4


# -- output helpers ------------------------------------------------------------


def _cell(v):
    if v is None:
        return "NA"
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def format_csv(header, rows) -> str:
    """CSV text with a header row and 17-significant-digit floats."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _map(fn, items, threads):
    """``[fn(x) for x in items]``, in a process pool when ``threads > 1``."""
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


# -- sequences from the config -------------------------------------------------


def _sequence(cfg: ExperimentConfig, path=None) -> PulseSequence:
    path = path or (cfg["sequence.file"] if cfg["sequence.kind"] == "file" else None)
    if path:
        return read_sequence(path)
    if cfg["sequence.kind"] == "file":
        raise ConfigError("sequence.kind = file needs sequence.file or --sequence")
    n, T = cfg["sequence.n"], cfg["timing.T_ps"]
    if cfg["sequence.kind"] == "free":
        return PulseSequence(T)
    if cfg["sequence.kind"] == "uniform":
        return uniform_sequence(n, T)
    return make_udd(n, T)


def best_feasible_udd(m, T, tau, n_limit, quad):
    """UDD_n (``n <= n_limit``) with the smallest error among those whose
    first interval is at least ``tau``; ``None`` if none is feasible."""
    best = None
    for n in range(1, n_limit + 1):
        seq = make_udd(n, T)
        if seq.min_interval < tau * (1 - 1e-12):
            break  # intervals only shrink with n
        value = chi(seq, m, quad).chi
        if best is None or value < best[1]:
            best = (seq, value)
    return best


# -- commands ------------------------------------------------------------------


def cmd_evaluate(cfg: ExperimentConfig, sequence_path=None):
    m, quad = cfg.measure(), cfg.quadrature()
    seq = _sequence(cfg, sequence_path)
    res = chi(seq, m, quad)
    cb = bound_cauchy(seq, m, quad)
    header = ["n", "T", "chi", "est_abs_error", "purity_loss", "min_interval", "l1_norm",
              "bound_cauchy", "cauchy_divergent"]
    row = [seq.n, seq.T, res.chi, res.est_abs_error, purity_loss(res.chi), seq.min_interval,
           cb.l1_norm, cb.value, cb.divergent]
    return header, [row]


def cmd_filter(cfg: ExperimentConfig, sequence_path=None):
    seq = _sequence(cfg, sequence_path)
    w = np.asarray(cfg["sweep.omega"])
    if np.any(w < 0):
        raise ConfigError("sweep.omega must be non-negative")
    return ["omega", "f_abs2"], list(zip(w.tolist(), np.atleast_1d(filter_magnitude_sq(seq, w))))


def _fig1_row(args):
    x, omega_c, M, m_lambda, params, quad = args
    m = FlatMeasure(omega_c)
    tau = x / omega_c
    n0 = tailored_udd_n(omega_c, tau)
    value = chi(udd_with_min_interval(n0, tau), m, quad).chi
    bound = bound_fast(tau, omega_c, M, params)
    upper = udd_upper_bounds(n0, m_lambda, omega_c, tau).tailored
    return [x, n0, value, bound, upper]


def cmd_fig1(cfg: ExperimentConfig, threads: int = 1):
    """Tailored UDD error against the fast-control lower bound, flat measure."""
    if cfg["measure.kind"] != "flat":
        raise ConfigError("fig1 uses the flat measure; set measure.kind = flat")
    m, quad = cfg.measure(), cfg.quadrature()
    M, m_lambda = measure_M(m, quad), measure_m(m, quad)
    jobs = [(x, m.cutoff, M, m_lambda, cfg.bound_params(), quad) for x in cfg["sweep.omega_c_tau"]]
    rows = _map(_fig1_row, jobs, threads)
    return ["omega_c_tau", "n0", "chi_udd", "bound", "udd_upper"], rows


def _fig2_point(args):
    cfg, T = args
    m, quad, opt = cfg.measure(), cfg.quadrature(), cfg.optimizer()
    tau = cfg["timing.tau_ps"]
    methods = cfg["methods"]
    rows = []

    def add(method, seq):
        rows.append([T, method, seq.n, chi(seq, m, quad).chi, seq.min_interval])

    if "free" in methods:
        add("free", PulseSequence(T))
    if "udd" in methods:
        best = best_feasible_udd(m, T, tau, cfg["optimizer.udd_n_limit"], quad)
        if best is None:
            warnings.warn(f"T={T:g}: no UDD_n with n <= {cfg['optimizer.udd_n_limit']} "
                          f"respects tau={tau:g}")
        else:
            add("udd", best[0])
    badd_res = None
    if "badd" in methods or "lodd" in methods:
        badd_res = badd(m, tau, T, cfg["optimizer.n_limit"], opt, quad)
    if "badd" in methods:
        add("badd", badd_res.best.sequence)
    if "lodd" in methods:
        best = None
        for e in badd_res.per_n:
            res = lodd(m, e.n, T, opt, quad, starts=[e.intervals])
            if best is None or res.chi < best.chi:
                best = res
        add("lodd", best.sequence)
    if "ofdd" in methods:
        best = None
        for n in range(1, cfg["optimizer.n_limit"] + 1):
            seq = ofdd(n, T, m.cutoff, opt, quad).sequence
            value = chi(seq, m, quad).chi
            if best is None or value < best[1]:
                best = (seq, value)
        add("ofdd", best[0])
    return rows


def cmd_fig2(cfg: ExperimentConfig, threads: int = 1):
    """Best-over-n error per method across a sweep of total durations."""
    tau = cfg["timing.tau_ps"]
    points = []
    for T in cfg["sweep.T_ps"]:
        if T < 2 * tau:
            warnings.warn(f"T={T:g} < 2 tau; skipped")
            continue
        points.append((cfg, T))
    rows = [r for chunk in _map(_fig2_point, points, threads) for r in chunk]
    return ["T", "method", "n_best", "chi", "min_interval"], rows


def adapt_sequences(cfg: ExperimentConfig, threads: int = 1) -> dict:
    """Sequences for each configured method, optimised for the configured measure."""
    m, quad, opt = cfg.measure(), cfg.quadrature(), cfg.optimizer()
    tau, T = cfg["timing.tau_ps"], cfg["timing.T_ps"]
    methods = cfg["methods"]
    out = {}
    if "free" in methods:
        out["free"] = PulseSequence(T)
    if "udd" in methods:
        best = best_feasible_udd(m, T, tau, cfg["optimizer.udd_n_limit"], quad)
        if best is None:
            raise FeasibilityError(f"no UDD_n with n <= {cfg['optimizer.udd_n_limit']} "
                                   f"respects tau={tau:g} at T={T:g}")
        out["udd"] = best[0]
    if any(k in methods for k in ("badd", "lodd", "ofdd")):
        res = badd(m, tau, T, cfg["optimizer.n_limit"], opt, quad, workers=threads)
        n = res.best.n
        if "badd" in methods:
            out["badd"] = res.best.sequence
        starts = [res.best.intervals]
        if "ofdd" in methods or "lodd" in methods:
            of = ofdd(n, T, m.cutoff, opt, quad)
            if "ofdd" in methods:
                out["ofdd"] = of.sequence
            starts.append(of.intervals)
        if "lodd" in methods:
            out["lodd"] = lodd(m, n, T, opt, quad, starts=starts).sequence
    return out


def _fig3_cell(args):
    ratio, method, seq, m, quad = args
    value = chi(seq, m.with_cutoff(ratio * m.cutoff), quad).chi
    return [ratio, method, value, purity_loss(value), seq.n]


def cmd_fig3(cfg: ExperimentConfig, threads: int = 1):
    """Adapt at the presumed cutoff, then score under rescaled cutoffs."""
    seqs = adapt_sequences(cfg, threads)
    m, quad = cfg.measure(), cfg.quadrature()
    jobs = [(r, k, seqs[k], m, quad) for r in cfg["sweep.ratio"] for k in cfg["methods"]]
    rows = _map(_fig3_cell, jobs, threads)
    return ["ratio", "method", "chi", "purity_loss", "n"], rows


def _optimiser_json(res, seq, extra) -> str:
    doc = {"n": seq.n, "T": seq.T, "chi": res.chi, "converged": bool(res.converged),
           "iterations": res.iterations, "kkt_residual": res.kkt_residual,
           "intervals": [float(v) for v in res.intervals], "times": seq.times.tolist()}
    doc.update(extra)
    return json.dumps(doc, indent=1) + "\n"


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--preset", help=f"packaged configuration ({', '.join(preset_names())})")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--threads", type=int, default=1, help="worker processes")
    common.add_argument("--seed", type=int, help="random seed for multistart")
    common.add_argument("--print-config", action="store_true",
                        help="print the effective configuration and exit")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="ddbound", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "evaluate": "decoupling error, purity loss and Cauchy bound of one sequence",
        "filter": "samples of |f(w)|^2 on sweep.omega",
        "udd": "write the UDD sequence for sequence.n, timing.T_ps",
        "badd": "bandwidth-adapted optimisation over n (JSON)",
        "lodd": "optimisation at fixed n with only T fixed (JSON)",
        "ofdd": "LODD under the flat measure at measure.omega_c (JSON)",
        "fig1": "tailored UDD vs fast-control bound over omega_c tau (CSV)",
        "fig2": "best error per method over a T sweep (CSV)",
        "fig3": "purity loss vs actual/presumed cutoff ratio (CSV)",
    }
    for name, text in helps.items():
        sp = sub.add_parser(name, parents=[common], help=text, description=text)
        if name in ("evaluate", "filter"):
            sp.add_argument("--sequence", help="sequence file (overrides sequence.*)")
        if name in ("badd", "lodd", "ofdd"):
            sp.add_argument("--sequence-out", help="also write the optimised sequence here")
    return p


def _config_from_args(args) -> ExperimentConfig:
    cfg = load_preset(args.preset) if args.preset else ExperimentConfig()
    if args.config:
        cfg = ExperimentConfig.load(args.config, cfg)
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        cfg.set(key, value)
    if args.seed is not None:
        cfg.set("seed", str(args.seed))
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    return cfg.validate()


def _run(args) -> str:
    cfg = _config_from_args(args)
    if args.print_config:
        return cfg.serialize()
    cmd, threads = args.command, args.threads
    if cmd == "evaluate":
        header, rows = cmd_evaluate(cfg, args.sequence)
        names = dict(zip(header, rows[0]))
        for key in ("chi", "purity_loss", "min_interval", "l1_norm", "bound_cauchy"):
            print(f"{key}: {_cell(names[key])}", file=sys.stderr)
        return format_csv(header, rows)
    if cmd == "filter":
        return format_csv(*cmd_filter(cfg, args.sequence))
    if cmd == "udd":
        return format_sequence(make_udd(cfg["sequence.n"], cfg["timing.T_ps"]))
    if cmd in ("fig1", "fig2", "fig3"):
        fn = {"fig1": cmd_fig1, "fig2": cmd_fig2, "fig3": cmd_fig3}[cmd]
        return format_csv(*fn(cfg, threads))

    m, quad, opt = cfg.measure(), cfg.quadrature(), cfg.optimizer()
    T = cfg["timing.T_ps"]
    if cmd == "badd":
        res = badd(m, cfg["timing.tau_ps"], T, cfg["optimizer.n_limit"], opt, quad,
                   workers=threads)
        seq, text = res.best.sequence, res.to_json() + "\n"
    elif cmd == "lodd":
        res = lodd(m, cfg["sequence.n"], T, opt, quad)
        seq = res.sequence
        text = _optimiser_json(res, seq, {})
    else:
        res = ofdd(cfg["sequence.n"], T, m.cutoff, opt, quad)
        seq = res.sequence
        text = _optimiser_json(res, seq, {"chi_measure": chi(seq, m, quad).chi})
    if args.sequence_out:
        with open(args.sequence_out, "w") as fh:
            fh.write(format_sequence(seq))
    return text


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        text = _run(args)
    except FeasibilityError as exc:
        print(f"error: infeasible timing: {exc}", file=sys.stderr)
        return EXIT_FEASIBILITY
    except ArithmeticError as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
