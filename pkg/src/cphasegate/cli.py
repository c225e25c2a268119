"""``cphasegate`` command line: overlaps, fidelities, sweeps and optimizations.

Output is CSV (default) or JSON.  CSV files start with one ``# {...}`` line
holding JSON metadata, then a header row and data rows with a fixed column
order and 12 significant digits.  Exit status is 0 on success, 2 on bad
parameters and 3 when quadrature fails to converge; no file is written on
failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .errors import ContractError, ConvergenceError, ParameterError
from .fidelity import gate_fidelity, state_fidelity_map
from .overlaps import GateOverlaps, OverlapKernel
from .pulses import make_profile
from .quadrature import QuadratureSpec
from .scattering import EmitterParams
from .sweep import (SWEEP_QUAD, Quantity, ResultCache, SweepSpec, best_L, optimize,
                    run_sweep, scan_L)

COLUMNS = ("sigma", "L", "quantity", "re", "im", "abs", "converged")
MAP_COLUMNS = ("sigma", "L", "a", "z", "quantity", "re", "im", "abs", "converged")
DEFAULT_L_RANGE = (0.0, 2.4, 49)
DEFAULT_SIGMA_RANGE = (0.4, 3.4, 31)
EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED = 0, 2, 3


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x + 0.0:.12g}"


def _complex(text):
    try:
        return complex(str(text).replace(" ", "").replace("i", "j"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a complex number: {text!r}") from None


def _common(p):
    g = p.add_argument_group("pulse and emitter")
    g.add_argument("--shape", default="gaussian",
                   choices=["gaussian", "lorentzian", "sech"])
    g.add_argument("--lorentzian-convention", default="pole", choices=["pole", "real"])
    g.add_argument("--delta", type=float, default=0.0, help="detuning in Gamma units")
    g.add_argument("--gamma-loss", type=float, default=0.0,
                   help="loss rate into non-guided modes, in Gamma units")
    q = p.add_argument_group("quadrature")
    q.add_argument("--window", type=float, default=None, help="half-width of the k window")
    q.add_argument("--nodes", type=int, default=None, help="starting node count")
    q.add_argument("--rule", default=None, choices=["trapezoid", "gauss_legendre"])
    q.add_argument("--rel-tol", type=float, default=None)
    q.add_argument("--max-refinements", type=int, default=None)
    o = p.add_argument_group("output")
    o.add_argument("-o", "--output", default=None, help="file to write (default stdout)")
    o.add_argument("--format", default="csv", choices=["csv", "json"])
    o.add_argument("--cache", dest="cache", action="store_true", default=True)
    o.add_argument("--no-cache", dest="cache", action="store_false")
    o.add_argument("--cache-dir", default=None,
                   help="cache directory (default $CPHASEGATE_CACHE_DIR or ~/.cache/cphasegate)")
    o.add_argument("--workers", type=int, default=1)
    o.add_argument("--config", default=None,
                   help="JSON file of option values; command-line flags take precedence")
    o.add_argument("-q", "--quiet", action="store_true")


def _ranges(p, sigma=True):
    if sigma:
        p.add_argument("--sigma-range", type=float, nargs=3, metavar=("LO", "HI", "N"),
                       default=None)
    p.add_argument("--L-range", type=float, nargs=3, metavar=("LO", "HI", "N"), default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="cphasegate",
                                     description="Photon-emitter controlled-phase gate overlaps "
                                                 "and fidelities (momenta in Gamma/v_g, "
                                                 "lengths in v_g/Gamma).")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, what in (("overlap1", "single-photon overlap O1"),
                       ("overlap2", "two-photon overlap T")):
        p = sub.add_parser(name, help=what)
        p.add_argument("--sigma", type=float, default=1.72)
        p.add_argument("--L", type=float, default=0.8)
        p.add_argument("--scan-L", action="store_true",
                       help="scan L over --L-range and report the best L")
        _ranges(p, sigma=False)
        _common(p)

    p = sub.add_parser("fidelity", help="worst-case gate fidelity at one point")
    p.add_argument("--sigma", type=float, default=1.72)
    p.add_argument("--L", type=float, default=0.8)
    p.add_argument("--O1", type=_complex, default=None, help="use this O1 instead of computing it")
    p.add_argument("--T", type=_complex, default=None, help="use this T instead of computing it")
    p.add_argument("--map", action="store_true", help="write the full (a, z) fidelity map")
    p.add_argument("--map-points", type=int, default=101)
    p.add_argument("--optimize", action="store_true",
                   help="maximize the gate fidelity over sigma and L first")
    p.add_argument("--min-step", type=float, default=1e-3)
    _ranges(p)
    _common(p)

    p = sub.add_parser("sweep", help="evaluate a quantity on a (sigma, L) grid")
    p.add_argument("--quantity", default="gate_F", choices=[q.value for q in Quantity])
    p.add_argument("--sigma", type=float, default=1.72, help="point for state_F_map")
    p.add_argument("--L", type=float, default=0.8, help="point for state_F_map")
    p.add_argument("--map-points", type=int, default=101)
    _ranges(p)
    _common(p)

    p = sub.add_parser("optimize", help="maximize a quantity over (sigma, L)")
    p.add_argument("--quantity", default="gate_F",
                   choices=[Quantity.ABS_O1.value, Quantity.ABS_T.value, Quantity.GATE_F.value])
    p.add_argument("--min-step", type=float, default=1e-3)
    _ranges(p)
    _common(p)
    return parser, sub.choices


def parse_args(argv=None):
    parser, subparsers = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(argv)
    if args.config:
        sp = subparsers[args.command]
        try:
            with open(args.config, encoding="utf-8") as fp:
                cfg = json.load(fp)
        except (OSError, ValueError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        if not isinstance(cfg, dict):
            parser.error("config must be a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        known = {a.dest for a in sp._actions}
        unknown = sorted(set(cfg) - known - {"command"})
        if unknown:
            parser.error(f"unknown config keys for {args.command}: {', '.join(unknown)}")
        cfg.pop("command", None)
        cfg.pop("config", None)
        sp.set_defaults(**cfg)
        args = parser.parse_args(argv)
    return args


def _quad(args, base):
    changes = {}
    if args.window is not None:
        changes["window_halfwidth"] = args.window
    if args.nodes is not None:
        changes["nodes"] = args.nodes
    if args.rule is not None:
        changes["rule"] = args.rule
    if args.rel_tol is not None:
        changes["rel_tol"] = args.rel_tol
    if args.max_refinements is not None:
        changes["max_refinements"] = args.max_refinements
    d = base.to_dict()
    d.update(changes)
    try:
        return QuadratureSpec.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise ParameterError(f"bad quadrature settings: {exc}") from None


def _emitter(args):
    return EmitterParams(delta=args.delta, gamma_loss=args.gamma_loss)


def _profile(args, sigma):
    return make_profile(args.shape, sigma, lorentzian_convention=args.lorentzian_convention)


def _cache(args):
    return ResultCache(args.cache_dir) if args.cache else None


def _tuple(r, default):
    if r is None:
        return default
    return (float(r[0]), float(r[1]), int(r[2]))


def _config_record(args):
    skip = {"output", "quiet", "config", "cache", "cache_dir", "format", "workers"}
    rec = {}
    for k, v in sorted(vars(args).items()):
        if k in skip:
            continue
        if isinstance(v, complex):
            v = [v.real, v.imag]
        elif isinstance(v, tuple):
            v = list(v)
        rec[k] = v
    return rec


def _row(sigma, L, quantity, value, converged):
    v = complex(value)
    return {"sigma": sigma, "L": L, "quantity": quantity, "re": v.real, "im": v.imag,
            "abs": abs(v), "converged": bool(converged)}


# commands return (metadata, rows, columns, summary lines)

def cmd_overlap(args, two):
    emitter, name = _emitter(args), ("abs_T" if two else "abs_O1")
    quad = _quad(args, QuadratureSpec())
    profile = _profile(args, args.sigma)
    meta = {"quadrature": quad.to_dict()}
    if args.scan_L:
        L_range = _tuple(args.L_range, DEFAULT_L_RANGE)
        Ls = np.linspace(*L_range)
        vals, ok = scan_L(profile, Ls, emitter, quad, name)
        if not ok.any():
            raise ConvergenceError("no L in the scan converged")
        L_best, v_best = best_L(profile, L_range, emitter, quad, name)
        rows = [_row(args.sigma, L, name, v, c) for L, v, c in zip(Ls, vals, ok)]
        meta["L_range"] = list(L_range)
        meta["best"] = {"L": L_best, "abs": v_best}
        summary = [f"best L = {L_best:.6f}  |{name[4:]}| = {v_best:.6f}"]
    else:
        kernel = OverlapKernel(profile, emitter, quad)
        if two:
            ov = kernel.overlaps(args.L)
            val, rep = ov.T, ov.convergence
        else:
            val, rep = kernel.single(args.L)
            rep = rep.to_dict()
        rows = [_row(args.sigma, args.L, name, val, rep["converged"])]
        meta["convergence"] = rep
        summary = [f"{name[4:]} = {complex(val):.10g}  |{name[4:]}| = {abs(val):.10f}"]
    return meta, rows, COLUMNS, summary


def _map_rows(sigma, L, O1, T, points):
    a, z, fmap = state_fidelity_map(O1, T, points)
    rows = []
    for i, ai in enumerate(a):
        for j, zj in enumerate(z):
            r = _row(sigma, L, "state_F", fmap[i, j], True)
            r.update(a=ai, z=zj)
            rows.append(r)
    return rows, fmap


def cmd_fidelity(args):
    emitter = _emitter(args)
    if not emitter.lossless:
        raise ContractError(
            "the gate fidelity needs gamma_loss = 0: with loss the output states are "
            "mixed and the pure-state overlap formula does not apply")
    meta = {}
    injected = args.O1 is not None or args.T is not None
    if injected:
        if args.O1 is None or args.T is None:
            raise ParameterError("--O1 and --T must be given together")
        if args.optimize:
            raise ParameterError("--optimize cannot be combined with injected overlaps")
        sigma, L = math.nan, math.nan
        ov = GateOverlaps(sigma, L, complex(args.O1), complex(args.T))
        meta["injected_overlaps"] = True
    elif args.optimize:
        quad = _quad(args, SWEEP_QUAD)
        spec = SweepSpec(Quantity.GATE_F, args.shape,
                         _tuple(args.sigma_range, (0.4, 3.4, 16)),
                         _tuple(args.L_range, (0.0, 2.4, 25)), emitter, quad,
                         args.lorentzian_convention)
        res = optimize(spec, min_step=args.min_step, workers=args.workers, cache=_cache(args))
        sigma, L, ov = res.sigma, res.L, res.overlaps
        meta["optimize"] = res.to_dict()
        meta["quadrature"] = quad.to_dict()
    else:
        quad = _quad(args, QuadratureSpec())
        sigma, L = args.sigma, args.L
        ov = OverlapKernel(_profile(args, sigma), emitter, quad).overlaps(L)
        meta["quadrature"] = quad.to_dict()
    fr = gate_fidelity(ov)
    meta.update(F=fr.F, argmin=fr.argmin.to_dict(), overlaps=ov.to_dict(), solver=fr.solver)
    summary = [f"F = {fr.F:.10f}  argmin a = {fr.argmin.a:.6f}  z = {fr.argmin.z:.6f}"]
    if not injected:
        summary.insert(0, f"sigma = {sigma:.6f}  L = {L:.6f}")
    if args.map:
        rows, fmap = _map_rows(sigma, L, ov.O1, ov.T, args.map_points)
        meta["map"] = {"points": args.map_points, "min": float(fmap.min()),
                       "corner_11": float(fmap[-1, -1])}
        summary.append(f"map min = {fmap.min():.10f}  F(1,1) = {fmap[-1, -1]:.10f}")
        return meta, rows, MAP_COLUMNS, summary
    conv = bool(ov.convergence.get("converged", True))
    rows = [_row(sigma, L, "O1", ov.O1, conv), _row(sigma, L, "T", ov.T, conv),
            _row(sigma, L, "gate_F", fr.F, conv)]
    return meta, rows, COLUMNS, summary


def cmd_sweep(args):
    quantity = Quantity(args.quantity)
    spec = SweepSpec(quantity, args.shape, _tuple(args.sigma_range, DEFAULT_SIGMA_RANGE),
                     _tuple(args.L_range, DEFAULT_L_RANGE), _emitter(args),
                     _quad(args, SWEEP_QUAD), args.lorentzian_convention,
                     point=(args.sigma, args.L) if quantity is Quantity.STATE_F_MAP else None,
                     map_points=args.map_points)
    res = run_sweep(spec, workers=args.workers, cache=_cache(args))
    rows = []
    if quantity is Quantity.STATE_F_MAP:
        sigma, L = spec.point
        for i, a in enumerate(res.axes[0]):
            for j, z in enumerate(res.axes[1]):
                r = _row(sigma, L, quantity.value, res.values[i, j], res.converged[i, j])
                r.update(a=a, z=z)
                rows.append(r)
        columns = MAP_COLUMNS
    else:
        for i, s in enumerate(res.axes[0]):
            for j, L in enumerate(res.axes[1]):
                rows.append(_row(s, L, quantity.value, res.values[i, j], res.converged[i, j]))
        columns = COLUMNS
    meta = {"sweep_key": res.key, "spec": spec.to_dict(), "optimum": res.optimum,
            "flagged_cells": int((~res.converged).sum())}
    opt = res.optimum
    summary = [f"optimum {quantity.value} = {opt['value']}  at "
               + ", ".join(f"{k} = {opt[k]}" for k in res.axis_names)]
    return meta, rows, columns, summary


def cmd_optimize(args):
    quantity = Quantity(args.quantity)
    spec = SweepSpec(quantity, args.shape, _tuple(args.sigma_range, (0.4, 3.4, 16)),
                     _tuple(args.L_range, (0.0, 2.4, 25)), _emitter(args),
                     _quad(args, SWEEP_QUAD), args.lorentzian_convention)
    res = optimize(spec, min_step=args.min_step, workers=args.workers, cache=_cache(args))
    conv = bool(res.overlaps.convergence.get("converged", True)) if res.overlaps else True
    rows = [_row(res.sigma, res.L, quantity.value, res.value, conv)]
    meta = {"spec": spec.to_dict(), "result": res.to_dict()}
    summary = [f"max {quantity.value} = {res.value:.10f}  at sigma = {res.sigma:.6f}  "
               f"L = {res.L:.6f}"]
    if res.argmin is not None:
        summary.append(f"worst input a = {res.argmin.a:.6f}  z = {res.argmin.z:.6f}")
    return meta, rows, COLUMNS, summary


COMMANDS = {
    "overlap1": lambda a: cmd_overlap(a, two=False),
    "overlap2": lambda a: cmd_overlap(a, two=True),
    "fidelity": cmd_fidelity,
    "sweep": cmd_sweep,
    "optimize": cmd_optimize,
}


def render(meta, rows, columns, fmt):
    if fmt == "json":
        out = {"metadata": meta,
               "columns": list(columns),
               "rows": [{c: r[c] for c in columns} for r in rows]}
        return json.dumps(out, sort_keys=True, indent=1, allow_nan=True,
                          default=_json_default) + "\n"
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True, default=_json_default) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    return buf.getvalue()


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".cphasegate-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fp:
            fp.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _setup_logging(quiet):
    logger = logging.getLogger("cphasegate")
    for h in list(logger.handlers):
        if getattr(h, "_cphasegate_cli", False):
            logger.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    handler._cphasegate_cli = True
    logger.addHandler(handler)
    logger.setLevel(logging.WARNING if quiet else logging.INFO)


def main(argv=None):
    args = parse_args(argv)
    _setup_logging(args.quiet)
    try:
        meta, rows, columns, summary = COMMANDS[args.command](args)
    except (ParameterError, ContractError) as exc:
        print(f"cphasegate: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConvergenceError as exc:
        print(f"cphasegate: quadrature did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    meta = {"engine_version": __version__, "command": args.command,
            "config": _config_record(args), **meta}
    text = render(meta, rows, columns, args.format)
    if args.output:
        _write(args.output, text)
        if not args.quiet:
            for line in summary:
                print(line)
    else:
        sys.stdout.write(text)
        if not args.quiet:
            for line in summary:
                print(line, file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
