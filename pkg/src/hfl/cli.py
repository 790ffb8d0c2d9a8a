"""Command-line surface of the library.

Every data command emits CSV: header row, comma separator, floats at
17 significant digits so binary64 values round-trip exactly.  Output
goes to stdout unless --out is given, in which case the file is
written atomically (temp file plus rename) and --plot may render a
PNG next to it.

Configuration: a plain-text file of ``key = value`` lines (comments
with ``#``) supplies defaults for k, a, L, x0, seed, the quadrature
and series tolerances, and the output path.  The file named by --config
(or, failing that, the HFL_CONFIG environment variable) is loaded
first; explicit flags always win.  Unknown keys are rejected.

Exit codes: 0 success, 1 usage or configuration error, 2 internal
consistency failure (classifier disagreement, non-converged series,
exhausted numeric kernels).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile

import numpy as np

from . import model, pricing
from .model import Inconclusive, ModelParams, OutOfDomain
from .montecarlo import (ConfigInvalid, SimConfig, compare_measures,
                         simulate)
from .numerics import DepthExceeded, QuadSpec
from .pricing import SeriesNotConverged
from .specfun import NoConvergence, NonIntegerOnly, kummer_m
from .spectral import (BracketScanExhausted, DensityField, HorizonTooShort,
                       density, make_density_field, solve_eigen)

_SQRT2 = math.sqrt(2.0)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INCONSISTENT = 2


class ConfigError(ValueError):
    """Malformed config file or inconsistent flag combination."""


# Keys accepted in config files, with their parsers.
_CONFIG_KEYS = {
    "k": float,
    "a": float,
    "L": float,
    "x0": float,
    "seed": int,
    "series_rel_tol": float,
    "quad_abs_tol": float,
    "quad_rel_tol": float,
    "out": str,
}

# Parameter bundles behind --preset; the preset replaces the
# subcommand and any further flags are appended after it, so explicit
# flags still win.
_PRESETS = {
    "fig-eigen": [
        "eigen", "--k", "0.5", "--a", "1", "--L", "1", "--n", "4"],
    "fig-density-khalf": [
        "density", "--k", "0.5", "--a", "1", "--L", "1",
        "--x", "0.5", "--t", "0", "--T", "0.2", "--grid", "200"],
    "fig-yield-kneghalf": [
        "yield", "--k", "-0.5", "--a", "1", "--L", "1",
        "--x", "0.6666666666666666",
        "--maturities", "0.2,0.4,0.6,0.8,1.0,1.2,1.4,1.6,1.8,2.0"],
}


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on usage errors; the CLI contract
    # reserves 2 for consistency failures, so remap to 1.
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    target = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(target),
                               prefix=".hfl-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _read_config_file(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    values = {}
    for lineno, line in enumerate(raw.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = (s.strip() for s in body.partition("="))
        parse = _CONFIG_KEYS.get(key)
        if parse is None:
            raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
        try:
            values[key] = parse(val)
        except ValueError:
            raise ConfigError(
                f"{path}:{lineno}: bad {parse.__name__} value for '{key}'")
    return values


def _merged_config(args) -> dict:
    path = getattr(args, "config", None) or os.environ.get("HFL_CONFIG")
    return _read_config_file(path) if path else {}


def _pick(args, cfg: dict, key: str, default=None):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    return cfg.get(key, default)


def _model_params(args, cfg: dict, k_default=None) -> ModelParams:
    k = _pick(args, cfg, "k", k_default)
    if k is None:
        raise ConfigError("k is required (flag --k or config file)")
    return ModelParams(k=float(k), a=float(_pick(args, cfg, "a", 1.0)),
                       L=float(_pick(args, cfg, "L", 1.0)))


def _quad_from(cfg: dict) -> QuadSpec | None:
    if "quad_abs_tol" not in cfg and "quad_rel_tol" not in cfg:
        return None
    base = QuadSpec()
    return QuadSpec(abs_tol=cfg.get("quad_abs_tol", base.abs_tol),
                    rel_tol=cfg.get("quad_rel_tol", base.rel_tol))


def _out_path(args, cfg: dict) -> str | None:
    out = args.out if getattr(args, "out", None) is not None else cfg.get("out")
    if getattr(args, "plot", False) and out is None:
        raise ConfigError("--plot requires --out")
    return out


def _png_path(out: str) -> str:
    return os.path.splitext(out)[0] + ".png"


def _parse_maturities(text: str) -> list[float]:
    try:
        mats = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"bad maturity list '{text}'")
    if not mats:
        raise ConfigError("empty maturity list")
    return mats


def _payoff_from(args) -> pricing.Payoff:
    if args.payoff == "put-on-rate":
        if args.strike is None:
            raise ConfigError("--payoff put-on-rate requires --strike")
        return pricing.payoff_put_on_rate(args.strike)
    if args.strike is not None:
        raise ConfigError("--strike is only valid with --payoff put-on-rate")
    if args.payoff == "one":
        return pricing.payoff_one()
    return pricing.payoff_linear()


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_classify(args, cfg: dict) -> int:
    p = _model_params(args, cfg)
    origin = model.classify_origin(p)
    spectrum = model.classify_spectrum(p)
    head = f"origin: {origin.value}; spectrum: {spectrum.kind}"
    if spectrum.cutoff is not None:
        head += f"; cutoff {spectrum.cutoff:g}"
    print(head)
    report = model.classify_origin_numeric(p)
    print("probe: I0 %s (%.6g), J0 %s (%.6g) -> origin %s"
          % ("finite" if report.i0_finite else "infinite",
             report.i0_estimate,
             "finite" if report.j0_finite else "infinite",
             report.j0_estimate, report.boundary.value))
    if report.boundary is not origin or report.spectrum.kind != spectrum.kind:
        print("classifiers disagree", file=sys.stderr)
        return EXIT_INCONSISTENT
    print("classifiers agree")
    return EXIT_OK


def cmd_eigen(args, cfg: dict) -> int:
    p = _model_params(args, cfg, k_default=0.5)
    if p.k != 0.5:
        raise ConfigError("discrete eigensolver requires k=1/2")
    quad = _quad_from(cfg)
    sys_ = (solve_eigen(p, args.n, quad) if quad is not None
            else solve_eigen(p, args.n))
    z_l = -(2.0 * _SQRT2 / p.a) * p.L
    rows = []
    for pr in sys_.pairs:
        residual = abs(float(kummer_m(
            1.0 - pr.lam / (p.a * _SQRT2), 2.0, z_l)))
        rows.append([pr.n, pr.lam, pr.c_n, residual])
    out = _out_path(args, cfg)
    _write_text(out, _csv_text(["n", "lambda", "c_n", "residual"], rows))
    if args.plot:
        from . import plots
        plots.render_eigen(_png_path(out), [r[0] for r in rows],
                           [r[1] for r in rows])
    return EXIT_OK


def cmd_density(args, cfg: dict) -> int:
    p = _model_params(args, cfg)
    if args.grid < 1:
        raise ConfigError("--grid must be at least 1")
    x = float(_pick(args, cfg, "x0")) if args.x is None else args.x
    if x is None:
        raise ConfigError("x is required (flag --x or config x0)")
    quad = _quad_from(cfg)
    field = (make_density_field(p, args.n, quad) if quad is not None
             else make_density_field(p, args.n))
    # Interior grid plus the cap; the density is finite (zero) there.
    ys = np.linspace(0.0, p.L, args.grid + 1)[1:]
    rows = [[y, density(field, args.t, x, args.T, y)] for y in ys]
    out = _out_path(args, cfg)
    _write_text(out, _csv_text(["y", "gamma"], rows))
    if args.plot:
        from . import plots
        plots.render_density(_png_path(out), [r[0] for r in rows],
                             [r[1] for r in rows], x, args.T - args.t)
    return EXIT_OK


def _curve(args, cfg: dict):
    p = _model_params(args, cfg)
    x = float(_pick(args, cfg, "x0")) if args.x is None else args.x
    if x is None:
        raise ConfigError("x is required (flag --x or config x0)")
    mats = _parse_maturities(args.maturities)
    quad = _quad_from(cfg)
    if p.k == 0.5:
        sys_ = (solve_eigen(p, args.n, quad) if quad is not None
                else solve_eigen(p, args.n))
        tol = cfg.get("series_rel_tol")

        def pricer(t, xx, T):
            if tol is not None:
                return pricing.bond_k_half(p, sys_, t, xx, T,
                                           series_rel_tol=tol)
            return pricing.bond_k_half(p, sys_, t, xx, T)
    elif p.k == -0.5:
        def pricer(t, xx, T):
            if quad is not None:
                return pricing.bond_k_neg_half(p, t, xx, T, quad=quad)
            return pricing.bond_k_neg_half(p, t, xx, T)
    else:
        raise ConfigError("bond pricing requires k=1/2 or k=-1/2")
    curve = pricing.yield_curve(p, pricer, x, mats)
    return [[pt.maturity, pt.bond, pt.yld] for pt in curve.points]


def cmd_bond(args, cfg: dict) -> int:
    rows = _curve(args, cfg)
    out = _out_path(args, cfg)
    _write_text(out, _csv_text(["T", "B", "Y"], rows))
    if args.plot:
        from . import plots
        plots.render_curve(_png_path(out), [r[0] for r in rows],
                           [r[1] for r in rows], [r[2] for r in rows],
                           which="bond")
    return EXIT_OK


def cmd_yield(args, cfg: dict) -> int:
    rows = _curve(args, cfg)
    out = _out_path(args, cfg)
    _write_text(out, _csv_text(["T", "B", "Y"], rows))
    if args.plot:
        from . import plots
        plots.render_curve(_png_path(out), [r[0] for r in rows],
                           [r[1] for r in rows], [r[2] for r in rows],
                           which="yield")
    return EXIT_OK


def cmd_price(args, cfg: dict) -> int:
    p = _model_params(args, cfg)
    if p.k not in (0.5, -0.5):
        raise ConfigError("generic pricing requires k=1/2 or k=-1/2")
    x = float(_pick(args, cfg, "x0")) if args.x is None else args.x
    if x is None:
        raise ConfigError("x is required (flag --x or config x0)")
    pay = _payoff_from(args)
    quad = _quad_from(cfg)
    field = (make_density_field(p, args.n, quad) if quad is not None
             else make_density_field(p, args.n))
    value = pricing.price_general(p, field, pay, args.t, x, args.T)
    strike = args.strike if args.strike is not None else math.nan
    out = _out_path(args, cfg)
    _write_text(out, _csv_text(
        ["payoff", "strike", "x", "T", "price"],
        [[args.payoff, strike, x, args.T, value]]))
    return EXIT_OK


def _sim_config(args, cfg: dict) -> SimConfig:
    x0 = _pick(args, cfg, "x0")
    if x0 is None:
        raise ConfigError("x0 is required (flag --x0 or config file)")
    return SimConfig(x0=float(x0), horizon=args.horizon,
                     n_paths=args.n_paths, dt=args.dt,
                     seed=int(_pick(args, cfg, "seed", 0)),
                     hist_bins=args.hist_bins)


def cmd_simulate(args, cfg: dict) -> int:
    p = _model_params(args, cfg)
    sim_cfg = _sim_config(args, cfg)
    pay = _payoff_from(args)
    stats = simulate(p, sim_cfg, pay.g, measure=args.measure,
                     keep_terminals=args.dump is not None)
    out = _out_path(args, cfg)
    _write_text(out, _csv_text(
        ["measure", "x0", "horizon", "n_paths", "dt", "seed",
         "price_mean", "price_stderr", "absorbed_at_zero",
         "absorbed_at_cap"],
        [[stats.measure, sim_cfg.x0, sim_cfg.horizon, stats.n_paths,
          sim_cfg.dt_effective, sim_cfg.seed, stats.price_mean,
          stats.price_stderr, stats.absorbed_at_zero,
          stats.absorbed_at_cap]]))
    if args.dump is not None:
        dump_rows = [[i, xv, int(sv)] for i, (xv, sv) in enumerate(
            zip(stats.terminals, stats.terminal_status))]
        _write_text(args.dump, _csv_text(["path", "terminal", "status"],
                                         dump_rows))
    if args.plot:
        from . import plots
        plots.render_histogram(_png_path(out), stats.hist_edges,
                               stats.hist_mass, stats.absorbed_at_zero,
                               stats.absorbed_at_cap)
    return EXIT_OK


def cmd_compare_measures(args, cfg: dict) -> int:
    p = _model_params(args, cfg)
    sim_cfg = _sim_config(args, cfg)
    pay = _payoff_from(args)
    rep = compare_measures(p, sim_cfg, pay.g)
    out = _out_path(args, cfg)
    _write_text(out, _csv_text(
        ["price_base", "stderr_base", "price_transformed",
         "stderr_transformed", "gap", "gap_stderr"],
        [[rep.base.price_mean, rep.base.price_stderr,
          rep.transformed.price_mean, rep.transformed.price_stderr,
          rep.gap, rep.gap_stderr]]))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------

def _add_common(sp, plot: bool = True) -> None:
    sp.add_argument("--k", type=float, default=None,
                    help="family exponent k")
    sp.add_argument("--a", type=float, default=None,
                    help="volatility scale a (default 1)")
    sp.add_argument("--L", type=float, default=None,
                    help="cap level L (default 1)")
    sp.add_argument("--config", default=None,
                    help="config file (falls back to $HFL_CONFIG)")
    sp.add_argument("--out", default=None,
                    help="output CSV path (default stdout)")
    if plot:
        sp.add_argument("--plot", action="store_true",
                        help="also render a PNG next to --out")


def _add_payoff(sp) -> None:
    sp.add_argument("--payoff", choices=["one", "linear", "put-on-rate"],
                    default="one", help="terminal payoff (default one)")
    sp.add_argument("--strike", type=float, default=None,
                    help="strike, put-on-rate only")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hfl", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--preset", choices=sorted(_PRESETS),
                        help="run a bundled figure preset instead of a "
                             "subcommand")
    sub = parser.add_subparsers(dest="cmd", parser_class=_Parser)

    sp = sub.add_parser("classify", help="boundary and spectrum classes")
    _add_common(sp, plot=False)
    sp.set_defaults(fn=cmd_classify)

    sp = sub.add_parser("eigen", help="discrete eigenvalues (k=1/2)")
    _add_common(sp)
    sp.add_argument("--n", type=int, default=4,
                    help="number of eigenvalues (default 4)")
    sp.set_defaults(fn=cmd_eigen)

    sp = sub.add_parser("density", help="transition density on a y-grid")
    _add_common(sp)
    sp.add_argument("--x", type=float, default=None, help="starting state")
    sp.add_argument("--t", type=float, default=0.0, help="start time")
    sp.add_argument("--T", type=float, required=True, help="end time")
    sp.add_argument("--grid", type=int, default=100,
                    help="number of y points (default 100)")
    sp.add_argument("--n", type=int, default=25,
                    help="eigenfunctions for the discrete backend")
    sp.set_defaults(fn=cmd_density)

    for name, fn in (("bond", cmd_bond), ("yield", cmd_yield)):
        sp = sub.add_parser(name, help=f"zero-coupon {name} curve")
        _add_common(sp)
        sp.add_argument("--x", type=float, default=None,
                        help="starting state")
        sp.add_argument("--maturities", required=True,
                        help="comma-separated maturity list")
        sp.add_argument("--n", type=int, default=25,
                        help="series length for k=1/2 (default 25)")
        sp.set_defaults(fn=fn)

    sp = sub.add_parser("price", help="price a built-in payoff")
    _add_common(sp, plot=False)
    _add_payoff(sp)
    sp.add_argument("--x", type=float, default=None, help="starting state")
    sp.add_argument("--t", type=float, default=0.0, help="start time")
    sp.add_argument("--T", type=float, required=True, help="maturity")
    sp.add_argument("--n", type=int, default=25,
                    help="eigenfunctions for the discrete backend")
    sp.set_defaults(fn=cmd_price)

    sp = sub.add_parser("simulate", help="Euler path simulation")
    _add_common(sp)
    _add_payoff(sp)
    sp.add_argument("--x0", type=float, default=None, help="starting state")
    sp.add_argument("--horizon", type=float, default=0.5)
    sp.add_argument("--n-paths", type=int, default=200_000)
    sp.add_argument("--dt", type=float, default=1e-4)
    sp.add_argument("--seed", type=int, default=None,
                    help="RNG seed (default 0 or config)")
    sp.add_argument("--hist-bins", type=int, default=40)
    sp.add_argument("--measure", choices=["base", "transformed"],
                    default="base")
    sp.add_argument("--dump", default=None,
                    help="also write per-path terminal states to this CSV")
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("compare-measures",
                        help="price under both simulation measures")
    _add_common(sp, plot=False)
    _add_payoff(sp)
    sp.add_argument("--x0", type=float, default=None, help="starting state")
    sp.add_argument("--horizon", type=float, default=0.5)
    sp.add_argument("--n-paths", type=int, default=200_000)
    sp.add_argument("--dt", type=float, default=1e-4)
    sp.add_argument("--seed", type=int, default=None,
                    help="RNG seed (default 0 or config)")
    sp.add_argument("--hist-bins", type=int, default=40)
    sp.set_defaults(fn=cmd_compare_measures)

    return parser


def _expand_preset(argv: list[str]) -> list[str]:
    if "--preset" not in argv:
        return argv
    i = argv.index("--preset")
    if i + 1 >= len(argv):
        raise ConfigError("--preset needs a name")
    name = argv[i + 1]
    bundle = _PRESETS.get(name)
    if bundle is None:
        raise ConfigError(f"unknown preset '{name}' (have: "
                          + ", ".join(sorted(_PRESETS)) + ")")
    return bundle + argv[:i] + argv[i + 2:]


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        argv = _expand_preset(argv)
    except ConfigError as exc:
        print(f"hfl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "fn", None) is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _merged_config(args)
        return args.fn(args, cfg)
    except (ConfigError, ConfigInvalid, NonIntegerOnly, OutOfDomain,
            HorizonTooShort, ValueError) as exc:
        print(f"hfl: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SeriesNotConverged, Inconclusive, NoConvergence,
            DepthExceeded, BracketScanExhausted) as exc:
        print(f"hfl: inconsistency: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT


if __name__ == "__main__":
    sys.exit(main())
