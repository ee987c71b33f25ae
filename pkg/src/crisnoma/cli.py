"""Command-line entry point: ``crisnoma <verb> [options]``.

Verbs
-----
stats         analytic moments of the effective channels
ber           analytic and simulated per-user BER at one operating point
sweep         methods x power grid, written as CSV plus plot series
optimize      one JO/AO/MM run, optionally exporting its iteration trace
derive-table  dump the Q-term table of a modulation/decoding-order combination
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .ber import BerQuadrature, analytic_ber
from .channel_stats import ACCURATE, QuadratureSpec, effective_stats
from .montecarlo import estimate_ber
from .optimizer import Method, OptimizerConfig, optimize
from .qterms import derive_qterm_table
from .scenario import ScenarioConfig, parse_length, parse_scenario
from .sweep import METHODS, emit_plot_data, export_csv, sweep

log = logging.getLogger("crisnoma")

DEFAULT_GRID = "0:30:2"


def parse_powers(text: str) -> list:
    """``"a:b:step"`` (inclusive of ``b``) or a comma-separated list, in dBm."""
    text = text.strip()
    if ":" in text:
        parts = [float(v) for v in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
            raise argparse.ArgumentTypeError(f"bad range {text!r}; expected start:stop:step")
        a, b, step = parts
        n = int(math.floor((b - a) / step + 1e-9)) + 1
        return [round(a + i * step, 10) for i in range(n)]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario file")
    common.add_argument("--trials", type=int, help="Monte Carlo draws (0 disables simulation)")
    common.add_argument("--seed", type=int, help="base random seed")
    common.add_argument("--out", type=Path, help="output file or directory")
    common.add_argument("--grid-resolution", help='simulation grid spacing, e.g. "0.0625 lambda"')
    common.add_argument("--fast-2f1-terms", type=int, default=6,
                        help="series terms used inside optimisation loops (default 6)")
    common.add_argument("--log-level", default="INFO")

    p = argparse.ArgumentParser(prog="crisnoma", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("stats", parents=[common], help="analytic channel moments")
    s.add_argument("--powers", type=parse_powers, help="one power for all users or one per user (dBm)")

    s = sub.add_parser("ber", parents=[common], help="analytic + simulated BER at one point")
    s.add_argument("--powers", type=parse_powers, help="one power for all users or one per user (dBm)")

    s = sub.add_parser("sweep", parents=[common], help="methods over a power grid")
    s.add_argument("--methods", default="NO,AO,JO,MM",
                   help=f"comma list from {','.join(METHODS)} (default NO,AO,JO,MM)")
    s.add_argument("--powers", type=parse_powers, default=parse_powers(DEFAULT_GRID),
                   help=f"P_max grid, start:stop:step or list (default {DEFAULT_GRID})")

    s = sub.add_parser("optimize", parents=[common], help="one optimiser run")
    s.add_argument("--method", default="JO", choices=[m.value for m in Method if m is not Method.NO])
    s.add_argument("--powers", type=parse_powers, help="P_max in dBm (single value)")

    s = sub.add_parser("derive-table", parents=[common], help="Q-term table dump")
    s.add_argument("--mod-orders", type=_int_list, help="comma list; default from --config")
    s.add_argument("--sic-order", type=_int_list, help="decoding order, 0-based user indices")
    return p


def _load(args) -> ScenarioConfig:
    if args.config is None:
        raise SystemExit("error: --config is required for this command")
    cfg = parse_scenario(args.config.read_text())
    changes = {}
    if args.trials:  # 0 is handled by the callers that allow it
        changes["trials"] = args.trials
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.grid_resolution is not None:
        changes["grid_resolution"] = parse_length(args.grid_resolution, cfg.wavelength)
    return cfg.replace(**changes) if changes else cfg


def _user_powers(cfg, powers):
    if not powers:
        return cfg.powers()
    if len(powers) == 1:
        return (powers[0],) * cfg.K
    if len(powers) != cfg.K:
        raise SystemExit(f"error: --powers needs 1 or {cfg.K} values")
    return tuple(powers)


def _opt_config(args) -> OptimizerConfig:
    return OptimizerConfig(quad=QuadratureSpec(terms=args.fast_2f1_terms))


def _log_effective(args, cfg=None, **extra):
    eff = {"verb": args.verb}
    if cfg is not None:
        eff["scenario"] = cfg.to_dict()
    for k, v in vars(args).items():
        if k not in ("verb", "config"):
            eff[k] = str(v) if isinstance(v, Path) else v
    eff.update(extra)
    log.info("effective configuration: %s", json.dumps(eff, sort_keys=True, default=str))


def _emit(args, payload: dict):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out is not None:
        args.out.write_text(text)
    sys.stdout.write(text)


def cmd_stats(args) -> int:
    cfg = _load(args)
    powers = _user_powers(cfg, args.powers)
    _log_effective(args, cfg, powers_dbm=powers)
    stats = effective_stats(cfg, cfg.equal_layout(), powers, ACCURATE)
    users = []
    for k, s in enumerate(stats):
        users.append({
            "user": k + 1,
            "power_dbm": powers[k],
            "mean_gamma_kk": s.mean_kk,
            "var_gamma_kk": s.var_kk,
            "gamma_shape": s.gamma_shape,
            "gamma_scale": s.gamma_scale,
            "var_re_gamma_ki": {str(i + 1): v for i, v in sorted(s.var_re_ki.items())},
        })
    _emit(args, {"users": users})
    return 0


def cmd_ber(args) -> int:
    cfg = _load(args)
    powers = _user_powers(cfg, args.powers)
    _log_effective(args, cfg, powers_dbm=powers)
    layout = cfg.equal_layout()
    ber = analytic_ber(cfg, layout, powers, ACCURATE, BerQuadrature())
    users = [{"user": k + 1, "power_dbm": powers[k], "ber_analytic": float(b)} for k, b in enumerate(ber)]
    if args.trials != 0:
        mc = estimate_ber(cfg, layout, cfg.trials, cfg.seed, powers)
        for k, u in enumerate(users):
            u.update(ber_mc=float(mc.ber[k]), mc_ci_low=float(mc.ci_low[k]), mc_ci_high=float(mc.ci_high[k]))
    _emit(args, {"users": users})
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    methods = [m.strip().upper() for m in args.methods.split(",") if m.strip()]
    out = args.out or Path("sweep_out")
    opt = _opt_config(args)
    _log_effective(args, cfg, methods=methods, out=str(out), optimizer=dataclasses.asdict(opt))
    trials = 0 if args.trials == 0 else cfg.trials
    res = sweep(cfg, methods, args.powers, mc_trials=trials, seed=cfg.seed, opt_config=opt)
    out.mkdir(parents=True, exist_ok=True)
    export_csv(res, out / "sweep.csv")
    emit_plot_data(res, out / "series")
    log.info("wrote %d rows to %s", len(res.rows), out / "sweep.csv")
    return 0


def cmd_optimize(args) -> int:
    cfg = _load(args)
    if args.powers:
        if len(args.powers) != 1:
            raise SystemExit("error: optimize takes a single P_max value")
        cfg = cfg.replace(p_max_dbm=args.powers[0])
    opt = _opt_config(args)
    _log_effective(args, cfg, optimizer=dataclasses.asdict(opt))
    res = optimize(cfg, args.method, opt)
    if args.out is not None:
        res.export_trace(args.out)
    payload = {
        "method": res.method.value,
        "objective_db": res.objective_db,
        "ber": list(res.ber),
        "powers_dbm": list(res.variables.p_dbm),
        "widths_m": list(res.variables.widths),
        "widths_fraction": list(np.asarray(res.variables.widths) / cfg.width),
        "evaluations": res.evaluations,
        "residuals": res.residuals,
    }
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True, default=float) + "\n")
    return 0


def cmd_derive_table(args) -> int:
    mods = args.mod_orders
    if mods is None:
        mods = list(_load(args).mod_orders)
    _log_effective(args, mod_orders=mods)
    table = derive_qterm_table(len(mods), mods, args.sic_order)
    text = table.to_text()
    if args.out is not None:
        args.out.write_text(text)
    sys.stdout.write(text)
    return 0


COMMANDS = {"stats": cmd_stats, "ber": cmd_ber, "sweep": cmd_sweep, "optimize": cmd_optimize,
            "derive-table": cmd_derive_table}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.verb](args)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
