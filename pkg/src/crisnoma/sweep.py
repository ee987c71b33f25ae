"""Power sweeps across allocation methods, with CSV and plot-series export.

Rows are ordered by method (``NO, AO, JO, MM, OMA, DRIS``), then power,
then user. ``OMA`` and ``DRIS`` are simulation-only baselines evaluated at
the equal-share layout with every user at ``P_max``; their analytic column
is NaN. When Monte Carlo is disabled the simulation columns are NaN.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .channel_stats import ACCURATE
from .montecarlo import estimate_ber, estimate_ber_grid, run_oma_baseline
from .optimizer import OptimizerConfig, OptVariables, evaluate_no, optimize_path

__all__ = ["METHODS", "SweepError", "SweepResult", "SweepRow", "emit_plot_data", "export_csv",
           "read_csv", "sweep"]

METHODS = ("NO", "AO", "JO", "MM", "OMA", "DRIS")
OPTIMIZED = ("AO", "JO", "MM")
# each optimised path is seeded with the solutions of the previous one
_CANDIDATE_SOURCE = {"JO": "AO", "MM": "JO"}

HEADER = ("method", "power_dbm", "user", "ber_analytic", "ber_mc", "mc_ci_low", "mc_ci_high",
          "widths", "powers")


class SweepError(RuntimeError):
    def __init__(self, method, power_dbm, cause):
        self.method = method
        self.power_dbm = power_dbm
        where = "along the power path" if math.isnan(power_dbm) else f"at {power_dbm:g} dBm"
        super().__init__(f"{method} {where}: {cause}")


@dataclass(frozen=True)
class SweepRow:
    method: str
    power_dbm: float
    user: int
    ber_analytic: float
    ber_mc: float
    mc_ci_low: float
    mc_ci_high: float
    widths: tuple
    powers: tuple


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def series(self, method: str, user: int, representation: str = "analytic"):
        """``(powers, bers)`` arrays of one curve."""
        col = "ber_analytic" if representation == "analytic" else "ber_mc"
        sel = [r for r in self.rows if r.method == method and r.user == user]
        return (np.array([r.power_dbm for r in sel]), np.array([getattr(r, col) for r in sel]))

    def total(self, method: str, representation: str = "analytic"):
        """Sum over users of one representation, per power."""
        col = "ber_analytic" if representation == "analytic" else "ber_mc"
        powers = sorted({r.power_dbm for r in self.rows if r.method == method})
        return np.array(powers), np.array([
            sum(getattr(r, col) for r in self.rows if r.method == method and r.power_dbm == p)
            for p in powers])


def _canonical(methods):
    names = [m.upper() for m in methods]
    unknown = sorted(set(names) - set(METHODS))
    if unknown:
        raise ValueError(f"unknown methods: {', '.join(unknown)}")
    if not names:
        raise ValueError("at least one method is required")
    return [m for m in METHODS if m in names]


def _with_dependencies(methods):
    need = set(methods)
    for m in ("MM", "JO"):
        if m in need:
            need.add(_CANDIDATE_SOURCE[m])
    return [m for m in OPTIMIZED if m in need]


def _nan_mc(K):
    nan = np.full(K, math.nan)
    return nan, nan, nan


def sweep(config, methods, power_grid_dbm, *, mc_trials: int | None = None, seed: int | None = None,
          opt_config: OptimizerConfig = OptimizerConfig(), resolution: float | None = None) -> SweepResult:
    """Run every method over an ascending power grid.

    Parameters
    ----------
    config : ScenarioConfig
    methods : iterable of str
        Subset of ``NO, AO, JO, MM, OMA, DRIS``.
    power_grid_dbm : sequence of float
        Ascending ``P_max`` values.
    mc_trials : int, optional
        Monte Carlo draws per point; ``None`` uses ``config.trials`` and 0
        disables simulation (OMA and DRIS then produce NaN rows).
    seed : int, optional
        Overrides ``config.seed``.
    opt_config : OptimizerConfig
        Settings for the AO, JO and MM runs.
    resolution : float, optional
        Simulation grid spacing in meters.

    Notes
    -----
    Optimised methods run by continuation along the grid. ``JO`` also
    considers the ``AO`` solution at each budget and ``MM`` the ``JO``
    solution, so requesting ``MM`` alone still runs the ``AO`` and ``JO``
    paths internally.
    """
    order = _canonical(methods)
    grid = [float(p) for p in power_grid_dbm]
    if not grid:
        raise ValueError("power grid is empty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("power grid must be sorted ascending")
    trials = config.trials if mc_trials is None else int(mc_trials)
    seed = config.seed if seed is None else seed
    K = config.K
    equal = config.equal_layout()
    mc_kw = dict(resolution=resolution)

    paths = {}
    for m in _with_dependencies(order):
        src = _CANDIDATE_SOURCE.get(m)
        cands = [[r.variables] for r in paths[src]] if src else None
        try:
            paths[m] = optimize_path(config, m, grid, opt_config, candidates=cands)
        except Exception as exc:
            raise SweepError(m, math.nan, exc) from exc

    rows = []
    for m in order:
        if m == "NO":
            allocs = [OptVariables((p,) * K, equal.widths) for p in grid]
            analytic = []
            for p in grid:
                try:
                    analytic.append(evaluate_no(config.replace(p_max_dbm=p), opt_config).ber)
                except Exception as exc:
                    raise SweepError(m, p, exc) from exc
            mc = (estimate_ber_grid(config, equal, [a.p_dbm for a in allocs], trials, seed, **mc_kw)
                  if trials else None)
        elif m in OPTIMIZED:
            allocs = [r.variables for r in paths[m]]
            analytic = [r.ber for r in paths[m]]
            mc = None
            if trials:
                mc = []
                for p, a in zip(grid, allocs):
                    try:
                        mc.append(estimate_ber(config, a.layout(config.height), trials, seed, a.p_dbm, **mc_kw))
                    except Exception as exc:
                        raise SweepError(m, p, exc) from exc
        else:
            allocs = [OptVariables((p,) * K, equal.widths) for p in grid]
            analytic = [(math.nan,) * K] * len(grid)
            mc = None
            if trials:
                pts = [a.p_dbm for a in allocs]
                try:
                    if m == "OMA":
                        mc = run_oma_baseline(config, equal, trials, seed, power_points=pts, **mc_kw)
                    else:
                        mc = estimate_ber_grid(config, equal, pts, trials, seed, kind="dris", **mc_kw)
                except Exception as exc:
                    raise SweepError(m, grid[0], exc) from exc
        for j, p in enumerate(grid):
            ber, lo, hi = (mc[j].ber, mc[j].ci_low, mc[j].ci_high) if mc is not None else _nan_mc(K)
            for k in range(K):
                rows.append(SweepRow(m, p, k, float(analytic[j][k]), float(ber[k]), float(lo[k]),
                                     float(hi[k]), tuple(float(w) for w in allocs[j].widths),
                                     tuple(float(q) for q in allocs[j].p_dbm)))

    meta = {
        "package_version": __version__,
        "scenario": config.to_dict(),
        "methods": order,
        "power_grid_dbm": grid,
        "mc_trials": trials,
        "seed": seed,
        "grid_resolution_m": config.grid_resolution if resolution is None else resolution,
        "optimizer": {k: (repr(v) if not isinstance(v, (int, float, type(None))) else v)
                      for k, v in vars(opt_config).items()},
        "final_quadrature": repr(ACCURATE),
    }
    return SweepResult(rows, meta)


def _fmt(x: float) -> str:
    return repr(float(x))


def export_csv(result: SweepResult, path) -> None:
    """Write one line per row; tuples are ``;``-joined and floats use ``repr``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        for r in result.rows:
            w.writerow([r.method, _fmt(r.power_dbm), r.user, _fmt(r.ber_analytic), _fmt(r.ber_mc),
                        _fmt(r.mc_ci_low), _fmt(r.mc_ci_high), ";".join(_fmt(v) for v in r.widths),
                        ";".join(_fmt(v) for v in r.powers)])


def read_csv(path) -> SweepResult:
    """Inverse of :func:`export_csv` (metadata is not stored in the CSV)."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        if tuple(next(reader)) != HEADER:
            raise ValueError("unexpected CSV header")
        for rec in reader:
            tup = lambda s: tuple(float(v) for v in s.split(";")) if s else ()
            rows.append(SweepRow(rec[0], float(rec[1]), int(rec[2]), *(float(v) for v in rec[3:7]),
                                 tup(rec[7]), tup(rec[8])))
    return SweepResult(rows)


def emit_plot_data(result: SweepResult, path) -> list:
    """Write ``<method>_user<k>_<analytic|mc>.csv`` series plus ``metadata.json``.

    Series whose values are all NaN are skipped. Returns the written paths.
    """
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    keys = []
    for r in result.rows:
        if (r.method, r.user) not in keys:
            keys.append((r.method, r.user))
    for method, user in keys:
        for rep in ("analytic", "mc"):
            powers, bers = result.series(method, user, rep)
            if np.all(np.isnan(bers)):
                continue
            f = out / f"{method}_user{user + 1}_{rep}.csv"
            with open(f, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(("power_dbm", "ber"))
                for p, b in zip(powers, bers):
                    w.writerow((_fmt(p), _fmt(b)))
            written.append(f)
    meta = out / "metadata.json"
    with open(meta, "w") as fh:
        json.dump(result.metadata, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    written.append(meta)
    return written

