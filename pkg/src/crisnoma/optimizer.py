"""Penalty-method allocation of transmit powers and partition widths.

The cost is ``f = 10 log10(sum_k BER_k)`` (or a smoothed max for the
min-max variant). Upper bounds enter an exterior-penalty Lagrangian

    L = f + sum_k xi_k max(0, P_k - P_max) + sum_k delta_k max(0, W_k - W)
          + omega (sum_k W_k - W)^2,

with widths measured in units of ``W`` inside the penalty and the gradient.
The inner loop is projected gradient descent with BFGS-scaled directions
and Armijo backtracking on forward-difference gradients; the outer loop grows
the multipliers of violated constraints. Lower bounds ``W_k >= 0`` and
``P_k >= P_max - 60 dB`` are enforced by projection.

Every outer iterate is projected onto the feasible set (powers clipped,
widths rescaled to sum to ``W``) and scored with the accurate quadrature;
the best such point is returned.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .ber import BerQuadrature, NoiseModel, ber_user, table_for
from .channel_stats import ACCURATE, PartitionLayout, QuadratureSpec, link_stats

log = logging.getLogger(__name__)

__all__ = [
    "Method",
    "NoFeasiblePoint",
    "OptVariables",
    "OptimizationResult",
    "OptimizerConfig",
    "PenaltyState",
    "evaluate_no",
    "finite_diff_gradient",
    "optimize",
    "penalty_objective",
]

BER_FLOOR = 1e-300


class Method(str, Enum):
    JO = "JO"
    AO = "AO"
    NO = "NO"
    MM = "MM"


class NoFeasiblePoint(RuntimeError):
    pass


@dataclass(frozen=True)
class OptVariables:
    p_dbm: tuple
    widths: tuple

    def __post_init__(self):
        object.__setattr__(self, "p_dbm", tuple(float(p) for p in self.p_dbm))
        object.__setattr__(self, "widths", tuple(float(w) for w in self.widths))
        if len(self.p_dbm) != len(self.widths):
            raise ValueError("one power and one width per user")

    @property
    def K(self) -> int:
        return len(self.p_dbm)

    def to_array(self, total_width: float) -> np.ndarray:
        return np.concatenate([self.p_dbm, np.asarray(self.widths) / total_width])

    @classmethod
    def from_array(cls, x, total_width: float) -> "OptVariables":
        K = len(x) // 2
        return cls(tuple(x[:K]), tuple(np.asarray(x[K:]) * total_width))

    def layout(self, height: float) -> PartitionLayout:
        return PartitionLayout(tuple(max(w, 0.0) for w in self.widths), height)


@dataclass(frozen=True)
class PenaltyState:
    xi: tuple
    delta: tuple
    omega_w: float
    growth: float = 10.0
    outer: int = 0

    @classmethod
    def initial(cls, K: int, value: float = 1.0, growth: float = 10.0) -> "PenaltyState":
        return cls((value,) * K, (value,) * K, value, growth)

    @classmethod
    def zero(cls, K: int) -> "PenaltyState":
        return cls((0.0,) * K, (0.0,) * K, 0.0)

    def grow(self, power_viol, width_viol, sum_viol: bool) -> "PenaltyState":
        """Multiply the multipliers of violated constraints by ``growth``."""
        g = self.growth
        return replace(
            self,
            xi=tuple(x * g if v else x for x, v in zip(self.xi, power_viol)),
            delta=tuple(d * g if v else d for d, v in zip(self.delta, width_viol)),
            omega_w=self.omega_w * g if sum_viol else self.omega_w,
            outer=self.outer + 1,
        )


@dataclass(frozen=True)
class OptimizerConfig:
    outer_iters: int = 8
    inner_iters: int = 200
    grad_tol: float = 1e-6
    ftol: float = 1e-9
    fd_step_db: float = 1e-3
    fd_step_width: float = 1e-3
    initial_multiplier: float = 1.0
    growth: float = 10.0
    tau: float = 20.0
    power_floor_db: float = 60.0
    power_ceiling_db: float = 30.0
    max_step_db: float = 3.0
    max_step_width: float = 0.25
    constraint_tol: float = 1e-6
    feasibility_tol: float = 1e-3
    quad: QuadratureSpec = QuadratureSpec()
    ber_quad: BerQuadrature = BerQuadrature()
    final_quad: QuadratureSpec = ACCURATE
    threads: int | None = None


@dataclass(frozen=True)
class TraceRow:
    outer: int
    inner: int
    objective_db: float
    max_violation: float
    step: float


@dataclass
class OptimizationResult:
    variables: OptVariables
    objective_db: float
    ber: tuple
    method: Method
    trace: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)
    evaluations: int = 0

    @property
    def sum_ber(self) -> float:
        return float(sum(self.ber))

    @property
    def max_ber(self) -> float:
        return float(max(self.ber))

    def export_trace(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["outer", "inner", "objective_db", "max_violation", "step"])
            for r in self.trace:
                w.writerow([r.outer, r.inner, repr(r.objective_db), repr(r.max_violation), repr(r.step)])


def _threads(config: OptimizerConfig) -> int:
    if config.threads is not None:
        return max(1, config.threads)
    env = os.environ.get("CRIS_NOMA_THREADS")
    return max(1, int(env)) if env else 1


class BerCost:
    """Per-user analytic BER and the scalar cost of one method."""

    def __init__(self, scenario, method: Method = Method.JO, quad: QuadratureSpec = QuadratureSpec(),
                 ber_quad: BerQuadrature = BerQuadrature(), tau: float = 20.0):
        self.scenario = scenario
        self.method = Method(method)
        self.quad = quad
        self.ber_quad = ber_quad
        self.tau = tau
        self.noise = NoiseModel(scenario.sigma_n_sq)
        self.calls = 0

    def bers(self, v: OptVariables, quad: QuadratureSpec | None = None) -> np.ndarray:
        self.calls += 1
        sc = self.scenario
        stats = link_stats(sc.links(v.p_dbm), v.layout(sc.height), sc.correlation_model,
                           self.quad if quad is None else quad)
        table = table_for(stats, sc.mod_orders)
        return np.array([ber_user(k, table, stats, self.noise, self.ber_quad) for k in range(len(stats))])

    def value(self, bers, tau: float | None = None) -> float:
        if self.method is Method.MM:
            t = self.tau if tau is None else tau
            logs = np.log10(np.maximum(bers, BER_FLOOR))
            top = logs.max()
            if math.isinf(t):
                return 10.0 * top
            return 10.0 * (top + math.log(np.sum(np.exp(t * (logs - top)))) / t)
        return 10.0 * math.log10(max(float(np.sum(bers)), BER_FLOOR))

    def __call__(self, v: OptVariables, tau: float | None = None) -> float:
        return self.value(self.bers(v), tau)


def violations(v: OptVariables, scenario):
    """Per-user power excess (dB), per-user width excess and sum mismatch, both in units of ``W``."""
    W = scenario.width
    p = np.maximum(0.0, np.asarray(v.p_dbm) - scenario.p_max_dbm)
    w = np.maximum(0.0, np.asarray(v.widths) / W - 1.0)
    s = abs(sum(v.widths) / W - 1.0)
    return p, w, s


def penalty_terms(v: OptVariables, state: PenaltyState, scenario) -> float:
    p, w, s = violations(v, scenario)
    return float(np.dot(state.xi, p) + np.dot(state.delta, w) + state.omega_w * s * s)


def penalty_objective(vars: OptVariables, state: PenaltyState, scenario, cost: Callable | None = None) -> float:
    """Exterior-penalty Lagrangian at ``vars`` (widths clamped at zero first)."""
    v = OptVariables(vars.p_dbm, tuple(max(w, 0.0) for w in vars.widths))
    cost = BerCost(scenario) if cost is None else cost
    return cost(v) + penalty_terms(v, state, scenario)


def finite_diff_gradient(vars: OptVariables, state: PenaltyState, scenario, step=(1e-3, 1e-3), *,
                         func: Callable | None = None, mask=None, threads: int = 1, central: bool = False,
                         f0: float | None = None) -> np.ndarray:
    """Forward-difference gradient in ``(P_dB, W_k / W)`` coordinates.

    ``step`` is ``(dB step, width step as a fraction of W)``. ``func`` maps
    :class:`OptVariables` to the scalar to differentiate (default: the
    penalty objective). Components where ``mask`` is false are zero.
    """
    W = scenario.width
    func = (lambda v: penalty_objective(v, state, scenario)) if func is None else func
    x = vars.to_array(W)
    n = x.size
    K = n // 2
    h = np.concatenate([np.full(K, step[0]), np.full(K, step[1])])
    idx = [i for i in range(n) if mask is None or mask[i]]

    def shifted(i, sign):
        xs = x.copy()
        xs[i] += sign * h[i]
        return func(OptVariables.from_array(xs, W))

    jobs = [(i, 1.0) for i in idx] + ([(i, -1.0) for i in idx] if central else [])
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            vals = list(pool.map(lambda a: shifted(*a), jobs))
    else:
        vals = [shifted(*a) for a in jobs]
    grad = np.zeros(n)
    if central:
        m = len(idx)
        for j, i in enumerate(idx):
            grad[i] = (vals[j] - vals[m + j]) / (2 * h[i])
    else:
        base = func(vars) if f0 is None else f0
        for j, i in enumerate(idx):
            grad[i] = (vals[j] - base) / h[i]
    return grad


def project_feasible(v: OptVariables, scenario, floor_db: float = 60.0) -> OptVariables:
    """Clip powers into ``[P_max - floor, P_max]`` and rescale widths to sum to ``W``."""
    p = np.clip(v.p_dbm, scenario.p_max_dbm - floor_db, scenario.p_max_dbm)
    w = np.maximum(np.asarray(v.widths), 0.0)
    total = w.sum()
    w = np.full(w.size, scenario.width / w.size) if total <= 0 else w * (scenario.width / total)
    return OptVariables(tuple(p), tuple(w))


def no_point(scenario) -> OptVariables:
    K = scenario.K
    return OptVariables((scenario.p_max_dbm,) * K, (scenario.width / K,) * K)


def _result(cost: BerCost, v: OptVariables, method, config, trace=None, evaluations=0) -> OptimizationResult:
    bers = cost.bers(v, config.final_quad)
    p, w, s = violations(v, cost.scenario)
    res = {"power_excess_db": float(p.max()), "width_excess": float(w.max()), "width_sum_error": float(s),
           "min_width": float(min(v.widths))}
    # the reported min-max objective is the exact maximum, not the smoothed one
    return OptimizationResult(v, cost.value(bers, math.inf), tuple(float(b) for b in bers), Method(method),
                              trace or [], res, evaluations)


def evaluate_no(scenario, config: OptimizerConfig = OptimizerConfig()) -> OptimizationResult:
    """Equal widths ``W/K`` and every user at ``P_max``; no iterations."""
    cost = BerCost(scenario, Method.JO, config.quad, config.ber_quad)
    return _result(cost, no_point(scenario), Method.NO, config, evaluations=1)


def _inner(x, lagrangian, grad_fn, project, config, outer, max_violation, trace, max_step, free):
    """Projected descent with Armijo backtracking; returns the last iterate.

    Directions are the negative gradient scaled by a BFGS inverse-Hessian
    estimate over the ``free`` coordinates, which copes with the
    ill-conditioning that growing penalty weights introduce. ``max_step``
    caps each coordinate's move per trial step.
    """
    n = int(free.sum())
    eye = np.eye(n)
    fx = lagrangian(x)
    g = grad_fn(x, fx)
    H = None
    stall = 0
    for it in range(config.inner_iters):
        gf = g[free]
        if float(np.linalg.norm(gf)) < config.grad_tol:
            break
        fresh = H is None
        if fresh:
            H = eye * (0.5 / max(float(np.max(np.abs(gf))), 1e-12))
        d = np.zeros_like(x)
        d[free] = -H @ gf
        if float(g @ d) >= 0:
            H = eye * (0.5 / max(float(np.max(np.abs(gf))), 1e-12))
            d[free] = -H @ gf
            fresh = True
        d *= min(1.0, float(np.min(max_step / np.maximum(np.abs(d), 1e-300))))
        t = 1.0
        accepted = False
        for _ in range(40):
            x_new = project(x + t * d)
            step = x_new - x
            if not np.any(step):
                break
            f_new = lagrangian(x_new)
            if f_new <= fx + 1e-4 * float(g @ step):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            if fresh:
                break
            H = None
            continue
        g_new = grad_fn(x_new, f_new)
        sv, yv = step[free], (g_new - g)[free]
        sy = float(sv @ yv)
        if sy > 1e-12 * float(np.linalg.norm(sv) * np.linalg.norm(yv)):
            if fresh:
                H = eye * (sy / float(yv @ yv))
            rho = 1.0 / sy
            V = eye - rho * np.outer(sv, yv)
            H = V @ H @ V.T + rho * np.outer(sv, sv)
        improvement = fx - f_new
        x, fx, g = x_new, f_new, g_new
        trace.append(TraceRow(outer, it, fx, max_violation(x), float(np.linalg.norm(step))))
        stall = stall + 1 if improvement <= config.ftol * (1.0 + abs(fx)) else 0
        if stall >= 3:
            break
    return x


def optimize(scenario, method="JO", config: OptimizerConfig = OptimizerConfig(),
             init: OptVariables | None = None, candidates: Sequence[OptVariables] = ()) -> OptimizationResult:
    """Minimise the analytic BER cost of ``method`` over powers and/or widths.

    Parameters
    ----------
    scenario : ScenarioConfig
    method : {"JO", "AO", "MM", "NO"}
        ``JO`` optimises powers and widths for the sum BER, ``AO`` only the
        widths with every user at ``P_max``, ``MM`` powers and widths for a
        log-sum-exp smoothed maximum BER. ``NO`` returns :func:`evaluate_no`.
    init : OptVariables, optional
        Starting point; defaults to the equal-share point.
    candidates : sequence of OptVariables
        Extra points (projected onto the feasible set) the result must not
        be worse than, e.g. the solution at a smaller power budget.
    """
    method = Method(method)
    if method is Method.NO:
        return evaluate_no(scenario, config)
    K, W = scenario.K, scenario.width
    cost = BerCost(scenario, method, config.quad, config.ber_quad, config.tau)
    start = no_point(scenario) if init is None else init
    if method is Method.AO:
        start = OptVariables((scenario.p_max_dbm,) * K, start.widths)
    mask = np.array([method is not Method.AO] * K + [True] * K)
    lo = np.concatenate([np.full(K, scenario.p_max_dbm - config.power_floor_db), np.zeros(K)])
    # safeguard box far outside the feasible set; keeps exterior iterates finite
    hi = np.concatenate([np.full(K, scenario.p_max_dbm + config.power_ceiling_db), np.full(K, 2.0)])
    max_step = np.concatenate([np.full(K, config.max_step_db), np.full(K, config.max_step_width)])
    threads = _threads(config)

    def project(x):
        y = np.clip(x, lo, hi)
        if method is Method.AO:
            y[:K] = scenario.p_max_dbm
        return y

    def max_violation(x):
        p, w, s = violations(OptVariables.from_array(x, W), scenario)
        return float(max(p.max(), w.max(), s))

    state = PenaltyState.initial(K, config.initial_multiplier, config.growth)
    tau = config.tau
    x = start.to_array(W)
    trace: list = []
    least_violation = math.inf
    best_v = project_feasible(start, scenario, config.power_floor_db)
    best = _result(cost, best_v, method, config)
    for c in candidates:
        if method is Method.AO:
            c = OptVariables((scenario.p_max_dbm,) * K, c.widths)
        r = _result(cost, project_feasible(c, scenario, config.power_floor_db), method, config)
        if r.objective_db < best.objective_db:
            best = r
    for j in range(config.outer_iters):
        def lagrangian(z, state=state, tau=tau):
            v = OptVariables.from_array(z, W)
            return cost(v, tau) + penalty_terms(v, state, scenario)

        def grad_fn(z, fz, state=state, tau=tau):
            v = OptVariables.from_array(z, W)
            return finite_diff_gradient(v, state, scenario, (config.fd_step_db, config.fd_step_width),
                                        func=lambda u: lagrangian(u.to_array(W)), mask=mask,
                                        threads=threads, f0=fz)

        x = _inner(x, lagrangian, grad_fn, project, config, j, max_violation, trace, max_step, mask)
        v = OptVariables.from_array(x, W)
        cand = _result(cost, project_feasible(v, scenario, config.power_floor_db), method, config)
        if cand.objective_db < best.objective_db:
            best = cand
        p, w, s = violations(v, scenario)
        least_violation = min(least_violation, float(max(p.max(), w.max(), s)))
        tol = config.constraint_tol
        log.debug("%s outer %d: f=%.6g dB, violation=%.3g", method.value, j, cost(v, tau), max(p.max(), w.max(), s))
        if p.max() <= tol and w.max() <= tol and s <= tol and j > 0:
            break
        state = state.grow(p > tol, w > tol, s > tol)
        if method is Method.MM:
            tau *= 2.0

    if least_violation > config.feasibility_tol:
        raise NoFeasiblePoint(f"{method.value}: constraint violation {least_violation:.3g} "
                              f"after {config.outer_iters} outer iterations")
    best.trace = trace
    best.evaluations = cost.calls
    return best


def warm_start(previous: OptVariables, scenario) -> OptVariables:
    """Shift a solution found at a smaller budget so its largest power sits at ``P_max``."""
    shift = scenario.p_max_dbm - max(previous.p_dbm)
    return OptVariables(tuple(p + shift for p in previous.p_dbm), previous.widths)


def optimize_path(scenario, method, power_grid, config: OptimizerConfig = OptimizerConfig(),
                  candidates=None) -> list:
    """Optimise at each budget of an ascending ``power_grid`` by continuation.

    Each budget starts from the previous solution shifted up to the new
    ``P_max`` and keeps the unshifted previous solution as a candidate, so
    the optimised cost cannot get worse as the budget grows. ``candidates``
    optionally gives one sequence of extra candidate points per budget.
    """
    out = []
    prev = None
    for i, p in enumerate(power_grid):
        sc = scenario.replace(p_max_dbm=float(p))
        extra = list(candidates[i]) if candidates is not None else []
        if prev is None:
            res = optimize(sc, method, config, candidates=extra)
        else:
            res = optimize(sc, method, config, init=warm_start(prev, sc), candidates=[prev] + extra)
        out.append(res)
        prev = res.variables
    return out
