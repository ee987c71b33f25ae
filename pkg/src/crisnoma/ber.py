"""Unconditional BER by characteristic-function inversion.

For a real random variable ``X`` with CF ``Phi``,

    E[Q(X / sigma)] = 1/2 + (1/pi) ∫_0^∞ Re(j e^{-z^2/2} Phi(z / sigma) / z) dz,

so averaging a :class:`~crisnoma.qterms.QTermTable` over the channel only
needs the CF of ``X_q = sum_k a_kq h_eff_k``, which factorises over users.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel_stats import EffectiveChannelStats, QuadratureSpec, effective_stats, log_cf_effective
from .qterms import QTermTable, derive_qterm_table

log = logging.getLogger(__name__)

__all__ = [
    "BerQuadrature",
    "NoiseModel",
    "analytic_ber",
    "ber_integrand",
    "ber_user",
    "decoding_order",
    "expected_q",
    "max_ber",
    "sum_ber",
]


@dataclass(frozen=True)
class NoiseModel:
    """Receiver noise ``n ~ CN(0, 2 sigma_n^2)``; ``sigma_n_sq`` in mW."""

    sigma_n_sq: float

    def __post_init__(self):
        if not self.sigma_n_sq > 0:
            raise ValueError("sigma_n_sq must be positive")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma_n_sq)


@dataclass(frozen=True)
class BerQuadrature:
    """Panelled Gauss-Legendre rule on ``[0, z_max]``.

    Panels are sized so each resolves the CF oscillation (``osc`` radians per
    panel) and stays within the analyticity strip of the gamma CF; the range
    is cut where the integrand envelope drops below ``env_tol``.
    """

    nodes: int = 20
    z_max: float = 8.1
    max_panel: float = 1.0
    osc: float = 8.0
    env_tol: float = 1e-17
    max_panels: int = 20000


class IntegrationError(ArithmeticError):
    pass


@functools.lru_cache(maxsize=8)
def _legendre(n):
    return np.polynomial.legendre.leggauss(n)


def _stats_arrays(stats: Sequence[EffectiveChannelStats]):
    mean = np.array([s.mean_kk for s in stats])
    theta = np.array([s.gamma_scale for s in stats])
    alpha = np.array([s.gamma_shape if s.var_kk > 0 else 0.0 for s in stats])
    ivar = np.array([s.interference_var for s in stats])
    return mean, theta, alpha, ivar


def _log_envelope(z, A, theta, alpha, ivar, sigma):
    # log of e^{-z^2/2} |Phi_X(z / sigma)| / z for each row of A, z shape (R,)
    t2 = (A * (z[:, None] / sigma)) ** 2
    g = -0.5 * alpha * np.log1p(theta ** 2 * t2) - 0.5 * ivar * t2
    return -0.5 * z * z - np.log(z) + g.sum(axis=1)


def _cutoffs(A, theta, alpha, ivar, sigma, quad):
    R = A.shape[0]
    target = math.log(quad.env_tol)
    lo = np.full(R, 1e-12)
    hi = np.full(R, quad.z_max)
    done = _log_envelope(hi, A, theta, alpha, ivar, sigma) > target
    for _ in range(60):
        mid = np.sqrt(lo * hi)
        above = _log_envelope(mid, A, theta, alpha, ivar, sigma) > target
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    return np.where(done, quad.z_max, hi)


def ber_integrand(z, a, stats: Sequence[EffectiveChannelStats], sigma: float):
    """``Re(j e^{-z^2/2} Phi_X(z / sigma) / z)``; at ``z = 0`` returns the limit ``-E[X] / sigma``."""
    z = np.asarray(z, dtype=float)
    a = np.asarray(a, dtype=float)
    logphi = sum((log_cf_effective(a[k] * z / sigma, s) for k, s in enumerate(stats) if a[k] != 0),
                 np.zeros_like(z, dtype=complex))
    phi = np.exp(logphi - 0.5 * z * z)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = -np.imag(phi) / z
    limit = -float(a @ np.array([s.mean_kk for s in stats])) / sigma
    return np.where(z == 0, limit, out)


def expected_q(A, stats: Sequence[EffectiveChannelStats], sigma: float,
               quad: BerQuadrature = BerQuadrature()) -> np.ndarray:
    """``E[Q(a_q . h_eff / sigma)]`` for every row ``a_q`` of ``A``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    mean, theta, alpha, ivar = _stats_arrays(stats)
    out = np.full(A.shape[0], 0.5)
    active = np.any(A != 0, axis=1)
    if not active.any():
        return out
    Aa = A[active]
    zc = _cutoffs(Aa, theta, alpha, ivar, sigma, quad)
    omega = np.abs(Aa @ mean) / sigma
    with np.errstate(divide="ignore"):
        strip = np.min(np.where((Aa != 0) & (theta > 0), sigma / (np.abs(Aa) * theta), np.inf), axis=1)
    width = np.minimum.reduce([np.full_like(zc, quad.max_panel), quad.osc / np.maximum(omega, 1e-300),
                               2.0 * strip])
    n_pan = np.ceil(zc / width).astype(np.int64)
    if np.any(n_pan > quad.max_panels):
        raise IntegrationError(f"CF inversion needs {int(n_pan.max())} panels")
    # bucket rows by panel count (powers of two) so each bucket is one 2-D evaluation
    bucket = 2 ** np.ceil(np.log2(np.maximum(n_pan, 1))).astype(np.int64)
    x, w = _legendre(quad.nodes)
    res = np.empty(Aa.shape[0])
    for nb in np.unique(bucket):
        rows = np.nonzero(bucket == nb)[0]
        edges = np.linspace(0.0, 1.0, nb + 1)
        u = ((edges[:-1, None] + edges[1:, None]) / 2 + (edges[1:, None] - edges[:-1, None]) / 2 * x).ravel()
        wu = ((edges[1:, None] - edges[:-1, None]) / 2 * w).ravel()
        z = zc[rows, None] * u[None, :]  # (r, n)
        logphi = np.zeros(z.shape, dtype=complex)
        for k, s in enumerate(stats):
            ak = Aa[rows, k]
            if not np.any(ak):
                continue
            logphi += log_cf_effective(ak[:, None] * z / sigma, s)
        vals = -np.imag(np.exp(logphi - 0.5 * z * z)) / z
        res[rows] = zc[rows] * (vals @ wu)
    out[active] = 0.5 + res / math.pi
    return out


def ber_user(k: int, table: QTermTable, stats: Sequence[EffectiveChannelStats], noise: NoiseModel,
             quad: BerQuadrature = BerQuadrature()) -> float:
    """Average BER of user ``k`` over the approximated channel distribution."""
    if table.n_users != len(stats):
        raise ValueError("table and stats describe different user counts")
    eq = expected_q(table.coeffs[k], stats, noise.sigma, quad)
    val = float(np.sum(table.weights[k] * eq))
    if val < -1e-6 or val > 1 + 1e-6:
        raise IntegrationError(f"BER of user {k} evaluated to {val}")
    if val < 0 or val > 1:
        log.debug("clamping BER %.3g of user %d", val, k)
    return min(max(val, 0.0), 1.0)


def decoding_order(stats: Sequence[EffectiveChannelStats]):
    """Users sorted by descending mean effective channel (ties by index)."""
    return tuple(sorted(range(len(stats)), key=lambda k: (-stats[k].mean_kk, k)))


def table_for(stats: Sequence[EffectiveChannelStats], mod_orders, sic_order=None) -> QTermTable:
    """Q-term table derived at the mean effective channel vector."""
    order = decoding_order(stats) if sic_order is None else sic_order
    h_ref = np.array([s.mean_kk for s in stats])
    return derive_qterm_table(len(stats), mod_orders, order, h_ref)


def analytic_ber(scenario, layout, powers_dbm=None, quad: QuadratureSpec = QuadratureSpec(),
                 ber_quad: BerQuadrature = BerQuadrature(), sic_order=None):
    """Per-user analytical BER of a scenario at a given allocation."""
    stats = effective_stats(scenario, layout, powers_dbm, quad)
    table = table_for(stats, scenario.mod_orders, sic_order)
    noise = NoiseModel(scenario.sigma_n_sq)
    return np.array([ber_user(k, table, stats, noise, ber_quad) for k in range(len(stats))])


def sum_ber(tables, stats, noise, quad: BerQuadrature = BerQuadrature()) -> float:
    return float(sum(ber_user(k, tables, stats, noise, quad) for k in range(len(stats))))


def max_ber(tables, stats, noise, quad: BerQuadrature = BerQuadrature()) -> float:
    return float(max(ber_user(k, tables, stats, noise, quad) for k in range(len(stats))))
