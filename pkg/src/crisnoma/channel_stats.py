"""Moments of the effective channel components and the CFs they induce.

For a partition of width ``W_k`` and height ``H`` the coherent component
``gamma_kk`` has mean ``sqrt(P eta / nu) * (pi/4) * W_k * H``. Its second
moment, and that of the residual components ``gamma_ki``, are quadruple
integrals of a correlation kernel over pairs of surface points; with an
isotropic correlation they collapse to one radial integral weighted by the
pair-distance density of the rectangle (:func:`pair_integral`).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate

from .special import (
    CorrelationKind,
    CorrelationModel,
    DEFAULT_TERMS,
    correlation,
    kernel_gi,
    kernel_gk,
    kernel_gk_minus_one,
)

__all__ = [
    "EffectiveChannelStats",
    "PartitionLayout",
    "QuadratureSpec",
    "UserLinkParams",
    "cf_effective",
    "cf_gamma_kk",
    "cf_re_gamma_ki",
    "effective_stats",
    "gi_kernel",
    "gk_kernel",
    "link_stats",
    "log_cf_effective",
    "mean_gamma_kk",
    "omega",
    "pair_distance_weight",
    "pair_integral",
]


@dataclass(frozen=True)
class UserLinkParams:
    """Transmit power (mW), cascaded path loss and square-QAM order of a user."""

    tx_power: float
    path_loss: float
    mod_order: int

    def __post_init__(self):
        if not self.tx_power > 0:
            raise ValueError("tx_power must be positive")
        if not self.path_loss > 0:
            raise ValueError("path_loss must be positive")
        m = math.isqrt(int(self.mod_order))
        if m * m != self.mod_order or m < 2 or m & (m - 1):
            raise ValueError(f"unsupported modulation order {self.mod_order}")

    @classmethod
    def from_geometry(cls, p_dbm, d_ur, d_rb, psi, mod_order):
        return cls(10.0 ** (p_dbm / 10.0), d_ur ** -psi * d_rb ** -psi, mod_order)

    @property
    def qam_scale(self) -> float:
        return 2.0 * (self.mod_order - 1) / 3.0

    @property
    def amplitude(self) -> float:
        """``sqrt(P eta / nu)``, the common factor of every gamma term."""
        return math.sqrt(self.tx_power * self.path_loss / self.qam_scale)


@dataclass(frozen=True)
class PartitionLayout:
    widths: tuple
    height: float

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(float(w) for w in self.widths))
        if any(w < 0 for w in self.widths):
            raise ValueError("partition widths must be non-negative")
        if not self.height > 0:
            raise ValueError("height must be positive")

    @property
    def total_width(self) -> float:
        return float(sum(self.widths))

    @property
    def edges(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.widths)])

    @classmethod
    def equal(cls, width, height, n):
        return cls((width / n,) * n, height)


@dataclass(frozen=True)
class QuadratureSpec:
    """How the radial integrals are evaluated.

    ``panel`` is the maximum panel width as a fraction of the wavelength;
    each panel gets ``nodes`` Gauss-Legendre points, or adaptive
    Gauss-Kronrod refinement to ``tol`` when ``adaptive`` is set.
    ``terms`` is the 2F1 truncation (``None`` = converged series).
    """

    panel: float = 0.125
    nodes: int = 16
    terms: int | None = DEFAULT_TERMS
    adaptive: bool = False
    tol: float = 1e-10


ACCURATE = QuadratureSpec(panel=0.125, nodes=24, terms=None)


@dataclass(frozen=True)
class EffectiveChannelStats:
    mean_kk: float
    var_kk: float
    var_re_ki: Mapping[int, float] = field(default_factory=dict)

    @property
    def gamma_scale(self) -> float:
        return self.var_kk / self.mean_kk if self.mean_kk > 0 else 0.0

    @property
    def gamma_shape(self) -> float:
        if self.var_kk > 0:
            return self.mean_kk ** 2 / self.var_kk
        return math.inf if self.mean_kk > 0 else 0.0

    @property
    def interference_var(self) -> float:
        return float(sum(self.var_re_ki.values()))


def mean_gamma_kk(link: UserLinkParams, width_k: float, height: float) -> float:
    if width_k < 0 or height <= 0:
        raise ValueError("need width_k >= 0 and height > 0")
    return link.amplitude * (math.pi / 4.0) * width_k * height


def pair_distance_weight(r, width, height):
    """Angular factor ``w(r)`` of the pair-distance density of a rectangle.

    ``∫∫∫∫ g(|p - p'|) dp dp' = 4 ∫_0^D r g(r) w(r) dr`` for a ``width`` x
    ``height`` rectangle with diagonal ``D``. Symmetric in the two sides.
    """
    a, b = (width, height) if width >= height else (height, width)
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    diag = math.hypot(a, b)
    near = r <= b
    mid = (r > b) & (r <= a)
    far = (r > a) & (r < diag)
    rn = r[near]
    out[near] = a * b * math.pi / 2 - (a + b) * rn + rn * rn / 2
    rm = r[mid]
    out[mid] = (a * b * np.arcsin(np.minimum(b / rm, 1.0)) + a * np.sqrt(rm * rm - b * b)
                - a * rm - b * b / 2)
    rf = r[far]
    out[far] = (a * b * (np.arcsin(np.minimum(b / rf, 1.0)) - np.arccos(np.minimum(a / rf, 1.0)))
                + a * np.sqrt(np.maximum(rf * rf - b * b, 0.0))
                + b * np.sqrt(np.maximum(rf * rf - a * a, 0.0))
                - (a * a + b * b + rf * rf) / 2)
    return out


@functools.lru_cache(maxsize=16)
def _legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def _panel_edges(width, height, max_panel):
    a, b = max(width, height), min(width, height)
    breaks = sorted({0.0, b, a, math.hypot(a, b)})
    edges = [0.0]
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi <= lo:
            continue
        n = max(1, math.ceil((hi - lo) / max_panel))
        edges.extend(np.linspace(lo, hi, n + 1)[1:])
    return np.asarray(edges)


def _radial_nodes(width, height, max_panel, nodes):
    edges = _panel_edges(width, height, max_panel)
    x, w = _legendre(nodes)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = (hi - lo) / 2
    r = (lo + half * (x + 1)).ravel()
    wt = (half * w).ravel()
    return r, wt


def pair_integral(kernel: Callable, width: float, height: float,
                  wavelength: float, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Quadruple integral of ``kernel(|p - p'|)`` over a rectangle, via one radial integral."""
    if width <= 0 or height <= 0:
        return 0.0
    max_panel = quad.panel * wavelength
    if quad.adaptive:
        total = 0.0
        for lo, hi in zip(*(lambda e: (e[:-1], e[1:]))(_panel_edges(width, height, max_panel))):
            f = lambda r: r * kernel(np.asarray(r)) * pair_distance_weight(np.asarray(r), width, height)
            val, _ = integrate.quad(f, lo, hi, epsabs=quad.tol * (width * height) ** 2 / 4,
                                    epsrel=1e-12, limit=200)
            total += val
        return 4.0 * total
    r, wt = _radial_nodes(width, height, max_panel, quad.nodes)
    return 4.0 * float(np.sum(wt * r * kernel(r) * pair_distance_weight(r, width, height)))


def gk_kernel(model: CorrelationModel, terms=DEFAULT_TERMS) -> Callable:
    return lambda r: kernel_gk(correlation(model, r) ** 2, terms)


def gi_kernel(model: CorrelationModel, terms=DEFAULT_TERMS) -> Callable:
    return lambda r: kernel_gi(correlation(model, r), terms)


def _gk_minus_one_kernel(model, terms):
    return lambda r: kernel_gk_minus_one(correlation(model, r) ** 2, terms)


def omega(link: UserLinkParams, width_x: float, height: float, kernel: Callable,
          wavelength: float, quad: QuadratureSpec = QuadratureSpec()) -> float:
    """Second moment ``(P eta pi^2 / (16 nu)) ∫∫∫∫ kernel`` over a ``width_x`` x ``height`` strip."""
    integral = pair_integral(kernel, width_x, height, wavelength, quad)
    return link.amplitude ** 2 * math.pi ** 2 / 16.0 * integral


def link_stats(links: Sequence[UserLinkParams], layout: PartitionLayout,
               model: CorrelationModel, quad: QuadratureSpec = QuadratureSpec()):
    """Per-user :class:`EffectiveChannelStats` for a given partition layout.

    ``Var[gamma_kk]`` is integrated as ``Omega`` of ``g_k - 1``: the constant
    part of ``g_k`` reproduces ``E[gamma_kk]^2`` exactly, so subtracting it
    analytically avoids cancelling two nearly equal numbers.
    """
    if len(links) != len(layout.widths):
        raise ValueError("one partition per user is required")
    H, lam = layout.height, model.wavelength
    uncorrelated = model.kind is CorrelationKind.NONE
    base_k, base_i = [], []
    for w in layout.widths:
        if uncorrelated or w == 0:
            base_k.append(0.0)
            base_i.append(0.0)
            continue
        base_k.append(pair_integral(_gk_minus_one_kernel(model, quad.terms), w, H, lam, quad))
        base_i.append(pair_integral(gi_kernel(model, quad.terms), w, H, lam, quad))
    scale = math.pi ** 2 / 16.0
    out = []
    for k, link in enumerate(links):
        amp2 = link.amplitude ** 2
        mean = mean_gamma_kk(link, layout.widths[k], H)
        var = amp2 * scale * base_k[k]
        if var < -1e-9 * mean ** 2:
            raise ArithmeticError(f"negative variance for user {k}: quadrature misconfigured")
        var_ki = {i: 0.5 * amp2 * scale * base_i[i] for i in range(len(links)) if i != k}
        out.append(EffectiveChannelStats(mean, max(var, 0.0), var_ki))
    return out


def effective_stats(scenario, layout: PartitionLayout, powers_dbm=None,
                    quad: QuadratureSpec = QuadratureSpec()):
    """:func:`link_stats` for a scenario object at the given transmit powers."""
    return link_stats(scenario.links(powers_dbm), layout, scenario.correlation_model, quad)


def log_cf_effective(t, stats: EffectiveChannelStats):
    """``log Phi_{h_eff}(t)`` under the gamma/Gaussian approximation (vectorised)."""
    t = np.asarray(t, dtype=float)
    if stats.var_kk > 0:
        out = -stats.gamma_shape * np.log(1.0 - 1j * stats.gamma_scale * t)
    else:
        out = 1j * stats.mean_kk * t
    return out - 0.5 * stats.interference_var * t * t


def cf_gamma_kk(z, stats: EffectiveChannelStats):
    z = np.asarray(z, dtype=float)
    if stats.var_kk > 0:
        out = (1.0 - 1j * stats.gamma_scale * z) ** (-stats.gamma_shape)
    else:
        out = np.exp(1j * stats.mean_kk * z)
    return complex(out) if out.ndim == 0 else out


def cf_re_gamma_ki(z, var: float):
    if var < 0:
        raise ValueError("variance must be non-negative")
    z = np.asarray(z, dtype=float)
    out = np.exp(-0.5 * var * z * z) + 0j
    return complex(out) if out.ndim == 0 else out


def cf_effective(z, k: int, all_stats: Sequence[EffectiveChannelStats]):
    stats = all_stats[k]
    out = cf_gamma_kk(z, stats)
    for var in stats.var_re_ki.values():
        out = out * cf_re_gamma_ki(z, var)
    return out
