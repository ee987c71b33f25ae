"""Scalar special functions and spatial correlation kernels.

The Gauss hypergeometric series is evaluated through its term ratio, so no
factorials are formed. Two accuracy regimes are offered: a fixed truncation
(``terms=L``) used inside optimisation loops, and a converged evaluation
(``terms=None``) that sums until the terms fall below ``1e-14`` and, at the
``z = 1`` endpoint, adds an asymptotic tail estimate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 2.99792458e8

DEFAULT_TERMS = 6
MAX_TERMS = 10_000
SERIES_TOL = 1e-14

__all__ = [
    "CorrelationKind",
    "CorrelationModel",
    "DEFAULT_TERMS",
    "correlation",
    "gauss_2f1",
    "gauss_2f1_closed_form_at_one",
    "kernel_gi",
    "kernel_gk",
]


class CorrelationKind(str, enum.Enum):
    SINC = "sinc"
    NONE = "none"


@dataclass(frozen=True)
class CorrelationModel:
    """Isotropic correlation between two surface points at distance ``r``.

    ``sinc`` uses the normalised sinc, ``rho(r) = sin(pi x) / (pi x)`` with
    ``x = 2 r / wavelength``, so the first zero sits at half a wavelength.
    """

    kind: CorrelationKind = CorrelationKind.SINC
    wavelength: float = SPEED_OF_LIGHT / 28e9

    def __post_init__(self):
        object.__setattr__(self, "kind", CorrelationKind(self.kind))
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")

    def __call__(self, r):
        return correlation(self, r)


def correlation(model: CorrelationModel, r):
    """Evaluate ``rho(r)`` for scalar or array distances ``r >= 0``."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("distance must be non-negative")
    if model.kind is CorrelationKind.SINC:
        out = np.sinc(2.0 * r_arr / model.wavelength)
    else:
        out = np.where(r_arr == 0.0, 1.0, 0.0)
    if np.ndim(r) == 0:
        return float(out)
    return out


def _check_args(c, z):
    if c <= 0 and float(c).is_integer():
        raise ValueError(f"c = {c} is a non-positive integer")
    z_arr = np.asarray(z, dtype=float)
    if np.any((z_arr < 0) | (z_arr > 1)) or np.any(np.isnan(z_arr)):
        raise ValueError("z must lie in [0, 1]")
    return z_arr


def gauss_2f1_closed_form_at_one(a: float, b: float, c: float) -> float:
    """Gauss summation ``Gamma(c) Gamma(c-a-b) / (Gamma(c-a) Gamma(c-b))``."""
    if c - a - b <= 0:
        raise ValueError("series diverges at z = 1 unless c - a - b > 0")
    lg = math.lgamma
    sign = 1.0
    for v in (c - a, c - b):
        if v <= 0 and float(v).is_integer():
            return 0.0
        sign *= math.copysign(1.0, math.gamma(v)) if v < 0 else 1.0
    for v in (c, c - a - b):
        sign *= math.copysign(1.0, math.gamma(v)) if v < 0 else 1.0
    return sign * math.exp(lg(c) + lg(c - a - b) - lg(c - a) - lg(c - b))


def _series_fixed(a, b, c, z, terms):
    total = np.zeros_like(z)
    term = np.ones_like(z)
    for n in range(terms):
        total += term
        term = term * ((a + n) * (b + n) / ((c + n) * (n + 1))) * z
    return total


def _series_converged(a, b, c, z):
    flat = z.ravel()
    total = np.zeros_like(flat)
    # only entries whose terms are still above tolerance are carried forward
    idx = np.arange(flat.size)
    zi = flat.copy()
    term = np.ones_like(flat)
    acc = np.zeros_like(flat)
    n = 0
    while n < MAX_TERMS and idx.size:
        acc += term
        term = term * ((a + n) * (b + n) / ((c + n) * (n + 1))) * zi
        n += 1
        done = np.abs(term) < SERIES_TOL
        if done.any():
            total[idx[done]] = acc[done]
            keep = ~done
            idx, zi, term, acc = idx[keep], zi[keep], term[keep], acc[keep]
    if idx.size:
        # At z = 1 the terms decay like C (n + d)**-(1 + s) with s = c - a - b,
        # so the unsummed remainder is close to term_n * (n + d - 1/2) / s.
        s = c - a - b
        if s > 0:
            d = ((a - c) * (a + c - 1) / 2 + (b - 1) * b / 2) / (a + b - c - 1)
            acc = acc + np.where(zi == 1.0, term * (n + d - 0.5) / s, 0.0)
        total[idx] = acc
    return total.reshape(z.shape)


def gauss_2f1(a: float, b: float, c: float, z, terms: int | None = DEFAULT_TERMS):
    """Truncated Gauss hypergeometric series ``2F1(a, b; c; z)`` on ``[0, 1]``.

    Parameters
    ----------
    a, b, c : float
        Series parameters. ``c`` must not be a non-positive integer.
    z : float or array_like
        Argument(s) in ``[0, 1]``.
    terms : int or None
        Number of series terms ``L`` (the sum runs over ``n = 0..L-1``).
        ``None`` sums until ``|term| < 1e-14`` or 10**4 terms.

    Returns
    -------
    float or ndarray
    """
    z_arr = _check_args(c, z)
    if terms is None:
        out = _series_converged(a, b, c, z_arr.astype(float))
    else:
        if terms < 1:
            raise ValueError("terms must be >= 1")
        out = _series_fixed(a, b, c, z_arr.astype(float), int(terms))
    if np.ndim(z) == 0:
        return float(out)
    return out


def _f_minus(z, terms):
    return gauss_2f1(-0.5, -0.5, 1.0, z, terms)


def kernel_gk(rho_sq, terms: int | None = DEFAULT_TERMS):
    """Squared ``2F1(-1/2, -1/2; 1; rho^2)``.

    ``(pi/4) * sqrt(kernel_gk(rho^2))`` is ``E[|h||h'|]`` for two unit-power
    Rayleigh variables with correlation ``rho``.
    """
    return _f_minus(rho_sq, terms) ** 2


def kernel_gk_minus_one(rho_sq, terms: int | None = DEFAULT_TERMS):
    """``kernel_gk(rho_sq) - 1`` without cancellation for small ``rho_sq``."""
    s = _f_minus(rho_sq, terms) - 1.0
    return s * (2.0 + s)


def kernel_gi(rho, terms: int | None = DEFAULT_TERMS):
    """``rho^2 * 2F1(-1/2, -1/2; 1; rho^2) * 2F1(1/2, 1/2; 2; rho^2)``."""
    rho = np.asarray(rho, dtype=float)
    if np.any(np.abs(rho) > 1):
        raise ValueError("|rho| must not exceed 1")
    z = rho * rho
    out = z * _f_minus(z, terms) * gauss_2f1(0.5, 0.5, 2.0, z, terms)
    return float(out) if out.ndim == 0 else out
