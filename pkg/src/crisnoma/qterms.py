"""Q-function expansion of the SIC bit error rate for superimposed square QAM.

Each real dimension of the received signal is ``y = sum_k h_k s_k + n`` with
``s_k`` drawn from a Gray-mapped PAM alphabet ``{±1, ±3, ...}`` and
``n ~ N(0, sigma^2)``. The SIC receiver slices the users in decoding order,
subtracting each decision before slicing the next one, so every decision is
a piecewise-constant function of ``y`` whose breakpoints are integer
combinations of the ``h_k``. Enumerating those breakpoints for every symbol
combination turns the conditional BER of user ``k`` into

    BER_k(h) = sum_q c_q Q(a_q . h / sigma)

with integer vectors ``a_q``. The breakpoint *ordering* depends on ``h``; a
table is exact for every ``h`` sharing the ordering of the reference vector
it was derived at.
"""

from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr

__all__ = [
    "QTermTable",
    "UnsupportedModulation",
    "derive_qterm_table",
    "gray_bits",
    "pam_levels",
    "sic_decode",
]


class UnsupportedModulation(ValueError):
    pass


def pam_side(mod_order: int) -> int:
    m = math.isqrt(int(mod_order))
    if m * m != mod_order or m < 2 or m & (m - 1):
        raise UnsupportedModulation(f"{mod_order} is not a square QAM order with an even power of two")
    return m


def pam_levels(m: int) -> np.ndarray:
    return np.arange(-(m - 1), m, 2)


def gray_bits(m: int) -> np.ndarray:
    """Reflected Gray labels of the ``m`` PAM levels, MSB first, shape ``(m, log2 m)``."""
    nb = m.bit_length() - 1
    idx = np.arange(m)
    g = idx ^ (idx >> 1)
    return ((g[:, None] >> np.arange(nb - 1, -1, -1)) & 1).astype(np.int8)


def slice_pam(r, h, m):
    """Index of the nearest level of ``h * pam_levels(m)``; ties go to the lower level."""
    bounds = np.arange(-m + 2, m - 1, 2)
    return np.sum(np.asarray(r)[..., None] > np.asarray(h)[..., None] * bounds, axis=-1)


def sic_decode(y, h, mod_orders: Sequence[int], order: Sequence[int]):
    """Successive slicing of real observations ``y``.

    ``h`` has shape ``y.shape + (K,)`` (or broadcasts to it). Returns level
    indices of shape ``y.shape + (K,)``.
    """
    y = np.asarray(y, dtype=float)
    h = np.broadcast_to(np.asarray(h, dtype=float), y.shape + (len(mod_orders),))
    out = np.zeros(y.shape + (len(mod_orders),), dtype=np.int64)
    r = y.copy()
    for u in order:
        m = pam_side(mod_orders[u])
        idx = slice_pam(r, h[..., u], m)
        out[..., u] = idx
        r = r - h[..., u] * pam_levels(m)[idx]
    return out


@dataclass(frozen=True)
class QTermTable:
    """Per-user weights ``c_q`` and integer coefficient vectors ``a_q``."""

    mod_orders: tuple
    sic_order: tuple
    weights: tuple
    coeffs: tuple

    @property
    def n_users(self) -> int:
        return len(self.mod_orders)

    def terms(self, k: int):
        return list(zip(self.weights[k].tolist(), map(tuple, self.coeffs[k].tolist())))

    def conditional_ber(self, k: int, h, sigma: float) -> float:
        x = self.coeffs[k] @ np.asarray(h, dtype=float) / sigma
        return float(np.sum(self.weights[k] * ndtr(-x)))

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# mod_orders {' '.join(map(str, self.mod_orders))}\n")
        buf.write(f"# sic_order {' '.join(map(str, self.sic_order))}\n")
        buf.write("# user c_q " + " ".join(f"a_{i + 1}" for i in range(self.n_users)) + "\n")
        for k in range(self.n_users):
            for c, a in zip(self.weights[k], self.coeffs[k]):
                buf.write(f"{k} {float(c)!r} {' '.join(str(int(v)) for v in a)}\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "QTermTable":
        mods = order = None
        rows = []
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "#":
                if parts[1] == "mod_orders":
                    mods = tuple(int(v) for v in parts[2:])
                elif parts[1] == "sic_order":
                    order = tuple(int(v) for v in parts[2:])
                continue
            rows.append((int(parts[0]), float(parts[1]), [int(v) for v in parts[2:]]))
        if mods is None or order is None:
            raise ValueError("missing mod_orders/sic_order header")
        K = len(mods)
        weights, coeffs = [], []
        for k in range(K):
            mine = [r for r in rows if r[0] == k]
            weights.append(np.array([r[1] for r in mine], dtype=float))
            coeffs.append(np.array([r[2] for r in mine], dtype=np.int64).reshape(-1, K))
        return cls(mods, order, tuple(weights), tuple(coeffs))


def nested_reference(mod_orders, order):
    """A channel vector for which every SIC stage sits inside the previous cell."""
    h = np.zeros(len(mod_orders))
    span = 0.0
    for pos, u in enumerate(reversed(order)):
        m = pam_side(mod_orders[u])
        h[u] = 1.0 if pos == 0 else 2.0 * span * (1.0 + 0.0137 * pos)
        span += h[u] * m
    return h


def _thresholds(mod_orders, order):
    """Symbolic SIC breakpoints in ``y``, one integer coefficient row each."""
    K = len(mod_orders)
    rows = []
    for s, u in enumerate(order):
        prev = order[:s]
        m = pam_side(mod_orders[u])
        prefixes = itertools.product(*(pam_levels(pam_side(mod_orders[p])) for p in prev))
        for prefix in prefixes:
            for b in range(-m + 2, m - 1, 2):
                row = np.zeros(K, dtype=np.int64)
                row[list(prev)] = prefix
                row[u] = b
                rows.append(row)
    return np.array(rows, dtype=np.int64).reshape(-1, K)


def ordering_signature(mod_orders, order, reference_h):
    """Hashable description of the breakpoint ordering at ``reference_h``."""
    coefs = _thresholds(mod_orders, order)
    vals = coefs @ np.asarray(reference_h, dtype=float)
    perm = np.argsort(vals, kind="stable")
    sv = vals[perm]
    scale = max(1.0, float(np.max(np.abs(sv)))) if sv.size else 1.0
    tie = np.diff(sv) <= 1e-12 * scale
    return tuple(perm.tolist()), tuple(tie.tolist())


_CACHE: dict = {}


def derive_qterm_table(K: int, mod_orders: Sequence[int], sic_order: Sequence[int] | None = None,
                       reference_h=None) -> QTermTable:
    """Enumerate SIC error events into a Q-term table.

    Parameters
    ----------
    K : int
        Number of users.
    mod_orders : sequence of int
        Square QAM order per user.
    sic_order : sequence of int, optional
        Decoding sequence (user indices). Defaults to ``0, 1, ..., K-1``.
    reference_h : array_like, optional
        Channel vector fixing the breakpoint ordering. Defaults to a nested
        (interference-free at high SNR) configuration.
    """
    mod_orders = tuple(int(m) for m in mod_orders)
    if len(mod_orders) != K or K < 1:
        raise ValueError("need one modulation order per user")
    sides = [pam_side(m) for m in mod_orders]
    order = tuple(range(K)) if sic_order is None else tuple(int(u) for u in sic_order)
    if sorted(order) != list(range(K)):
        raise ValueError("sic_order must be a permutation of the users")
    h_ref = nested_reference(mod_orders, order) if reference_h is None else np.asarray(reference_h, float)
    if h_ref.shape != (K,) or np.any(h_ref < 0):
        raise ValueError("reference_h must be K non-negative values")

    key = (mod_orders, order, ordering_signature(mod_orders, order, h_ref))
    if key in _CACHE:
        return _CACHE[key]

    coefs = _thresholds(mod_orders, order)
    vals = coefs @ h_ref
    perm = np.argsort(vals, kind="stable")
    coefs, vals = coefs[perm], vals[perm]
    if vals.size:
        scale = max(1.0, float(np.max(np.abs(vals))))
        keep = np.concatenate([[True], np.diff(vals) > 1e-12 * scale])
        coefs, vals = coefs[keep], vals[keep]
        gap = max(1.0, float(vals[-1] - vals[0]))
        points = np.concatenate([[vals[0] - gap], (vals[:-1] + vals[1:]) / 2, [vals[-1] + gap]])
    else:
        points = np.zeros(1)
    decided = sic_decode(points, h_ref, mod_orders, order)  # (n_int, K)
    n_int = points.size

    combos = np.array(list(itertools.product(*(range(m) for m in sides))), dtype=np.int64)
    level_vals = np.stack([pam_levels(m)[combos[:, u]] for u, m in enumerate(sides)], axis=1)

    weights, coeffs = [], []
    for k in range(K):
        gb = gray_bits(sides[k])
        nb = gb.shape[1]
        err = gb[decided[:, k]][None, :, :] != gb[combos[:, k]][:, None, :]  # (C, n_int, nb)
        prev = np.pad(err, ((0, 0), (1, 0), (0, 0)))[:, :-1]
        nxt = np.pad(err, ((0, 0), (0, 1), (0, 0)))[:, 1:]
        counts: dict = {}
        const = 0
        # A maximal error run over intervals i0..i1 contributes
        # Q(t_{i0-1} - mu) - Q(t_{i1} - mu), with t_{-1} = -inf, t_{n} = +inf.
        c_idx, i_idx, _ = np.nonzero(err & ~prev)
        const += int(np.sum(i_idx == 0))
        sel = i_idx > 0
        starts = coefs[i_idx[sel] - 1] - level_vals[c_idx[sel]]
        c_idx, i_idx, _ = np.nonzero(err & ~nxt)
        sel = i_idx < n_int - 1
        ends = coefs[i_idx[sel]] - level_vals[c_idx[sel]]
        for rows, sign in ((starts, 1), (ends, -1)):
            if rows.size == 0:
                continue
            uniq, cnt = np.unique(rows, axis=0, return_counts=True)
            for a, n in zip(map(tuple, uniq.tolist()), cnt.tolist()):
                counts[a] = counts.get(a, 0) + sign * n
        # Orient every argument to be non-negative at the reference, using
        # Q(-x) = 1 - Q(x); this keeps high-SNR sums free of cancellation.
        canon: dict = {}
        for a, n in counts.items():
            if n == 0:
                continue
            x = float(np.dot(a, h_ref))
            lead = next((v for v in a if v != 0), 0)
            if x < 0 or (x == 0 and lead < 0):
                const += n
                a, n = tuple(-v for v in a), -n
            canon[a] = canon.get(a, 0) + n
        zero = (0,) * K
        canon[zero] = canon.get(zero, 0) + 2 * const  # Q(0) = 1/2
        items = sorted((a, n) for a, n in canon.items() if n != 0)
        denom = combos.shape[0] * nb
        weights.append(np.array([n / denom for _, n in items], dtype=float))
        coeffs.append(np.array([a for a, _ in items], dtype=np.int64).reshape(-1, K))

    table = QTermTable(mod_orders, order, tuple(weights), tuple(coeffs))
    _CACHE[key] = table
    return table
