"""Link-level Monte Carlo of the partitioned surface with an SIC receiver.

The continuous aperture is discretised on a midpoint grid, correlated
Rayleigh fields are drawn through a factor of the sinc Gram matrix, the
per-partition phase profile turns each draw into a ``K x K`` matrix of
effective gains ``gamma_ki``, and a batched Levenberg-Marquardt solve
rotates the partitions so every user's effective channel is real.

A discrete surface is modelled as ``lambda/2`` patches that each apply one
phase; the patches are sampled on the same fine grid, so both surfaces see
identical fields and differ only in how finely the phase profile is set.

Trials are processed in chunks of a size fixed by the grid. Chunk ``c``
draws its fields from ``SeedSequence([seed, c, 0])`` and its symbols and
noise from ``SeedSequence([seed, c, 1])``, so results do not depend on
execution order and every transmit power in a sweep sees the same draws.
The OMA baseline reuses both streams; empirical statistics draw their
fields from ``SeedSequence([seed, c, 4])``.

Channel dumps use a length-prefixed binary format: the magic ``b"CRISCS01"``
followed by records ``<u8 payload_len>`` + ``<u4 K><u4 N><u8 seed>`` +
``K*N`` complex128 values of ``h`` (user-major) + ``N`` of ``g``, all
little-endian.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from .channel_stats import PartitionLayout, UserLinkParams
from .qterms import UnsupportedModulation, gray_bits, pam_levels, pam_side, sic_decode
from .special import CorrelationKind, CorrelationModel, correlation

log = logging.getLogger(__name__)

__all__ = [
    "ChannelSample",
    "CorrelationFactor",
    "EmpiricalStats",
    "MCResult",
    "ResolutionTooCoarse",
    "SurfaceGrid",
    "align_phases",
    "build_grid",
    "correlation_factor",
    "effective_gammas",
    "empirical_stats",
    "estimate_ber",
    "estimate_ber_grid",
    "read_samples",
    "run_oma_baseline",
    "sample_channels",
    "sic_detect",
    "simulate_conditional_ber",
    "write_samples",
]

CHUNK_ELEMENTS = 1 << 21
MAX_OMA_ORDER = 4096


class ResolutionTooCoarse(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SurfaceGrid:
    """Sample points of the aperture.

    ``element`` maps each point to the patch that shares its phase; it is
    ``None`` for a continuous surface, where every point is set on its own.
    ``partition`` is the partition of each point.
    """

    x: np.ndarray
    y: np.ndarray
    weight: np.ndarray
    partition: np.ndarray
    kind: str
    n_partitions: int
    element: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.x.size

    @property
    def n_elements(self) -> int:
        return self.size if self.element is None else int(self.element.max()) + 1

    def element_partition(self) -> np.ndarray:
        if self.element is None:
            return self.partition
        out = np.empty(self.n_elements, dtype=np.int64)
        out[self.element] = self.partition
        return out

    def partition_weights(self) -> np.ndarray:
        return np.bincount(self.partition, weights=self.weight, minlength=self.n_partitions)


def _midpoints(lo, hi, n):
    step = (hi - lo) / n
    return lo + (np.arange(n) + 0.5) * step, step


def _cells(lo, hi, resolution):
    return max(1, math.ceil((hi - lo) / resolution - 1e-9))


def build_grid(width: float, height: float, layout: PartitionLayout, kind: str = "cris",
               resolution: float | None = None, wavelength: float | None = None) -> SurfaceGrid:
    """Midpoint discretisation of the surface.

    ``cris`` grids each partition separately with cells no larger than
    ``resolution``, so partition areas are exact. ``dris`` divides the
    surface into ``lambda/2`` patches, assigns each patch to a partition by
    its centre, and samples every patch at ``resolution``.
    """
    if width <= 0 or height <= 0:
        raise ValueError("surface dimensions must be positive")
    if not math.isclose(layout.total_width, width, rel_tol=1e-9):
        raise ValueError("partition widths must sum to the surface width")
    if resolution is None or wavelength is None:
        raise ValueError("a resolution and the wavelength are required")
    if resolution > wavelength / 4 * (1 + 1e-12):
        raise ResolutionTooCoarse("grid resolution must not exceed a quarter wavelength")
    K = len(layout.widths)

    if kind == "cris":
        ys, dy = _midpoints(0.0, height, _cells(0.0, height, resolution))
        xs, ws, ps = [], [], []
        for k, (lo, hi) in enumerate(zip(layout.edges[:-1], layout.edges[1:])):
            if hi <= lo:
                continue
            cx, dx = _midpoints(lo, hi, _cells(lo, hi, resolution))
            xs.append(cx)
            ws.append(np.full(cx.size, dx * dy))
            ps.append(np.full(cx.size, k))
        cx, wx, px = map(np.concatenate, (xs, ws, ps))
        X, Y = np.meshgrid(cx, ys, indexing="ij")
        return SurfaceGrid(X.ravel(), Y.ravel(), np.repeat(wx, ys.size), np.repeat(px, ys.size), kind, K)

    if kind == "dris":
        nx = max(1, round(2 * width / wavelength))
        ny = max(1, round(2 * height / wavelength))
        ex, dx = _midpoints(0.0, width, nx)
        ey, dy = _midpoints(0.0, height, ny)
        sub = max(1, math.ceil(max(dx, dy) / resolution - 1e-9))
        ox = (np.arange(sub) + 0.5) / sub - 0.5
        inner = layout.edges[1:-1]
        epart = np.searchsorted(inner, ex, side="right")
        # point order: element (ix, iy), then sub-point (sx, sy)
        X = ex[:, None, None, None] + dx * ox[None, None, :, None]
        Y = ey[None, :, None, None] + dy * ox[None, None, None, :]
        X, Y = np.broadcast_arrays(X, Y)
        element = np.repeat(np.arange(nx * ny), sub * sub)
        part = np.repeat(np.repeat(epart, ny), sub * sub)
        w = np.full(element.size, dx * dy / sub ** 2)
        return SurfaceGrid(X.ravel(), Y.ravel(), w, part, kind, K, element)

    raise ValueError(f"unknown surface kind {kind!r}")


@dataclass(frozen=True, eq=False)
class CorrelationFactor:
    """``matrix @ matrix.T`` reproduces the grid correlation ``R``; ``None`` means identity."""

    matrix: np.ndarray | None
    size: int
    error: float = 0.0

    @property
    def identity(self) -> bool:
        return self.matrix is None

    @property
    def rank(self) -> int:
        return self.size if self.matrix is None else self.matrix.shape[1]


def correlation_matrix(grid: SurfaceGrid, model: CorrelationModel) -> np.ndarray:
    dist = np.hypot(grid.x[:, None] - grid.x[None, :], grid.y[:, None] - grid.y[None, :])
    return correlation(model, dist)


def correlation_factor(grid: SurfaceGrid, model: CorrelationModel, eps_clip: float = 1e-12,
                       max_error: float = 1e-8) -> CorrelationFactor:
    """Square-root factor of the correlation matrix of the grid points.

    Well-conditioned matrices get their Cholesky factor. The sinc Gram matrix
    of a fine grid is numerically rank-deficient, so otherwise eigenvalues
    below ``eps_clip * max`` are dropped and ``U sqrt(L)`` is returned.
    """
    if model.kind is CorrelationKind.NONE:
        return CorrelationFactor(None, grid.size)
    R = correlation_matrix(grid, model)
    evals, evecs = np.linalg.eigh(R)
    top = evals[-1]
    if evals[0] < -1e-6 * top:
        raise np.linalg.LinAlgError("correlation matrix is not positive semidefinite")
    if evals[0] > 1e-10 * top:
        F = np.linalg.cholesky(R)
    else:
        keep = evals > eps_clip * top
        F = evecs[:, keep] * np.sqrt(evals[keep])
    err = float(np.linalg.norm(F @ F.T - R) / np.linalg.norm(R))
    if err > max_error:
        raise np.linalg.LinAlgError(f"clipped factor misses R by {err:.2e}")
    return CorrelationFactor(F, grid.size, err)


@dataclass
class ChannelSample:
    """Fields at the grid points: ``h`` is ``(..., K, N)``, ``g`` is ``(..., N)``."""

    h: np.ndarray
    g: np.ndarray
    seed: int = 0


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_channels(factor: CorrelationFactor, K: int, rng_seed=0, batch: int | None = None) -> ChannelSample:
    """Draw ``K`` user-side fields and one BS-side field, all independent CN(0, R)."""
    rng = _rng(rng_seed)
    B = 1 if batch is None else batch
    z = rng.standard_normal((2 * B * (K + 1), factor.rank)) * math.sqrt(0.5)
    if not factor.identity:
        z = z @ factor.matrix.T
    z = z.reshape(2, B, K + 1, factor.size)
    fields = z[0] + 1j * z[1]
    h, g = fields[:, :K], fields[:, K]
    if batch is None:
        h, g = h[0], g[0]
    seed = int(rng_seed) if isinstance(rng_seed, (int, np.integer)) else 0
    return ChannelSample(h, g, seed)


def effective_gammas(sample: ChannelSample, grid: SurfaceGrid,
                     links: Sequence[UserLinkParams] | None = None) -> np.ndarray:
    """Discretised ``gamma_ki`` for every draw, shape ``(..., K, K)``.

    Each phase cell (a grid point, or a patch of a discrete surface) of
    partition ``i`` is rotated to co-phase ``h_i g`` over that cell, so
    ``gamma_ki = amp_k * sum_{cells in P_i} e^{-j angle(c_i)} c_k`` with
    ``c_k = sum_{points in cell} h_k g w``. With ``links=None`` the
    amplitudes are taken as 1.
    """
    h, g = sample.h, sample.g
    K = h.shape[-2]
    if grid.element is None:
        # a point's own phase can drop the BS-side phase: |c_k| carries |g|
        cells = h * (np.abs(g) * grid.weight)[..., None, :]
        ref = h[..., grid.partition, np.arange(grid.size)]
    else:
        agg = np.zeros((grid.size, grid.n_elements))
        agg[np.arange(grid.size), grid.element] = grid.weight
        cells = (h * g[..., None, :]) @ agg
        ref = cells[..., grid.element_partition(), np.arange(grid.n_elements)]
    mag = np.abs(ref)
    rot = np.divide(np.conj(ref), mag, out=np.ones_like(ref), where=mag > 0)
    member = np.zeros((rot.shape[-1], K))
    member[np.arange(rot.shape[-1]), grid.element_partition()] = 1.0
    gam = (cells * rot[..., None, :]) @ member
    if links is not None:
        gam = gam * np.array([l.amplitude for l in links])[:, None]
    d = np.arange(K)
    gam[..., d, d] = gam[..., d, d].real
    return gam


def align_phases(gammas, max_iter: int = 200, success_tol: float = 1e-10):
    """Rotate partitions so that ``Im(sum_i gamma_ki e^{j beta_i}) = 0`` for every ``k``.

    Batched Levenberg-Marquardt started at ``beta = 0``.

    Returns
    -------
    beta : ndarray, ``(..., K)``
    h_eff : ndarray, ``(..., K)``
        ``Re(sum_i gamma_ki e^{j beta_i})``.
    ok : ndarray of bool
        Draws whose squared residual is at most ``success_tol * sum_k gamma_kk^2``.
    """
    G = np.asarray(gammas, dtype=complex)
    single = G.ndim == 2
    if single:
        G = G[None]
    B, K, _ = G.shape
    scale = np.sum(np.abs(np.diagonal(G, axis1=1, axis2=2)) ** 2, axis=1)
    scale = np.where(scale > 0, scale, 1.0)
    beta = np.zeros((B, K))
    mu = np.full(B, 1e-3)
    c = G.sum(axis=2)
    obj = np.sum(c.imag ** 2, axis=1)
    eye = np.eye(K)

    for _ in range(max_iter):
        active = np.nonzero((obj > 1e-30 * scale) & (mu < 1e12))[0]
        if active.size == 0:
            break
        Ga, ba, ma = G[active], beta[active], mu[active]
        J = (Ga * np.exp(1j * ba)[:, None, :]).real
        r = c[active].imag
        JtJ = np.einsum("bki,bkj->bij", J, J)
        Jtr = np.einsum("bki,bk->bi", J, r)
        damp = np.einsum("bii->bi", JtJ) + 1e-30 * scale[active, None]
        lhs = JtJ + ma[:, None, None] * damp[:, :, None] * eye
        trial = ba + np.linalg.solve(lhs, -Jtr[..., None])[..., 0]
        c_new = np.einsum("bki,bi->bk", Ga, np.exp(1j * trial))
        obj_new = np.sum(c_new.imag ** 2, axis=1)
        better = obj_new < obj[active]
        acc, rej = active[better], active[~better]
        beta[acc], c[acc], obj[acc] = trial[better], c_new[better], obj_new[better]
        mu[acc] = np.maximum(mu[acc] / 10, 1e-12)
        mu[rej] *= 10

    ok = obj <= success_tol * scale
    if not ok.all():
        log.debug("phase alignment failed in %d of %d draws", int((~ok).sum()), B)
    if single:
        return beta[0], c[0].real, bool(ok[0])
    return beta, c.real, ok


def sic_detect(y, h_eff, mod_orders: Sequence[int], sic_order: Sequence[int]):
    """Hard SIC decisions for complex observations ``y``.

    Returns complex symbols on the odd-integer grid, shape ``y.shape + (K,)``.
    """
    y = np.asarray(y)
    h = np.asarray(h_eff, dtype=float)
    out = np.zeros(y.shape + (len(mod_orders),), dtype=complex)
    for part, unit in ((y.real, 1.0), (y.imag, 1j)):
        idx = sic_decode(part, h, mod_orders, sic_order)
        for u, M in enumerate(mod_orders):
            out[..., u] += unit * pam_levels(pam_side(M))[idx[..., u]]
    return out


def _draw_symbols(rng, B, mod_orders):
    """Level indices of one complex symbol per draw, ``(B, 2, K)``, and unit noise ``(B, 2)``."""
    idx = np.stack([rng.integers(0, pam_side(m), size=(B, 2)) for m in mod_orders], axis=-1)
    noise = rng.standard_normal((B, 2))
    return idx, noise


def _count_errors(h_eff, idx, noise, sigma, mod_orders, order):
    """Bit errors and bits per user for real gains ``h_eff`` of shape ``(B, K)``."""
    K = len(mod_orders)
    sides = [pam_side(m) for m in mod_orders]
    levels = np.stack([pam_levels(m)[idx[..., u]] for u, m in enumerate(sides)], axis=-1)
    y = np.sum(h_eff[:, None, :] * levels, axis=-1) + sigma * noise
    dec = sic_decode(y, h_eff[:, None, :], mod_orders, order)
    errors = np.zeros(K, dtype=np.int64)
    bits = np.zeros(K, dtype=np.int64)
    for u, m in enumerate(sides):
        gb = gray_bits(m)
        errors[u] = np.count_nonzero(gb[dec[..., u]] != gb[idx[..., u]])
        bits[u] = idx.shape[0] * 2 * gb.shape[1]
    return errors, bits


def simulate_conditional_ber(h_eff, mod_orders, sic_order, sigma: float, n_symbols: int, seed=0,
                             chunk: int = 1 << 18):
    """SIC detector BER at a fixed real channel vector (``n_symbols`` complex symbols).

    Returns ``(ber, errors, bits)`` per user.
    """
    rng = _rng(seed)
    h = np.asarray(h_eff, dtype=float)
    errors = np.zeros(len(mod_orders), dtype=np.int64)
    bits = np.zeros_like(errors)
    for b in _chunk_sizes(n_symbols, chunk):
        idx, noise = _draw_symbols(rng, b, mod_orders)
        e, n = _count_errors(np.broadcast_to(h, (b, h.size)), idx, noise, sigma, mod_orders, sic_order)
        errors += e
        bits += n
    return errors / bits, errors, bits


@dataclass
class MCResult:
    ber: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    errors: np.ndarray
    bits: np.ndarray
    trials: int
    alignment_failures: int = 0

    @classmethod
    def from_counts(cls, errors, bits, trials, failures=0):
        lo, hi = proportion_confint(errors, bits, alpha=0.05, method="wilson")
        return cls(errors / bits, np.asarray(lo, float), np.asarray(hi, float), errors, bits, trials, failures)


def _chunk_sizes(total, size):
    done = 0
    while done < total:
        b = min(size, total - done)
        yield b
        done += b


def chunk_size(grid: SurfaceGrid, K: int) -> int:
    return max(16, CHUNK_ELEMENTS // (grid.size * (K + 1)))


def scenario_grid(scenario, layout: PartitionLayout, kind: str | None = None,
                  resolution: float | None = None) -> SurfaceGrid:
    kind = scenario.surface if kind is None else kind
    res = scenario.grid_resolution if resolution is None else resolution
    return build_grid(scenario.width, scenario.height, layout, kind, res, scenario.wavelength)


def mean_order(links, layout: PartitionLayout):
    """Decoding order by descending mean coherent gain, as in the analysis."""
    means = [l.amplitude * w for l, w in zip(links, layout.widths)]
    return tuple(sorted(range(len(links)), key=lambda k: (-means[k], k)))


def _unit_draws(scenario, grid, factor, trials, seed, tag=0):
    """Yield ``(chunk_index, unit_gammas)`` with amplitudes factored out."""
    for c, b in enumerate(_chunk_sizes(trials, chunk_size(grid, scenario.K))):
        rng = np.random.default_rng(np.random.SeedSequence([seed, c, 2 * tag]))
        yield c, effective_gammas(sample_channels(factor, scenario.K, rng, batch=b), grid)


def estimate_ber_grid(scenario, layout: PartitionLayout, power_points, trials: int | None = None,
                      seed: int | None = None, *, kind: str | None = None, resolution: float | None = None,
                      sigma_n_sq: float | None = None, factor: CorrelationFactor | None = None,
                      sic_order=None) -> list:
    """:func:`estimate_ber` at several power vectors sharing the same draws.

    Scaling user ``k``'s row of ``gamma`` by ``sqrt(P_k)`` leaves the
    alignment solution unchanged, so draws are aligned once at unit
    amplitude and rescaled per power point.
    """
    trials = scenario.trials if trials is None else trials
    seed = scenario.seed if seed is None else seed
    grid = scenario_grid(scenario, layout, kind, resolution)
    factor = correlation_factor(grid, scenario.correlation_model) if factor is None else factor
    sigma = math.sqrt(scenario.sigma_n_sq if sigma_n_sq is None else sigma_n_sq)
    K, mods = scenario.K, scenario.mod_orders
    points = [scenario.links(p) for p in power_points]
    amps = [np.array([l.amplitude for l in links]) for links in points]
    orders = [mean_order(links, layout) if sic_order is None else tuple(sic_order) for links in points]
    errors = np.zeros((len(points), K), dtype=np.int64)
    bits = np.zeros_like(errors)
    failures = 0
    for c, gam in _unit_draws(scenario, grid, factor, trials, seed):
        _, h_unit, ok = align_phases(gam)
        failures += int(np.count_nonzero(~ok))
        rng = np.random.default_rng(np.random.SeedSequence([seed, c, 1]))
        idx, noise = _draw_symbols(rng, gam.shape[0], mods)
        for j, (a, order) in enumerate(zip(amps, orders)):
            e, n = _count_errors(h_unit * a, idx, noise, sigma, mods, order)
            errors[j] += e
            bits[j] += n
    return [MCResult.from_counts(errors[j], bits[j], trials, failures) for j in range(len(points))]


def estimate_ber(scenario, layout: PartitionLayout, trials: int | None = None, seed: int | None = None,
                 powers_dbm=None, **kwargs) -> MCResult:
    """Empirical per-user BER with Wilson 95% intervals, one symbol per channel draw.

    Keyword arguments are those of :func:`estimate_ber_grid`.
    """
    return estimate_ber_grid(scenario, layout, [powers_dbm], trials, seed, **kwargs)[0]


def run_oma_baseline(scenario, layout: PartitionLayout, trials: int | None = None, seed: int | None = None,
                     powers_dbm=None, *, power_points=None, kind: str | None = None,
                     resolution: float | None = None, factor: CorrelationFactor | None = None):
    """Time-slotted OMA: user ``k`` alone with order ``M_k**K`` and power ``K * P_k``.

    The surface keeps the NOMA partition profile, so in its slot user ``k``
    sees the co-phased gain of its own partition plus the residual gains
    through the others; the receiver derotates the total and detects
    coherently. Pass ``power_points`` for a list of results sharing draws.
    """
    trials = scenario.trials if trials is None else trials
    seed = scenario.seed if seed is None else seed
    K = scenario.K
    oma_mods = tuple(m ** K for m in scenario.mod_orders)
    for m in oma_mods:
        if m > MAX_OMA_ORDER:
            raise UnsupportedModulation(f"OMA order {m} exceeds {MAX_OMA_ORDER}")
    grid = scenario_grid(scenario, layout, kind, resolution)
    factor = correlation_factor(grid, scenario.correlation_model) if factor is None else factor
    sigma = math.sqrt(scenario.sigma_n_sq)
    pts = [powers_dbm] if power_points is None else list(power_points)
    amps = [np.array([l.amplitude for l in scenario.links(p, mod_orders=oma_mods, power_scale=K)]) for p in pts]
    errors = np.zeros((len(pts), K), dtype=np.int64)
    bits = np.zeros_like(errors)
    # same field and symbol streams as the NOMA estimator (common random numbers)
    for c, gam in _unit_draws(scenario, grid, factor, trials, seed):
        total = np.abs(gam.sum(axis=2))
        rng = np.random.default_rng(np.random.SeedSequence([seed, c, 1]))
        for k in range(K):
            idx, noise = _draw_symbols(rng, gam.shape[0], (oma_mods[k],))
            for j, a in enumerate(amps):
                e, n = _count_errors(total[:, k:k + 1] * a[k], idx, noise, sigma, (oma_mods[k],), (0,))
                errors[j, k] += e[0]
                bits[j, k] += n[0]
    out = [MCResult.from_counts(errors[j], bits[j], trials) for j in range(len(pts))]
    return out[0] if power_points is None else out


@dataclass
class EmpiricalStats:
    mean_kk: np.ndarray
    var_kk: np.ndarray
    var_re_ki: np.ndarray  # (K, K); diagonal unused
    cross_corr: np.ndarray  # corr(gamma_kk, Re gamma_ki); diagonal unused
    gamma_kk: np.ndarray  # (trials, K)
    h_eff: np.ndarray  # (trials, K), aligned
    approx_h_eff: np.ndarray  # gamma_kk + sum_{i != k} Re gamma_ki
    alignment_ok: np.ndarray


def empirical_stats(scenario, layout: PartitionLayout, trials: int, seed: int = 0, powers_dbm=None, *,
                    links=None, kind: str | None = None, resolution: float | None = None,
                    factor: CorrelationFactor | None = None) -> EmpiricalStats:
    """Sample moments of the effective channel components."""
    links = scenario.links(powers_dbm) if links is None else links
    amp = np.array([l.amplitude for l in links])
    grid = scenario_grid(scenario, layout, kind, resolution)
    factor = correlation_factor(grid, scenario.correlation_model) if factor is None else factor
    chunks = [gam * amp[:, None] for _, gam in _unit_draws(scenario, grid, factor, trials, seed, tag=2)]
    G = np.concatenate(chunks)
    _, h_eff, ok = align_phases(G)
    K = G.shape[1]
    d = np.arange(K)
    gkk = G[:, d, d].real
    re = G.real
    cross = np.zeros((K, K))
    for k in range(K):
        for i in range(K):
            if i != k and np.std(re[:, k, i]) > 0 and np.std(gkk[:, k]) > 0:
                cross[k, i] = np.corrcoef(gkk[:, k], re[:, k, i])[0, 1]
    return EmpiricalStats(gkk.mean(axis=0), gkk.var(axis=0, ddof=1), re.var(axis=0, ddof=1), cross,
                          gkk, h_eff, re.sum(axis=2), ok)


_MAGIC = b"CRISCS01"
_HEAD = struct.Struct("<IIQ")


def write_samples(path, samples: Iterable[ChannelSample]) -> int:
    """Write single-draw samples to ``path``; returns the record count."""
    n = 0
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        for s in samples:
            h = np.ascontiguousarray(s.h, dtype="<c16")
            g = np.ascontiguousarray(s.g, dtype="<c16")
            K, N = h.shape
            payload = _HEAD.pack(K, N, s.seed) + h.tobytes() + g.tobytes()
            fh.write(struct.pack("<Q", len(payload)))
            fh.write(payload)
            n += 1
    return n


def read_samples(path) -> list:
    out = []
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError("not a channel sample dump")
        while head := fh.read(8):
            (length,) = struct.unpack("<Q", head)
            payload = fh.read(length)
            if len(payload) != length:
                raise ValueError("truncated channel sample record")
            K, N, seed = _HEAD.unpack_from(payload)
            off = _HEAD.size
            h = np.frombuffer(payload, "<c16", K * N, off).reshape(K, N).copy()
            g = np.frombuffer(payload, "<c16", N, off + 16 * K * N).copy()
            out.append(ChannelSample(h, g, int(seed)))
    return out
