"""Experiment description and its INI-style text format.

A scenario document has four sections::

    [system]
    carrier_frequency_hz = 28e9
    noise_variance_mw = 1e-9
    path_loss_exponent = 2.2
    d_rb_m = 30
    p_max_dbm = 30            ; optional

    [users]
    distances_m = 20, 50
    mod_orders = 64, 16

    [surface]
    width = 10 lambda         ; unit suffix required: "lambda" or "m"
    height = 5 lambda
    correlation = sinc        ; optional: sinc | none
    kind = cris               ; optional: cris | dris

    [simulation]
    trials = 100000           ; optional
    seed = 0                  ; optional
    grid_resolution = 0.125 lambda   ; optional
"""

from __future__ import annotations

import configparser
import dataclasses
import math
import re
from dataclasses import dataclass

from .channel_stats import PartitionLayout, UserLinkParams
from .qterms import UnsupportedModulation, pam_side
from .special import SPEED_OF_LIGHT, CorrelationKind, CorrelationModel

__all__ = ["ScenarioConfig", "ScenarioParseError", "ScenarioValidationError", "parse_scenario"]


class ScenarioParseError(ValueError):
    pass


class ScenarioValidationError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid scenario: " + "; ".join(self.problems))


@dataclass(frozen=True)
class ScenarioConfig:
    d_ur: tuple
    mod_orders: tuple
    d_rb: float
    psi: float
    sigma_n_sq: float
    f_carrier: float
    width: float
    height: float
    correlation: CorrelationKind = CorrelationKind.SINC
    surface: str = "cris"
    p_max_dbm: float = 30.0
    trials: int = 100_000
    seed: int = 0
    grid_resolution: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "d_ur", tuple(float(d) for d in self.d_ur))
        object.__setattr__(self, "mod_orders", tuple(int(m) for m in self.mod_orders))
        problems = []
        if len(self.d_ur) < 1:
            problems.append("K must be at least 1")
        if len(self.d_ur) != len(self.mod_orders):
            problems.append("distances_m and mod_orders must have the same length")
        if any(not d > 0 for d in self.d_ur):
            problems.append("user distances must be positive")
        for m in self.mod_orders:
            try:
                pam_side(m)
            except UnsupportedModulation as exc:
                problems.append(str(exc))
        for name in ("d_rb", "sigma_n_sq", "f_carrier", "width", "height", "psi"):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be positive")
        try:
            object.__setattr__(self, "correlation", CorrelationKind(self.correlation))
        except ValueError:
            problems.append(f"unknown correlation model {self.correlation!r}")
        if self.surface not in ("cris", "dris"):
            problems.append(f"unknown surface kind {self.surface!r}")
        if self.trials < 1:
            problems.append("trials must be positive")
        if problems:
            raise ScenarioValidationError(problems)
        if self.grid_resolution is None:
            object.__setattr__(self, "grid_resolution", self.wavelength / 8)

    @property
    def K(self) -> int:
        return len(self.d_ur)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_carrier

    @property
    def correlation_model(self) -> CorrelationModel:
        return CorrelationModel(self.correlation, self.wavelength)

    def powers(self, powers_dbm=None):
        if powers_dbm is None:
            return (self.p_max_dbm,) * self.K
        if len(powers_dbm) != self.K:
            raise ValueError("one power per user is required")
        return tuple(float(p) for p in powers_dbm)

    def links(self, powers_dbm=None, mod_orders=None, power_scale=1.0):
        mods = self.mod_orders if mod_orders is None else mod_orders
        out = []
        for p, d, m in zip(self.powers(powers_dbm), self.d_ur, mods):
            link = UserLinkParams.from_geometry(p, d, self.d_rb, self.psi, m)
            if power_scale != 1.0:
                link = dataclasses.replace(link, tx_power=link.tx_power * power_scale)
            out.append(link)
        return out

    def equal_layout(self) -> PartitionLayout:
        return PartitionLayout.equal(self.width, self.height, self.K)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        lam = self.wavelength
        return {
            "K": self.K,
            "distances_m": list(self.d_ur),
            "mod_orders": list(self.mod_orders),
            "d_rb_m": self.d_rb,
            "path_loss_exponent": self.psi,
            "noise_variance_mw": self.sigma_n_sq,
            "carrier_frequency_hz": self.f_carrier,
            "wavelength_m": lam,
            "width_m": self.width,
            "width_lambda": self.width / lam,
            "height_m": self.height,
            "height_lambda": self.height / lam,
            "correlation": self.correlation.value,
            "surface": self.surface,
            "p_max_dbm": self.p_max_dbm,
            "trials": self.trials,
            "seed": self.seed,
            "grid_resolution_m": self.grid_resolution,
        }


_SCHEMA = {
    "system": {"carrier_frequency_hz", "noise_variance_mw", "path_loss_exponent", "d_rb_m", "p_max_dbm"},
    "users": {"distances_m", "mod_orders"},
    "surface": {"width", "height", "correlation", "kind"},
    "simulation": {"trials", "seed", "grid_resolution"},
}
_REQUIRED = {
    "system": ("carrier_frequency_hz", "noise_variance_mw", "path_loss_exponent", "d_rb_m"),
    "users": ("distances_m", "mod_orders"),
    "surface": ("width", "height"),
}


_LENGTH = re.compile(r"^\s*([-+0-9.eE]+)\s*(lambda|m)\s*$")


def parse_length(text: str, wavelength: float) -> float:
    """``"5 lambda"``, ``"0.125lambda"`` or ``"0.05 m"`` to meters."""
    match = _LENGTH.match(text)
    if not match:
        raise ValueError(f"length {text!r} needs a unit suffix 'lambda' or 'm'")
    value = float(match.group(1))
    return value * wavelength if match.group(2) == "lambda" else value


def _floats(text):
    return [float(v) for v in text.replace(",", " ").split()]


def parse_scenario(text: str) -> ScenarioConfig:
    """Parse and validate a scenario document.

    Raises :class:`ScenarioParseError` on malformed input (with the line
    number when the parser provides one) and :class:`ScenarioValidationError`
    listing every violated field.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ScenarioParseError(str(exc)) from exc

    problems = []
    for section in cp.sections():
        if section not in _SCHEMA:
            problems.append(f"unknown section [{section}]")
            continue
        for key in cp[section]:
            if key not in _SCHEMA[section]:
                problems.append(f"unknown key {section}.{key}")
    for section, keys in _REQUIRED.items():
        for key in keys:
            if not cp.has_option(section, key):
                problems.append(f"missing required field {section}.{key}")
    if problems:
        raise ScenarioValidationError(problems)

    def get(section, key, conv, default=None):
        if not cp.has_option(section, key):
            return default
        raw = cp.get(section, key)
        try:
            return conv(raw)
        except ValueError as exc:
            problems.append(f"{section}.{key}: {exc}")
            return default

    f_carrier = get("system", "carrier_frequency_hz", float, math.nan)
    lam = SPEED_OF_LIGHT / f_carrier if f_carrier and f_carrier > 0 else math.nan
    kw = dict(
        f_carrier=f_carrier,
        sigma_n_sq=get("system", "noise_variance_mw", float, math.nan),
        psi=get("system", "path_loss_exponent", float, math.nan),
        d_rb=get("system", "d_rb_m", float, math.nan),
        p_max_dbm=get("system", "p_max_dbm", float, 30.0),
        d_ur=get("users", "distances_m", _floats, []),
        mod_orders=get("users", "mod_orders", lambda s: [int(v) for v in _floats(s)], []),
        width=get("surface", "width", lambda s: parse_length(s, lam), math.nan),
        height=get("surface", "height", lambda s: parse_length(s, lam), math.nan),
        correlation=get("surface", "correlation", str.strip, "sinc"),
        surface=get("surface", "kind", str.strip, "cris"),
        trials=get("simulation", "trials", lambda s: int(float(s)), 100_000),
        seed=get("simulation", "seed", int, 0),
        grid_resolution=get("simulation", "grid_resolution", lambda s: parse_length(s, lam), None),
    )
    if problems:
        raise ScenarioValidationError(problems)
    return ScenarioConfig(**kw)
