"""System parameters and the derived constants used by the analysis.

Every physical quantity lives in :class:`SystemConfig`; everything computed
from it (path losses, ``g`` factors, auxiliary constants of the closed-form
SER and its derivative) lives in :class:`DerivedConstants`.  Noise is
normalized so that ``N0 = 1`` and ``Ps = 10**(snr_db / 10)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np

LINKS = ("sr", "sd", "rd")


class ConfigError(ValueError):
    """Invalid configuration value or document."""


def _default_noise() -> dict[str, tuple[float, float]]:
    return {link: (0.5, 0.5) for link in LINKS}


def _default_power() -> dict[str, float]:
    return {link: 1.0 for link in LINKS}


@dataclass(frozen=True)
class SystemConfig:
    snr_db: float = 30.0
    modulation_order: int = 2
    ps_ratio: float = 0.8
    eh_efficiency: float = 0.6
    d_sd: float = 3.0
    d_sr: float = 1.5
    d_rd: float = 1.5
    pathloss_exponent: float = 2.7
    symbol_period: float = 1.0
    # (antenna, circuit) noise variance per link
    noise_split: Mapping[str, tuple[float, float]] = field(default_factory=_default_noise)
    # E|h|^2 per link
    avg_channel_power: Mapping[str, float] = field(default_factory=_default_power)

    def __post_init__(self) -> None:
        # normalize scalar/pair shorthands into per-link mappings
        noise = self.noise_split
        if not isinstance(noise, Mapping):
            pair = tuple(float(v) for v in noise)
            noise = {link: pair for link in LINKS}
        else:
            noise = {link: tuple(float(v) for v in noise[link]) for link in LINKS}
        power = self.avg_channel_power
        if not isinstance(power, Mapping):
            power = {link: float(power) for link in LINKS}
        else:
            power = {link: float(power[link]) for link in LINKS}
        object.__setattr__(self, "noise_split", noise)
        object.__setattr__(self, "avg_channel_power", power)
        self._validate()

    def _validate(self) -> None:
        m = self.modulation_order
        if int(m) != m or m < 2 or (m & (m - 1)) != 0:
            raise ConfigError(f"modulation_order must be a power of 2 >= 2, got {m!r}")
        if not 0.0 < self.ps_ratio < 1.0:
            raise ConfigError(f"ps_ratio must lie in (0, 1), got {self.ps_ratio!r}")
        if not 0.0 < self.eh_efficiency <= 1.0:
            raise ConfigError(f"eh_efficiency must lie in (0, 1], got {self.eh_efficiency!r}")
        for name in ("d_sd", "d_sr", "d_rd"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if not self.pathloss_exponent > 0:
            raise ConfigError("pathloss_exponent must be > 0")
        if not self.symbol_period > 0:
            raise ConfigError("symbol_period must be > 0")
        if not math.isfinite(self.snr_db):
            raise ConfigError("snr_db must be finite")
        for link, pair in self.noise_split.items():
            if len(pair) != 2 or min(pair) < 0 or sum(pair) <= 0:
                raise ConfigError(f"noise_split[{link}] must be two variances >= 0 with a positive sum")
        for link, p in self.avg_channel_power.items():
            if not p > 0:
                raise ConfigError(f"avg_channel_power[{link}] must be > 0")

    @property
    def slot_duration(self) -> float:
        return self.symbol_period / 2.0

    @property
    def tx_power(self) -> float:
        """Source power ``Ps`` with ``N0 = 1``."""
        return 10.0 ** (self.snr_db / 10.0)

    def noise_total(self, link: str) -> float:
        n1, n2 = self.noise_split[link]
        return n1 + n2

    def replace(self, **changes: Any) -> "SystemConfig":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(changes)
        return SystemConfig(**data)

    def to_dict(self) -> dict[str, Any]:
        return {
            f.name: (
                {k: list(v) if isinstance(v, tuple) else v for k, v in getattr(self, f.name).items()}
                if isinstance(getattr(self, f.name), Mapping)
                else getattr(self, f.name)
            )
            for f in fields(self)
        }


def config_from_dict(data: Mapping[str, Any]) -> SystemConfig:
    """Build a config from a JSON-like mapping; unknown keys are rejected."""
    known = {f.name for f in fields(SystemConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
    try:
        return SystemConfig(**data)
    except (TypeError, KeyError) as exc:
        raise ConfigError(f"malformed config: {exc}") from exc


def load_config(path: str | Path) -> SystemConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")
    return config_from_dict(data)


def path_loss(d: float, exponent: float = 2.7) -> float:
    """Bounded path loss ``1 / (1 + d**exponent)``."""
    if d < 0:
        raise ValueError(f"distance must be >= 0, got {d!r}")
    if exponent <= 0:
        raise ValueError(f"exponent must be > 0, got {exponent!r}")
    return 1.0 / (1.0 + d**exponent)


def rho_of_varrho(varrho):
    """Effective relay SNR scaling ``(1 - varrho) / (2 - varrho)``.

    Works elementwise on arrays; values outside (0, 1) are rejected.
    """
    v = np.asarray(varrho, dtype=float)
    if np.any((v <= 0) | (v >= 1)):
        raise ValueError("varrho must lie in (0, 1)")
    out = (1.0 - v) / (2.0 - v)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class DerivedConstants:
    loss_sd: float
    loss_sr: float
    loss_rd: float
    g_sd: float
    g_rd: float
    gamma_bar_sd: float
    gamma_bar_sr: float
    gamma_bar_rd: float
    snr: float
    a1: float
    a2: float
    a3: float  # nan for M = 2
    a4: float
    b1: float
    b2: float
    b3: float

    @property
    def a3_applicable(self) -> bool:
        return not math.isnan(self.a3)


def derive_constants(cfg: SystemConfig) -> DerivedConstants:
    M = cfg.modulation_order
    ts = cfg.slot_duration
    T = cfg.symbol_period
    delta = cfg.eh_efficiency
    snr = cfg.tx_power  # Ps / N0

    l_sd = path_loss(cfg.d_sd, cfg.pathloss_exponent)
    l_sr = path_loss(cfg.d_sr, cfg.pathloss_exponent)
    l_rd = path_loss(cfg.d_rd, cfg.pathloss_exponent)

    s2 = math.sin(math.pi / M) ** 2
    g_sd = s2 * ts * l_sd
    g_rd = s2 * ts * l_sr * l_rd

    gb_sd = snr * cfg.avg_channel_power["sd"]
    gb_sr = snr * cfg.avg_channel_power["sr"]
    gb_rd = snr * cfg.avg_channel_power["rd"]

    spread = g_sd / 2.0 + 1.0 / gb_sd
    a1 = math.sqrt(math.pi) * (2.0 * g_sd) ** -0.25 / (4.0 * gb_sd) * spread**-0.75
    a2 = 2.0 * snr / (delta * g_rd * (g_sd * gb_sd + 2.0) * gb_sr * gb_rd)
    b1 = 0.25 + math.sqrt(spread) / (2.0 * math.sqrt(2.0 * g_sd))
    b2 = delta * g_rd * gb_sr * gb_rd / (2.0 * snr)
    a4 = 1.0 / (g_sd * gb_sd + 2.0)

    c = math.cos(math.pi / M)
    a3 = 1.03 * math.sqrt((1.0 + c) / (2.0 * c)) if M > 2 else math.nan
    b3 = (1.0 - c) * T * l_sr * gb_sr

    return DerivedConstants(
        loss_sd=l_sd,
        loss_sr=l_sr,
        loss_rd=l_rd,
        g_sd=g_sd,
        g_rd=g_rd,
        gamma_bar_sd=gb_sd,
        gamma_bar_sr=gb_sr,
        gamma_bar_rd=gb_rd,
        snr=snr,
        a1=a1,
        a2=a2,
        a3=a3,
        a4=a4,
        b1=b1,
        b2=b2,
        b3=b3,
    )
