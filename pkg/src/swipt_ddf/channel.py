"""Rayleigh fading draws and the two-slot PS relaying signal model.

All functions broadcast over a leading batch axis: channel gains of shape
``(N,)`` pair with coded symbol arrays of shape ``(N, K + 1)`` (reference
slot included), so one call simulates ``N`` independent frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig, path_loss


def complex_gaussian(rng: np.random.Generator, var, shape) -> np.ndarray:
    """Circularly symmetric CN(0, var) samples."""
    scale = np.sqrt(np.asarray(var, dtype=float) / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass(frozen=True)
class ChannelRealization:
    h_sr: np.ndarray | complex
    h_sd: np.ndarray | complex
    h_rd: np.ndarray | complex


@dataclass(frozen=True)
class InstantGains:
    gamma_sd: np.ndarray | float
    gamma_rd: np.ndarray | float
    gamma_sr: np.ndarray | float
    hsr_sq: np.ndarray | float


def draw_channel(rng: np.random.Generator, cfg: SystemConfig | None = None, size=None) -> ChannelRealization:
    cfg = cfg or SystemConfig()
    power = cfg.avg_channel_power
    shape = () if size is None else size
    h_sr = complex_gaussian(rng, power["sr"], shape)
    h_sd = complex_gaussian(rng, power["sd"], shape)
    h_rd = complex_gaussian(rng, power["rd"], shape)
    if size is None:
        return ChannelRealization(complex(h_sr), complex(h_sd), complex(h_rd))
    return ChannelRealization(h_sr, h_sd, h_rd)


def instant_gains(ch: ChannelRealization, cfg: SystemConfig) -> InstantGains:
    ps = cfg.tx_power
    hsr_sq = np.abs(ch.h_sr) ** 2
    return InstantGains(
        gamma_sd=ps * np.abs(ch.h_sd) ** 2,
        gamma_rd=ps * np.abs(ch.h_rd) ** 2,
        gamma_sr=ps * hsr_sq,
        hsr_sq=hsr_sq,
    )


def relay_power(h_sr, cfg: SystemConfig):
    """Harvested relay power under the linear EH model."""
    loss = path_loss(cfg.d_sr, cfg.pathloss_exponent)
    return cfg.eh_efficiency * cfg.ps_ratio * cfg.tx_power * loss * np.abs(h_sr) ** 2


def _as_symbols(coded) -> np.ndarray:
    if hasattr(coded, "coded_symbols"):
        return coded.coded_symbols
    return np.asarray(coded, dtype=complex)


def transmit_sr(coded, ch: ChannelRealization, cfg: SystemConfig, rng: np.random.Generator,
                noise_split: tuple[float, float] | None = None):
    """Signal seen by the relay's information-detection branch, and ``P_r``.

    ``noise_split`` overrides the configured (antenna, circuit) variances,
    e.g. ``(0, 0)`` for noiseless debugging.
    """
    u = _as_symbols(coded)
    n1, n2 = noise_split if noise_split is not None else cfg.noise_split["sr"]
    rho = cfg.ps_ratio
    loss = path_loss(cfg.d_sr, cfg.pathloss_exponent)
    h = np.asarray(ch.h_sr)[..., None]
    amp = np.sqrt((1.0 - rho) * cfg.tx_power * cfg.slot_duration * loss)
    v1 = complex_gaussian(rng, n1, u.shape)
    v2 = complex_gaussian(rng, n2, u.shape)
    y = amp * h * u + np.sqrt(1.0 - rho) * v1 + v2
    return y, relay_power(ch.h_sr, cfg)


def transmit_down(coded, tx_power, loss: float, h, cfg: SystemConfig, rng: np.random.Generator,
                  link: str = "sd", noise_split: tuple[float, float] | None = None) -> np.ndarray:
    """Signal at the destination from the source (``link='sd'``) or relay (``'rd'``)."""
    u = _as_symbols(coded)
    n1, n2 = noise_split if noise_split is not None else cfg.noise_split[link]
    amp = np.sqrt(np.asarray(tx_power, dtype=float) * cfg.slot_duration * loss)[..., None]
    h = np.asarray(h)[..., None]
    v1 = complex_gaussian(rng, n1, u.shape)
    v2 = complex_gaussian(rng, n2, u.shape)
    return amp * h * u + v1 + v2
