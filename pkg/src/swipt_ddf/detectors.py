"""Relay and destination detectors for the DDF network.

Every detector works on arrays of observations (any leading shape) and
returns alphabet indices.  Ties resolve to the lowest index, which is what
``np.argmax`` does.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .analysis import eta as eta_from_eps
from .channel import ChannelRealization, relay_power
from .config import SystemConfig, path_loss
from .dpsk import PskAlphabet


def correlation_metric(y_curr, y_prev, x, noise_total: float):
    """``Re{conj(y_curr) * y_prev * x} / noise_total``."""
    return np.real(np.conj(y_curr) * y_prev * x) / noise_total


def correlation_metrics(y_curr, y_prev, alphabet: PskAlphabet, noise_total: float = 1.0) -> np.ndarray:
    """Metric for every candidate symbol; the candidate axis is last."""
    c = np.conj(np.asarray(y_curr)) * np.asarray(y_prev)
    return np.real(c[..., None] * alphabet.points) / noise_total


def detect_relay(y_prev, y_curr, alphabet: PskAlphabet) -> np.ndarray:
    """Conventional noncoherent differential detection."""
    return np.argmax(correlation_metrics(y_curr, y_prev, alphabet), axis=-1)


@dataclass(frozen=True)
class DestinationObservation:
    y_sd_prev: np.ndarray
    y_sd_curr: np.ndarray
    y_rd_prev: np.ndarray
    y_rd_curr: np.ndarray
    noise_sd: float
    noise_rd: float
    eps: float
    eta: float

    def __post_init__(self) -> None:
        if not (self.noise_sd > 0 and self.noise_rd > 0):
            raise ValueError("per-link noise totals must be > 0")
        # eta > 0 is the same as eps < (M - 1) / M
        if not (0.0 < self.eps < 1.0 and self.eta > 0):
            raise ValueError(f"relay SER eps={self.eps!r} gives eta={self.eta!r}; need eps in (0, (M-1)/M)")

    @classmethod
    def from_signals(cls, y_sd_prev, y_sd_curr, y_rd_prev, y_rd_curr, *, noise_sd: float,
                     noise_rd: float, eps: float, M: int) -> "DestinationObservation":
        return cls(y_sd_prev, y_sd_curr, y_rd_prev, y_rd_curr, noise_sd, noise_rd, eps, eta_from_eps(eps, M))

    def metrics(self, alphabet: PskAlphabet) -> tuple[np.ndarray, np.ndarray]:
        m_sd = correlation_metrics(self.y_sd_curr, self.y_sd_prev, alphabet, self.noise_sd)
        m_rd = correlation_metrics(self.y_rd_curr, self.y_rd_prev, alphabet, self.noise_rd)
        return m_sd, m_rd


def detect_destination_proposed(obs: DestinationObservation, alphabet: PskAlphabet) -> np.ndarray:
    """Near-optimal max-approximation detector; 2M metric evaluations per decision."""
    m_sd, m_rd = obs.metrics(alphabet)
    best_rd = m_rd.max(axis=-1, keepdims=True)  # shared across all x_s
    score = m_sd + np.maximum(m_rd + obs.eta, best_rd)
    return np.argmax(score, axis=-1)


def detect_destination_mldsum(obs: DestinationObservation, alphabet: PskAlphabet) -> np.ndarray:
    """Full-sum ML benchmark with the eps transition model, in the log domain."""
    M = alphabet.order
    m_sd, m_rd = obs.metrics(alphabet)
    # log sum over x_r != x_s of exp(m_rd(x_r)), one entry per x_s
    others = np.broadcast_to(m_rd[..., None, :], m_rd.shape + (M,)).copy()
    diag = np.arange(M)
    others[..., diag, diag] = -np.inf
    lse_others = logsumexp(others, axis=-1)
    relay_term = np.logaddexp(np.log1p(-obs.eps) + m_rd, np.log(obs.eps / (M - 1)) + lse_others)
    return np.argmax(m_sd + relay_term, axis=-1)


def detect_genie(obs: DestinationObservation, relay_correct, alphabet: PskAlphabet) -> np.ndarray:
    """Benchmark told whether the relay decided correctly.

    Combines both links when the relay was right and ignores the relay
    link otherwise.
    """
    m_sd, m_rd = obs.metrics(alphabet)
    mask = np.asarray(relay_correct, dtype=bool)[..., None]
    return np.argmax(np.where(mask, m_sd + m_rd, m_sd), axis=-1)


@dataclass(frozen=True)
class MetricStats:
    mean: float
    variance: float


def metric_moments(ch: ChannelRealization, cfg: SystemConfig, z1: complex, z2: complex,
                   link: str = "sd", x_sent: complex = 1.0) -> MetricStats:
    """Gaussian moments of ``Re{conj(y[k]) y[k-1] (z2 - z1)} / N0`` on an I-d link.

    High-SNR approximation: noise-by-noise products are dropped from the
    variance.
    """
    if np.isclose(z1, z2):
        raise ValueError("z1 and z2 must differ")
    if link == "sd":
        power, loss, h = cfg.tx_power, path_loss(cfg.d_sd, cfg.pathloss_exponent), ch.h_sd
    elif link == "rd":
        power, loss, h = relay_power(ch.h_sr, cfg), path_loss(cfg.d_rd, cfg.pathloss_exponent), ch.h_rd
    else:
        raise ValueError(f"link must be 'sd' or 'rd', got {link!r}")
    n0 = 1.0
    snr_term = cfg.slot_duration * loss * power * abs(h) ** 2 / n0
    diff = z2 - z1
    return MetricStats(
        mean=float(np.real(np.conj(x_sent) * diff) * snr_term),
        variance=float(abs(diff) ** 2 * snr_term),
    )
