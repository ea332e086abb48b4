"""Closed-form SER machinery for the proposed destination detector.

Quantities, all evaluated at a power-splitting ratio ``varrho``:

* ``eps``: average SER of the relay's own noncoherent detection.
* ``eta``: the log-likelihood bonus the detector gives the relay-agrees branch.
* conditional SER given instantaneous SNRs, split into the relay-correct
  part ``p_c`` and the relay-wrong part ``p_e``.
* its average over Rayleigh fading (semi-analytic quadrature), the
  exponential-approximant closed form, and that closed form's derivative.

Functions taking ``varrho`` accept scalars or numpy arrays unless noted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, exp1

from .config import DerivedConstants, SystemConfig, derive_constants, rho_of_varrho


def _consts(cfg: SystemConfig, consts: DerivedConstants | None) -> DerivedConstants:
    return consts if consts is not None else derive_constants(cfg)


def _scalar(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


# ---------------------------------------------------------------------------
# Gaussian tail
# ---------------------------------------------------------------------------

def q_function(x):
    return _scalar(0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0)))


def q_approx_exp(x):
    """``Q(x) ~ exp(-x^2/2) / 2``, meant for ``x > 0``."""
    x = np.asarray(x, dtype=float)
    return _scalar(0.5 * np.exp(-x * x / 2.0))


def q_approx_two_term(x):
    """``Q(x) ~ exp(-x^2/2)/12 + exp(-2x^2/3)/4``, meant for ``x > 0``."""
    x = np.asarray(x, dtype=float)
    return _scalar(np.exp(-x * x / 2.0) / 12.0 + np.exp(-2.0 * x * x / 3.0) / 4.0)


# ---------------------------------------------------------------------------
# relay SER and threshold
# ---------------------------------------------------------------------------

def relay_ser_eps(varrho, cfg: SystemConfig, consts: DerivedConstants | None = None):
    """Average relay SER as a function of the PS ratio.

    M = 2 uses the exact DBPSK-over-Rayleigh average ``1 / (2 (1 + x))``;
    M > 2 uses ``a3 (1 - sqrt(x / (1 + x)))``; ``x = rho(varrho) * b3``.
    """
    k = _consts(cfg, consts)
    x = rho_of_varrho(varrho) * k.b3
    if cfg.modulation_order == 2:
        return _scalar(0.5 / (1.0 + x))
    return _scalar(k.a3 * (1.0 - np.sqrt(x / (1.0 + x))))


def relay_ser_eps_slope(varrho, cfg: SystemConfig, consts: DerivedConstants | None = None):
    """``d eps / d varrho`` (positive)."""
    k = _consts(cfg, consts)
    v = np.asarray(varrho, dtype=float)
    x = rho_of_varrho(v) * k.b3
    denom = 2.0 * (1.0 + x) ** 2 * (2.0 - v) ** 2
    if cfg.modulation_order == 2:
        return _scalar(k.b3 / denom)
    return _scalar(np.sqrt((1.0 + x) / x) * k.a3 * k.b3 / denom)


def eta(eps, M: int):
    """``ln((1 - eps)(M - 1) / eps)``.

    Requires ``0 < eps <= (M - 1) / M`` (random guessing), where eta hits 0.
    For M = 2 that is ``(0, 0.5]``.
    """
    e = np.asarray(eps, dtype=float)
    upper = (M - 1) / M
    if np.any((e <= 0) | (e > upper)):
        raise ValueError(f"eps must lie in (0, {upper:g}] for M={M}")
    return _scalar(np.log((1.0 - e) * (M - 1) / e))


# ---------------------------------------------------------------------------
# conditional SER
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionalSer:
    p_c: np.ndarray | float
    p_e: np.ndarray | float
    total: np.ndarray | float
    raw_total: np.ndarray | float

    @property
    def clamped(self) -> int:
        return int(np.count_nonzero(np.asarray(self.raw_total) != np.asarray(self.total)))


def _combine(p_c, p_e, M: int):
    return (p_c + p_e) / 2.0 if M == 2 else p_c + p_e


def _eps_eta(varrho, cfg, k):
    e = relay_ser_eps(varrho, cfg, k)
    return e, eta(e, cfg.modulation_order)


def conditional_ser(gains, varrho: float, cfg: SystemConfig,
                    consts: DerivedConstants | None = None) -> ConditionalSer:
    """Approximate SER given instantaneous ``gamma_sd``, ``gamma_rd`` and ``|h_sr|^2``."""
    k = _consts(cfg, consts)
    M = cfg.modulation_order
    e, et = _eps_eta(varrho, cfg, k)
    a = k.g_sd * np.asarray(gains.gamma_sd, dtype=float)
    if np.any(a <= 0):
        raise ValueError("gamma_sd must be > 0")
    relay = varrho * cfg.eh_efficiency * k.g_rd * np.asarray(gains.hsr_sq) * np.asarray(gains.gamma_rd)
    sa = np.sqrt(a)
    shift = et / (2.0 * sa)
    p_c = 2 * (1 - e) * q_function(np.sqrt(a + relay)) + 2 * (1 - e) * q_function(sa + shift)
    p_e = 2 * e / (M - 1) * q_function(sa - shift) + 2 * e * q_function(sa)
    raw = _combine(p_c, p_e, M)
    return ConditionalSer(_scalar(p_c), _scalar(p_e), _scalar(np.clip(raw, 0.0, 1.0)), _scalar(raw))


def tradeoff_terms(gains, varrho: float, cfg: SystemConfig, consts: DerivedConstants | None = None):
    """Dominating terms of ``p_c`` and ``p_e`` in the small-eps regime."""
    k = _consts(cfg, consts)
    M = cfg.modulation_order
    e, et = _eps_eta(varrho, cfg, k)
    a = k.g_sd * np.asarray(gains.gamma_sd, dtype=float)
    if np.any(a <= 0):
        raise ValueError("gamma_sd must be > 0")
    relay = varrho * cfg.eh_efficiency * k.g_rd * np.asarray(gains.hsr_sq) * np.asarray(gains.gamma_rd)
    sa = np.sqrt(a)
    p_c = 2 * (1 - e) * q_function(np.sqrt(a + relay))
    p_e = 2 * e / (M - 1) * q_function(sa - et / (2.0 * sa))
    return _scalar(p_c), _scalar(p_e)


def pe_monotonicity_lhs(gains, varrho: float, cfg: SystemConfig, consts: DerivedConstants | None = None):
    """Left side of the sufficient condition for ``p_e``-tilde to increase in varrho.

    The condition reads ``lhs < 1 - eps``.
    """
    k = _consts(cfg, consts)
    _, et = _eps_eta(varrho, cfg, k)
    a = k.g_sd * np.asarray(gains.gamma_sd, dtype=float)
    z0 = np.sqrt(a) - et / (2.0 * np.sqrt(a))
    num = np.exp(-z0**2 / 2.0) / (2.0 * np.sqrt(2.0 * np.pi * a))
    den = 1.0 - np.exp(-z0**2 / 2.0) / 12.0 - np.exp(-2.0 * z0**2 / 3.0) / 4.0
    return _scalar(num / den)


# ---------------------------------------------------------------------------
# averaging over Rayleigh fading
# ---------------------------------------------------------------------------

def _mean_q_shifted(kappa: float, et: float, sign: int) -> float:
    """``E[Q(sqrt(u) + sign * eta / (2 sqrt(u)))]`` for ``u`` exponential.

    ``kappa = sqrt(1 + 2 / mean(u))``.  Exact.
    """
    if et == 0.0:
        return 0.5 * (1.0 - 1.0 / kappa)
    if sign > 0:
        return math.exp(-0.5 * et * (1.0 + kappa)) * 0.5 * (1.0 - 1.0 / kappa)
    return 1.0 - math.exp(0.5 * et * (1.0 - kappa)) * 0.5 * (1.0 + 1.0 / kappa)


def _scaled_exp1(z: np.ndarray) -> np.ndarray:
    """``z * exp(z) * E1(z)``, i.e. ``E[1 / (1 + t / z)]`` for ``t ~ Exp(1)``."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = z < 50.0
    zs = z[small]
    out[small] = zs * np.exp(zs) * exp1(zs)
    zl = z[~small]
    # asymptotic series, truncation error < 1e-11 for z >= 50
    acc = np.ones_like(zl)
    term = np.ones_like(zl)
    for n in range(1, 11):
        term = -term * n / zl
        acc = acc + term
    out[~small] = acc
    return out


def _mean_q_with_relay(g_gb_sd: float, relay_scale: float, nodes: int) -> float:
    """``E[Q(sqrt(u + s * t1 * t2))]``, ``u ~ Exp(g_gb_sd)``, ``t1, t2 ~ Exp(1)``.

    Craig's form turns the triple expectation into a smooth integral over
    ``theta in (0, pi/2)``; the inner expectations are closed form.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    theta = (x + 1.0) * (np.pi / 4.0)
    s2 = np.sin(theta) ** 2
    direct = 1.0 / (1.0 + g_gb_sd / (2.0 * s2))
    product = _scaled_exp1(2.0 * s2 / relay_scale)
    return float(np.sum(w * direct * product) * (np.pi / 4.0) / np.pi)


def average_ser_quadrature(varrho: float, cfg: SystemConfig, consts: DerivedConstants | None = None,
                           nodes: int = 32, components: bool = False):
    """Conditional SER averaged over independent Rayleigh gains.

    Only the relay-path term needs numerical integration (``nodes``
    Gauss-Legendre points); the three direct-link terms are exact.
    Returns the total, or ``(p_c, p_e)`` averages with ``components=True``
    (already halved for M = 2).
    """
    k = _consts(cfg, consts)
    M = cfg.modulation_order
    e, et = _eps_eta(varrho, cfg, k)
    ggb = k.g_sd * k.gamma_bar_sd
    kappa = math.sqrt(1.0 + 2.0 / ggb)
    relay_scale = varrho * cfg.eh_efficiency * k.g_rd * cfg.avg_channel_power["sr"] * k.gamma_bar_rd

    via_relay = _mean_q_with_relay(ggb, relay_scale, nodes)
    above = _mean_q_shifted(kappa, et, +1)
    below = _mean_q_shifted(kappa, et, -1)
    plain = 0.5 * (1.0 - 1.0 / kappa)

    p_c = 2 * (1 - e) * (via_relay + above)
    p_e = 2 * e / (M - 1) * below + 2 * e * plain
    if M == 2:
        p_c, p_e = p_c / 2.0, p_e / 2.0
    return (p_c, p_e) if components else p_c + p_e


# ---------------------------------------------------------------------------
# exponential-approximant closed form and its derivative
# ---------------------------------------------------------------------------

def _z_terms(varrho, e, et, k: DerivedConstants):
    v = np.asarray(varrho, dtype=float)
    z1 = k.a1 * np.sqrt(2.0 * et) * np.exp(-2.0 * k.b1 * et)
    z2 = k.a2 / v * np.log1p(k.b2 * v)
    z3 = np.exp(et) * z1
    return z1, z2, z3


def average_ser_closed_form(varrho, cfg: SystemConfig, consts: DerivedConstants | None = None):
    """``(P_C, P_E)`` from the ``Q(z) ~ exp(-z^2/2)/2`` closed form."""
    k = _consts(cfg, consts)
    M = cfg.modulation_order
    e, et = _eps_eta(varrho, cfg, k)
    if np.any(np.asarray(et) <= 0):
        raise ValueError("closed form needs eta > 0")
    z1, z2, z3 = _z_terms(varrho, e, et, k)
    p_c = (1 - e) * (z1 + z2)
    p_e = e * z3 / (M - 1) + e / (k.g_sd * k.gamma_bar_sd + 2.0)
    return _scalar(p_c), _scalar(p_e)


def ser_derivative(varrho, cfg: SystemConfig, consts: DerivedConstants | None = None):
    """``d(P_C + P_E) / d varrho`` of the closed form, term by term.

    ``de`` below is ``d eps / d varrho``; for M > 2 it equals the printed
    factor ``a3 b3 sqrt((1 + rho b3)/(rho b3)) / (2 (1 + rho b3)^2 (2 - varrho)^2)``.
    """
    k = _consts(cfg, consts)
    M = cfg.modulation_order
    v = np.asarray(varrho, dtype=float)
    e, et = _eps_eta(v, cfg, k)
    de = relay_ser_eps_slope(v, cfg, k)
    a1, a2, b1, b2 = k.a1, k.a2, k.b1, k.b2
    s = np.sqrt(2.0 * et)
    decay = np.exp(-2.0 * b1 * et)
    z2 = a2 / v * np.log1p(b2 * v)

    d_pc = (
        (a1 * s * decay + z2) * (-de)
        + a1 / e * decay * (-b1 * s + 1.0 / (2.0 * s)) * (-2.0 * de)
        + (1 - e) * (-a2 / v**2 * np.log1p(b2 * v) + a2 * b2 / (v * (1.0 + b2 * v)))
    )
    d_pe = (
        k.a4
        + a1 / (M - 1) * np.exp(et) * decay
        * ((s / 2.0 - b1 * s + 1.0 / (2.0 * s)) * (-2.0 / (1.0 - e)) + s)
    ) * de
    return _scalar(d_pc + d_pe)


# ---------------------------------------------------------------------------
# summaries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AnalysisPoint:
    varrho: float
    eps: float
    eta: float
    p_c_avg: float
    p_e_avg: float
    ser_closed_pc: float
    ser_closed_pe: float
    ser_quadrature: float
    derivative: float


def analysis_point(varrho: float, cfg: SystemConfig, consts: DerivedConstants | None = None,
                   nodes: int = 32) -> AnalysisPoint:
    k = _consts(cfg, consts)
    e, et = _eps_eta(varrho, cfg, k)
    p_c, p_e = average_ser_quadrature(varrho, cfg, k, nodes=nodes, components=True)
    cpc, cpe = average_ser_closed_form(varrho, cfg, k)
    return AnalysisPoint(
        varrho=float(varrho),
        eps=float(e),
        eta=float(et),
        p_c_avg=float(p_c),
        p_e_avg=float(p_e),
        ser_closed_pc=float(cpc),
        ser_closed_pe=float(cpe),
        ser_quadrature=float(min(max(p_c + p_e, 0.0), 1.0)),
        derivative=float(ser_derivative(varrho, cfg, k)),
    )


def pep_dominant_pairs(M: int) -> dict[str, list[tuple[int, ...]]]:
    """Dominating competitor sets, as 0-based alphabet indices, with ``x1`` sent.

    Keys:
      ``correct_combined``: ``x_v`` when both links vote for ``x_v``.
      ``correct_split``: ``(x_v, x_u)`` when the relay link still favors ``x1``.
      ``wrong_combined``: ``(x_v, x_u)`` with ``x_u = x_r != x_v``.
      ``wrong_follow``: ``(x_v,)`` with the destination following the relay.
    For M = 2 the two nearest neighbors coincide.
    """
    if M < 2:
        raise ValueError("M must be >= 2")
    near = sorted({1 % M, (M - 1) % M})
    return {
        "correct_combined": [(v,) for v in near],
        "correct_split": [(v, 0) for v in near],
        "wrong_combined": [(v, u) for v in near for u in range(M) if u != v and u != 0],
        "wrong_follow": [(v,) for v in near],
    }
