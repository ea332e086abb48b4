"""Estimating the SER-minimizing power-splitting ratio.

Two analytic estimators plus a simulation ground truth:

* ``minimize``: golden-section search on the quadrature-averaged SER.
* ``root``: bisection on the closed-form derivative.
* ``mc``: argmin of simulated SER over a fixed grid.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .analysis import average_ser_quadrature, ser_derivative
from .config import SystemConfig, derive_constants

log = logging.getLogger(__name__)

SEARCH_LO = 0.02
SEARCH_HI = 0.98
INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class BracketError(RuntimeError):
    """Objective is not unimodal on the search interval."""

    def __init__(self, message: str, grid: np.ndarray, values: np.ndarray):
        super().__init__(message)
        self.grid = grid
        self.values = values


class RegimeError(RuntimeError):
    """The derivative does not change sign on the search interval."""

    def __init__(self, message: str, signs: tuple[int, int]):
        super().__init__(message)
        self.signs = signs


@dataclass(frozen=True)
class RhoEstimate:
    method: str
    rho_star: float
    objective_at_star: float
    iterations: int
    bracket: tuple[float, float]
    warnings: tuple[str, ...] = ()
    grid: tuple[float, ...] = field(default=(), repr=False)
    values: tuple[float, ...] = field(default=(), repr=False)
    intervals: tuple[tuple[float, float], ...] = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "rho_star": self.rho_star,
            "objective": self.objective_at_star,
            "iterations": self.iterations,
            "bracket": list(self.bracket),
            "warnings": list(self.warnings),
        }


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-3):
    """Minimize a unimodal ``f`` on ``[lo, hi]`` until the bracket is narrower than ``tol``.

    Returns ``(x, f(x), iterations, (a, b))``.
    """
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol:
        it += 1
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x, fx = (c, fc) if fc < fd else (d, fd)
    return x, fx, it, (a, b)


def bisect(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-4):
    """Root of ``f`` on ``[lo, hi]``; endpoints must bracket a sign change.

    Returns ``(root, iterations, (a, b))``.
    """
    fa, fb = f(lo), f(hi)
    if np.sign(fa) == np.sign(fb):
        raise RegimeError(
            f"no sign change on [{lo}, {hi}]: f(lo)={fa:.3e}, f(hi)={fb:.3e}",
            (int(np.sign(fa)), int(np.sign(fb))),
        )
    a, b = lo, hi
    it = 0
    while b - a >= tol:
        it += 1
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0:
            return m, it, (m, m)
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b), it, (a, b)


def _check_unimodal(grid: np.ndarray, values: np.ndarray) -> int:
    """Index of the grid minimum; raises if the sampled curve is not unimodal."""
    i = int(np.argmin(values))
    if i == 0 or i == len(grid) - 1:
        raise BracketError("minimum sits on the search boundary", grid, values)
    diffs = np.diff(values)
    scale = 1e-9 * np.max(np.abs(values))
    if np.any(diffs[:i] > scale) or np.any(diffs[i:] < -scale):
        raise BracketError("objective is not unimodal on the sampled grid", grid, values)
    return i


def optimal_rho_minimize(cfg: SystemConfig, tol: float = 1e-3, nodes: int = 32,
                         scan_points: int = 33) -> RhoEstimate:
    k = derive_constants(cfg)

    def objective(v: float) -> float:
        return average_ser_quadrature(v, cfg, k, nodes=nodes)

    grid = np.linspace(SEARCH_LO, SEARCH_HI, scan_points)
    values = np.array([objective(v) for v in grid])
    i = _check_unimodal(grid, values)
    x, fx, it, bracket = golden_section(objective, grid[i - 1], grid[i + 1], tol)
    return RhoEstimate("minimize", float(x), float(fx), it, bracket,
                       grid=tuple(grid), values=tuple(values))


def optimal_rho_root(cfg: SystemConfig, tol: float = 1e-4) -> RhoEstimate:
    k = derive_constants(cfg)

    def deriv(v: float) -> float:
        return ser_derivative(v, cfg, k)

    root, it, bracket = bisect(deriv, SEARCH_LO, SEARCH_HI, tol)
    return RhoEstimate("derivative_root", float(root), float(deriv(root)), it, bracket)


def mc_grid(points: int = 19) -> np.ndarray:
    """``points`` equally spaced interior ratios, 0.05 apart for 19 points."""
    return np.round(np.arange(1, points + 1) / (points + 1), 10)


def optimal_rho_mc(cfg: SystemConfig, frames: int, seed: int = 1, detector: str = "proposed",
                   points: int = 19, workers: int | None = None) -> RhoEstimate:
    """Grid argmin of simulated SER.

    Every grid point reuses the same seed (common random numbers), which
    makes differences between neighboring points far less noisy than the
    individual estimates.
    """
    from .mc import SimSpec, run_point

    if frames < 100_000:
        log.warning("optimal_rho_mc: %d frames per point is below the 1e5 floor", frames)
    grid = mc_grid(points)
    results = [
        run_point(SimSpec(cfg.replace(ps_ratio=float(v)), detector=detector, frames=frames, seed=seed),
                  workers=workers)
        for v in grid
    ]
    sers = np.array([r.ser for r in results])
    i = int(np.argmin(sers))
    best = results[i]
    overlapping = sum(1 for r in results if r.ci95[0] <= best.ci95[1])
    warnings = ()
    if overlapping > 3:
        warnings = (f"flat minimum: {overlapping} grid points have CIs overlapping the best",)
    lo = float(grid[max(i - 1, 0)])
    hi = float(grid[min(i + 1, len(grid) - 1)])
    return RhoEstimate("mc_argmin", float(grid[i]), float(best.ser), len(grid), (lo, hi), warnings,
                       grid=tuple(float(g) for g in grid), values=tuple(float(s) for s in sers),
                       intervals=tuple(r.ci95 for r in results))
