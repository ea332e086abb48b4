"""Monte-Carlo SER estimation for the SWIPT DDF relay network.

Frames are split into fixed-size chunks.  Chunk ``i`` draws from a Philox
stream keyed by ``(seed, i)``, and chunk results are integer counts, so the
outcome depends only on the spec, never on the number of worker threads.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.stats import binomtest

from .analysis import eta as eta_from_eps
from .analysis import relay_ser_eps
from .channel import draw_channel, transmit_down, transmit_sr
from .config import SystemConfig, derive_constants
from .detectors import (
    DestinationObservation,
    detect_destination_mldsum,
    detect_destination_proposed,
    detect_genie,
    detect_relay,
)
from .dpsk import encode_indices, make_alphabet

log = logging.getLogger(__name__)

CHUNK_FRAMES = 1 << 16
DETECTORS = ("proposed", "mldsum", "genie")
THREADS_ENV = "SWIPT_DDF_THREADS"
EARLY_STOP_FLOOR = 100_000
EARLY_STOP_ROUND = 8  # chunks between stopping checks


@dataclass(frozen=True)
class SimSpec:
    cfg: SystemConfig
    detector: str = "proposed"
    frames: int = 100_000
    data_symbols_per_frame: int = 1
    seed: int = 0
    noiseless: bool = False
    eps_override: float | None = None
    early_stop: bool = False

    def __post_init__(self) -> None:
        if self.detector not in DETECTORS:
            raise ValueError(f"detector must be one of {DETECTORS}, got {self.detector!r}")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.data_symbols_per_frame < 1:
            raise ValueError("data_symbols_per_frame must be >= 1")


@dataclass(frozen=True)
class SerEstimate:
    errors: int
    symbols: int
    ser: float
    ci95: tuple[float, float]
    relay_errors: int
    relay_ser: float
    frames: int
    wall_time: float = field(default=0.0, compare=False)


def wilson_interval(errors: int, trials: int) -> tuple[float, float]:
    ci = binomtest(int(errors), int(trials)).proportion_ci(confidence_level=0.95, method="wilson")
    return float(ci.low), float(ci.high)


def _estimate(errors: int, symbols: int, relay_errors: int, frames: int, wall: float) -> SerEstimate:
    return SerEstimate(
        errors=errors,
        symbols=symbols,
        ser=errors / symbols,
        ci95=wilson_interval(errors, symbols),
        relay_errors=relay_errors,
        relay_ser=relay_errors / symbols,
        frames=frames,
        wall_time=wall,
    )


def default_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def _chunk_sizes(frames: int) -> list[int]:
    full, rest = divmod(frames, CHUNK_FRAMES)
    return [CHUNK_FRAMES] * full + ([rest] if rest else [])


def _simulate_chunk(spec: SimSpec, eps: float, chunk: int, n: int) -> tuple[int, int]:
    cfg = spec.cfg
    M = cfg.modulation_order
    nd = spec.data_symbols_per_frame
    alphabet = make_alphabet(M)
    consts = derive_constants(cfg)
    rng = chunk_rng(spec.seed, chunk)
    quiet = (0.0, 0.0) if spec.noiseless else None

    ch = draw_channel(rng, cfg, size=n)
    info = rng.integers(0, M, size=(n, nd))
    u_s = alphabet.symbols(encode_indices(info, M))

    y_sr, p_r = transmit_sr(u_s, ch, cfg, rng, noise_split=quiet)
    y_sd = transmit_down(u_s, cfg.tx_power, consts.loss_sd, ch.h_sd, cfg, rng, "sd", noise_split=quiet)
    relay_idx = detect_relay(y_sr[:, :-1], y_sr[:, 1:], alphabet)
    u_r = alphabet.symbols(encode_indices(relay_idx, M))
    y_rd = transmit_down(u_r, p_r, consts.loss_rd, ch.h_rd, cfg, rng, "rd", noise_split=quiet)

    obs = DestinationObservation(
        y_sd[:, :-1], y_sd[:, 1:], y_rd[:, :-1], y_rd[:, 1:],
        noise_sd=cfg.noise_total("sd"), noise_rd=cfg.noise_total("rd"),
        eps=eps, eta=eta_from_eps(eps, M),
    )
    relay_ok = relay_idx == info
    if spec.detector == "proposed":
        decided = detect_destination_proposed(obs, alphabet)
    elif spec.detector == "mldsum":
        decided = detect_destination_mldsum(obs, alphabet)
    else:
        decided = detect_genie(obs, relay_ok, alphabet)
    return int(np.count_nonzero(decided != info)), int(np.count_nonzero(~relay_ok))


def _run_chunks(fn, sizes: Sequence[int], start: int, workers: int) -> list[tuple[int, int]]:
    jobs = [(start + i, n) for i, n in enumerate(sizes)]
    if workers <= 1 or len(jobs) <= 1:
        return [fn(c, n) for c, n in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def run_point(spec: SimSpec, workers: int | None = None) -> SerEstimate:
    """Simulate ``spec.frames`` independent frames and count destination errors.

    The destination uses the analytic relay SER (statistical CSI) unless
    ``spec.eps_override`` is set.
    """
    workers = workers or default_workers()
    eps = spec.eps_override
    if eps is None:
        eps = float(relay_ser_eps(spec.cfg.ps_ratio, spec.cfg))
    t0 = time.perf_counter()

    def fn(chunk: int, n: int) -> tuple[int, int]:
        return _simulate_chunk(spec, eps, chunk, n)

    sizes = _chunk_sizes(spec.frames)
    errors = relay_errors = frames = 0
    step = EARLY_STOP_ROUND if spec.early_stop else len(sizes)
    for start in range(0, len(sizes), step):
        batch = sizes[start:start + step]
        for e, r in _run_chunks(fn, batch, start, workers):
            errors += e
            relay_errors += r
        frames += sum(batch)
        if spec.early_stop and frames >= EARLY_STOP_FLOOR and errors > 0:
            lo, hi = wilson_interval(errors, frames * spec.data_symbols_per_frame)
            if (hi - lo) / 2 < 0.1 * errors / (frames * spec.data_symbols_per_frame):
                break
    symbols = frames * spec.data_symbols_per_frame
    return _estimate(errors, symbols, relay_errors, frames, time.perf_counter() - t0)


def _relay_chunk(cfg: SystemConfig, seed: int, chunk: int, n: int) -> tuple[int, int]:
    M = cfg.modulation_order
    alphabet = make_alphabet(M)
    rng = chunk_rng(seed, chunk)
    ch = draw_channel(rng, cfg, size=n)
    info = rng.integers(0, M, size=(n, 1))
    y_sr, _ = transmit_sr(alphabet.symbols(encode_indices(info, M)), ch, cfg, rng)
    relay_idx = detect_relay(y_sr[:, :-1], y_sr[:, 1:], alphabet)
    wrong = int(np.count_nonzero(relay_idx != info))
    return wrong, wrong


def simulate_relay(cfg: SystemConfig, frames: int, seed: int = 0, workers: int | None = None) -> SerEstimate:
    """The source-to-relay link on its own; ``ser`` is the empirical relay SER."""
    workers = workers or default_workers()
    t0 = time.perf_counter()
    counts = _run_chunks(lambda c, n: _relay_chunk(cfg, seed, c, n), _chunk_sizes(frames), 0, workers)
    wrong = sum(e for e, _ in counts)
    return _estimate(wrong, frames, wrong, frames, time.perf_counter() - t0)


def relay_ser_mc(cfg: SystemConfig, frames: int, seed: int = 0, workers: int | None = None) -> float:
    return simulate_relay(cfg, frames, seed, workers).ser


def derive_seed(master_seed: int, index: int) -> int:
    return int(np.random.SeedSequence(master_seed, spawn_key=(index,)).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class SweepRow:
    index: int
    spec: SimSpec
    result: SerEstimate | None
    error: str | None = None


def sweep(specs: Sequence[SimSpec], master_seed: int | None = None, workers: int | None = None,
          skip: Sequence[int] = ()) -> list[SweepRow]:
    """Run every spec in order; a failing point is recorded and the sweep goes on.

    With ``master_seed`` each point's seed is derived from ``(master_seed,
    index)``, so any subset of points (``skip`` lists finished ones) can be
    rerun and reproduce the same numbers.
    """
    if not specs:
        raise ValueError("sweep needs at least one point")
    rows = []
    for i, spec in enumerate(specs):
        if master_seed is not None:
            spec = replace(spec, seed=derive_seed(master_seed, i))
        if i in skip:
            continue
        try:
            rows.append(SweepRow(i, spec, run_point(spec, workers)))
        except (ValueError, FloatingPointError) as exc:
            log.warning("sweep point %d failed: %s", i, exc)
            rows.append(SweepRow(i, spec, None, str(exc)))
    return rows
