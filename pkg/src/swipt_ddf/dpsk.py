"""M-PSK alphabet and differential encoding.

Symbols are carried as alphabet indices (``m - 1`` for ``x_m``); complex
values are materialized from the index only when needed, so long streams
never accumulate phase round-off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PskAlphabet:
    order: int

    def __post_init__(self) -> None:
        if int(self.order) != self.order or self.order < 2:
            raise ValueError(f"alphabet order must be an integer >= 2, got {self.order!r}")

    @property
    def points(self) -> np.ndarray:
        return np.exp(2j * np.pi * np.arange(self.order) / self.order)

    def __len__(self) -> int:
        return self.order

    def symbols(self, indices) -> np.ndarray:
        """Complex symbols for an array of indices."""
        return self.points[np.asarray(indices) % self.order]

    def index_of(self, symbols, atol: float = 1e-9) -> np.ndarray:
        """Alphabet index of each complex symbol; raises if any is off-alphabet."""
        s = np.asarray(symbols, dtype=complex)
        dist = np.abs(s[..., None] - self.points)
        idx = np.argmin(dist, axis=-1)
        if np.any(np.take_along_axis(dist, idx[..., None], axis=-1) > atol):
            raise ValueError("symbol not in the PSK alphabet")
        return idx


def make_alphabet(M: int) -> PskAlphabet:
    return PskAlphabet(M)


@dataclass(frozen=True)
class DiffStream:
    """A differentially encoded stream, stored as indices.

    ``coded_idx[0]`` is the reference symbol (index 0, i.e. ``u[0] = 1``).
    """

    alphabet: PskAlphabet
    info_idx: np.ndarray
    coded_idx: np.ndarray

    @property
    def reference(self) -> complex:
        return complex(self.alphabet.points[self.coded_idx[..., 0]].flat[0])

    @property
    def info_symbols(self) -> np.ndarray:
        return self.alphabet.symbols(self.info_idx)

    @property
    def coded_symbols(self) -> np.ndarray:
        return self.alphabet.symbols(self.coded_idx)


def encode_indices(info_idx, M: int) -> np.ndarray:
    """Differentially encode index arrays along the last axis.

    Returns coded indices with the reference column prepended.
    """
    info_idx = np.asarray(info_idx, dtype=np.int64)
    coded = np.cumsum(info_idx, axis=-1) % M
    ref = np.zeros(info_idx.shape[:-1] + (1,), dtype=np.int64)
    return np.concatenate([ref, coded], axis=-1)


def decode_indices(coded_idx, M: int) -> np.ndarray:
    coded_idx = np.asarray(coded_idx, dtype=np.int64)
    return np.diff(coded_idx, axis=-1) % M


def diff_encode(info, alphabet: PskAlphabet) -> DiffStream:
    """Encode complex info symbols with ``u[k] = u[k-1] x[k]``, ``u[0] = 1``."""
    info_idx = alphabet.index_of(np.atleast_1d(info))
    return DiffStream(alphabet, info_idx, encode_indices(info_idx, alphabet.order))


def diff_decode(stream: DiffStream) -> np.ndarray:
    """Noiseless inverse of :func:`diff_encode`, as complex symbols."""
    return stream.alphabet.symbols(decode_indices(stream.coded_idx, stream.alphabet.order))


def diff_ratio(u_prev: complex, u_curr: complex) -> complex:
    if u_prev == 0:
        raise ZeroDivisionError("u_prev must be nonzero")
    return u_curr / u_prev
