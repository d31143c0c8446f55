"""Bit <-> GSM symbol mapping.

A GSM symbol activates ``n_a`` of ``n_s`` positions.  The leading
``spatial_bits`` bits of a block pick the active index combination (AIC)
out of a lexicographically ordered table; the remaining bits are split
into groups of ``log2(M)`` and Gray-mapped onto the constellation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Sequence, Tuple

import numpy as np

__all__ = [
    "DecodeError",
    "Constellation",
    "IMParams",
    "GsmSymbol",
    "AicTable",
    "get_constellation",
    "bits_per_symbol",
    "build_aic_table",
    "encode",
    "decode",
    "densify",
    "bits_to_int",
    "int_to_bits",
]


class DecodeError(ValueError):
    """Raised when a symbol cannot be mapped back to bits."""


def _gray(n: np.ndarray) -> np.ndarray:
    return n ^ (n >> 1)


def int_to_bits(values: np.ndarray, width: int) -> np.ndarray:
    """Big-endian bit expansion of non-negative integers.

    Returns an array with one extra trailing axis of length `width`.
    """
    values = np.asarray(values, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)


def bits_to_int(bits: np.ndarray) -> np.ndarray:
    """Inverse of :func:`int_to_bits` along the last axis."""
    bits = np.asarray(bits, dtype=np.int64)
    width = bits.shape[-1]
    if width == 0:
        return np.zeros(bits.shape[:-1], dtype=np.int64)
    weights = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
    return bits @ weights


@dataclass(frozen=True)
class Constellation:
    """Gray-labelled unit-energy constellation.

    ``points[label]`` is the complex point carrying the big-endian bit
    label ``label``.
    """

    order: int
    family: str
    points: np.ndarray = field(repr=False, compare=False)

    @property
    def bits(self) -> int:
        return int(math.log2(self.order))

    def modulate(self, labels: np.ndarray) -> np.ndarray:
        return self.points[np.asarray(labels)]

    def nearest(self, values: np.ndarray) -> np.ndarray:
        """Hard decision: label of the closest point (lowest label on ties)."""
        values = np.asarray(values)
        d = np.abs(values[..., None] - self.points) ** 2
        return np.argmin(d, axis=-1)


def _pam_gray(m: int) -> np.ndarray:
    # amplitude for each Gray label on one axis: level index i carries label gray(i)
    levels = np.arange(m)
    amp = np.empty(m)
    amp[_gray(levels)] = 2 * levels - (m - 1)
    return amp


def _make_constellation(order: int, family: str) -> Constellation:
    if order < 2 or order & (order - 1):
        raise ValueError(f"constellation order must be a power of two >= 2, got {order}")
    k = int(math.log2(order))
    if family == "qam" and (k % 2 or order == 2):
        family = "psk"
    if family == "qam":
        m = 1 << (k // 2)
        pam = _pam_gray(m)
        labels = np.arange(order)
        pts = pam[labels >> (k // 2)] + 1j * pam[labels & (m - 1)]
    elif family == "psk":
        labels = np.arange(order)
        pts = np.empty(order, dtype=complex)
        # position i on the circle carries Gray label gray(i)
        pts[_gray(labels)] = np.exp(2j * np.pi * labels / order)
        if order == 2:
            pts = np.array([-1.0 + 0j, 1.0 + 0j])
    else:
        raise ValueError(f"unknown constellation family {family!r}")
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    pts.setflags(write=False)
    return Constellation(order=order, family=family, points=pts)


@lru_cache(maxsize=None)
def get_constellation(order: int, family: str = "qam") -> Constellation:
    """Cached constellation lookup.

    Square orders (4, 16, 64, ...) give Gray QAM when ``family='qam'``;
    ``M=2`` and non-square orders fall back to Gray PSK.
    """
    return _make_constellation(int(order), family.lower())


@dataclass(frozen=True)
class IMParams:
    """Per-user index modulation parameters.

    Parameters
    ----------
    n_s : int
        Symbol length (virtual positions per user).
    n_a : int
        Active positions per user.
    order : int
        Constellation size M.
    family : str
        ``'qam'`` or ``'psk'``.
    reduced : bool
        Reduced-GSM variant: one constellation symbol repeated on every
        active position.
    """

    n_s: int
    n_a: int
    order: int
    family: str = "qam"
    reduced: bool = False

    def __post_init__(self) -> None:
        if not 1 <= self.n_a <= self.n_s:
            raise ValueError(f"need 1 <= n_a <= n_s, got n_a={self.n_a}, n_s={self.n_s}")
        if self.order < 2 or self.order & (self.order - 1):
            raise ValueError(f"M must be a power of two >= 2, got {self.order}")

    @property
    def constellation(self) -> Constellation:
        return get_constellation(self.order, self.family)

    @property
    def spatial_bits(self) -> int:
        return math.comb(self.n_s, self.n_a).bit_length() - 1

    @property
    def symbol_bits(self) -> int:
        per = int(math.log2(self.order))
        return per if self.reduced else self.n_a * per

    @property
    def n_values(self) -> int:
        """Number of independent constellation symbols per user."""
        return 1 if self.reduced else self.n_a

    @property
    def bits_per_user(self) -> int:
        return self.spatial_bits + self.symbol_bits


def bits_per_symbol(params: IMParams, n_u: int) -> Tuple[int, int]:
    """Return ``(total, per_user)`` bits carried by one multiuser symbol."""
    per_user = params.bits_per_user
    return n_u * per_user, per_user


@dataclass(frozen=True)
class AicTable:
    combos: np.ndarray = field(repr=False)
    lookup: Dict[Tuple[int, ...], int] = field(repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.combos)

    def index(self, aic: Sequence[int]) -> int:
        try:
            return self.lookup[tuple(int(i) for i in aic)]
        except KeyError:
            raise DecodeError(f"AIC {tuple(aic)} is not in the table") from None


@lru_cache(maxsize=64)
def _aic_table(n_s: int, n_a: int) -> AicTable:
    n_comb = 1 << (math.comb(n_s, n_a).bit_length() - 1)
    combos = np.array(list(itertools.islice(itertools.combinations(range(n_s), n_a), n_comb)),
                      dtype=np.int64).reshape(n_comb, n_a)
    combos.setflags(write=False)
    lookup = {tuple(int(i) for i in c): j for j, c in enumerate(combos)}
    return AicTable(combos=combos, lookup=lookup)


def build_aic_table(params: IMParams) -> AicTable:
    """First ``2**spatial_bits`` combinations in lexicographic order."""
    return _aic_table(params.n_s, params.n_a)


@dataclass(frozen=True)
class GsmSymbol:
    aic: Tuple[int, ...]
    values: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "aic", tuple(int(i) for i in self.aic))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=complex))


def split_bits(bits: np.ndarray, params: IMParams) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorised split of ``(..., bits_per_user)`` blocks.

    Returns the AIC table index and the constellation labels with shape
    ``(..., n_values)``.
    """
    bits = np.asarray(bits)
    if bits.shape[-1] != params.bits_per_user:
        raise ValueError(f"expected {params.bits_per_user} bits per user, got {bits.shape[-1]}")
    sb = params.spatial_bits
    k = params.constellation.bits
    aic_idx = bits_to_int(bits[..., :sb])
    sym = bits[..., sb:].reshape(bits.shape[:-1] + (params.n_values, k))
    return aic_idx, bits_to_int(sym)


def join_bits(aic_idx: np.ndarray, labels: np.ndarray, params: IMParams) -> np.ndarray:
    """Inverse of :func:`split_bits`."""
    aic_bits = int_to_bits(aic_idx, params.spatial_bits)
    lab = int_to_bits(labels, params.constellation.bits)
    lab = lab.reshape(lab.shape[:-2] + (-1,))
    return np.concatenate([aic_bits, lab], axis=-1)


def encode(bits: Sequence[int], params: IMParams, table: AicTable) -> GsmSymbol:
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.ndim != 1:
        raise ValueError("encode expects a 1-D bit sequence")
    aic_idx, labels = split_bits(bits, params)
    values = params.constellation.modulate(labels)
    if params.reduced:
        values = np.repeat(values, params.n_a)
    return GsmSymbol(aic=tuple(table.combos[int(aic_idx)]), values=values)


def decode(symbol: GsmSymbol, params: IMParams, table: AicTable) -> np.ndarray:
    aic_idx = table.index(symbol.aic)
    const = params.constellation
    labels = const.nearest(symbol.values)
    if np.max(np.abs(const.points[labels] - symbol.values), initial=0.0) > 1e-9:
        raise DecodeError("symbol values are not constellation points")
    if params.reduced:
        if np.any(labels != labels[0]):
            raise DecodeError("reduced-variant symbol carries differing values")
        labels = labels[:1]
    return join_bits(np.int64(aic_idx), labels, params)


def densify(symbol: GsmSymbol, n_s: int) -> np.ndarray:
    s = np.zeros(n_s, dtype=complex)
    s[list(symbol.aic)] = symbol.values
    return s
