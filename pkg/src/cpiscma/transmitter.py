"""Bit-to-block mapping for CPI-SCMA users.

A block is described by ``slots``: a length-n integer vector where 0 marks an
inactive position and ``m`` in 1..M marks symbol ``m`` of the user's
codebook. The same encoding is used for detector decisions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .codebook import Codebook
from .index_map import IndexLut, bits_to_indices

NORMALIZE_MODES = ("none", "block-energy")
LABELINGS = ("natural", "gray")


def normalize_policy(mode: str, n: int, t: int) -> float:
    """Amplitude applied to active codewords.

    ``block-energy`` gives every block energy n, the energy of n fully
    occupied unit-energy slots.
    """
    if mode == "none":
        return 1.0
    if mode == "block-energy":
        return math.sqrt(n / t)
    raise ValueError(f"unknown normalization mode {mode!r}")


def bits_per_symbol(M: int) -> int:
    q = M.bit_length() - 1
    if M < 2 or 2**q != M:
        raise ValueError(f"M={M} must be a power of two >= 2")
    return q


def symbol_table(M: int, labeling: str = "natural") -> np.ndarray:
    """``table[v]`` is the 1-based symbol carried by bit-group value ``v``."""
    if labeling == "natural":
        return np.arange(1, M + 1)
    if labeling == "gray":
        # symbol s (0-based) carries the Gray word s ^ (s >> 1)
        table = np.empty(M, dtype=int)
        for s in range(M):
            table[s ^ (s >> 1)] = s + 1
        return table
    raise ValueError(f"unknown labeling {labeling!r}")


def block_bits(lut: IndexLut, M: int) -> int:
    return lut.m1 + lut.t * bits_per_symbol(M)


@dataclass(frozen=True, eq=False)
class UserBlock:
    j: int
    slots: tuple[int, ...]
    scale: float
    signal: np.ndarray  # (n, K) transmitted chips, zero rows on inactive slots

    @property
    def active(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.slots) if s)

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.signal) ** 2))


def render_slots(slots, cb: Codebook, j: int, scale: float) -> np.ndarray:
    """(…, n) slot vectors of user ``j`` -> (…, n, K) chips."""
    slots = np.asarray(slots)
    alphabet = np.vstack([np.zeros((1, cb.K), dtype=complex), scale * cb.entries[j]])
    return alphabet[slots]


def make_block(slots, cb: Codebook, j: int, scale: float = 1.0) -> UserBlock:
    slots = tuple(int(s) for s in slots)
    sig = render_slots(np.array(slots), cb, j, scale)
    sig.setflags(write=False)
    return UserBlock(j=j, slots=slots, scale=scale, signal=sig)


def encode_block(
    bits,
    lut: IndexLut,
    cb: Codebook,
    j: int,
    scale: float = 1.0,
    labeling: str = "natural",
) -> UserBlock:
    bits = [int(b) for b in bits]
    q = bits_per_symbol(cb.M)
    if len(bits) != lut.m1 + lut.t * q:
        raise ValueError(f"expected {lut.m1 + lut.t * q} bits, got {len(bits)}")
    active = bits_to_indices(lut, bits[: lut.m1])
    table = symbol_table(cb.M, labeling)
    slots = [0] * lut.n
    for beta, pos in enumerate(active):
        group = bits[lut.m1 + beta * q : lut.m1 + (beta + 1) * q]
        slots[pos] = int(table[int("".join(map(str, group)), 2)])
    return make_block(slots, cb, j, scale)


def decode_block_to_bits(block, lut: IndexLut, cb: Codebook, labeling: str = "natural") -> tuple[int, ...]:
    """Inverse of :func:`encode_block`; accepts a UserBlock or a slot vector."""
    slots = block.slots if isinstance(block, UserBlock) else tuple(int(s) for s in block)
    active = tuple(i for i, s in enumerate(slots) if s)
    mask = sum(1 << i for i in active)
    row = lut.row_of_mask(mask)
    if row is None or len(slots) != lut.n:
        raise ValueError(f"slot pattern {slots} is not a LUT row")
    q = bits_per_symbol(cb.M)
    inverse = np.argsort(symbol_table(cb.M, labeling))
    out = [(row >> (lut.m1 - 1 - i)) & 1 for i in range(lut.m1)]
    for pos in active:
        v = int(inverse[slots[pos] - 1])
        out.extend((v >> (q - 1 - i)) & 1 for i in range(q))
    return tuple(out)


class BlockCodec:
    """Vectorized encode/decode over arrays of shape (..., m) bits / (..., n) slots."""

    def __init__(self, lut: IndexLut, M: int, labeling: str = "natural"):
        self.lut = lut
        self.M = M
        self.q = bits_per_symbol(M)
        self.m = lut.m1 + lut.t * self.q
        self.table = symbol_table(M, labeling)
        self.inverse = np.argsort(self.table)
        self.rows = np.array(lut.rows, dtype=int).reshape(len(lut.rows), lut.t)
        # LUT row of every active-slot bitmask, -1 when illegal
        self.row_of_mask = np.full(2**lut.n, -1, dtype=int)
        for r, mask in enumerate(lut.masks):
            self.row_of_mask[mask] = r
        self._weights_m1 = 2 ** np.arange(lut.m1 - 1, -1, -1)
        self._weights_q = 2 ** np.arange(self.q - 1, -1, -1)
        self._slot_weights = 2 ** np.arange(lut.n)

    def encode(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits, dtype=int)
        lead = bits.shape[:-1]
        row = bits[..., : self.lut.m1] @ self._weights_m1 if self.lut.m1 else np.zeros(lead, int)
        groups = bits[..., self.lut.m1 :].reshape(*lead, self.lut.t, self.q) @ self._weights_q
        slots = np.zeros((*lead, self.lut.n), dtype=int)
        positions = self.rows[row]  # (..., t)
        np.put_along_axis(slots, positions, self.table[groups], axis=-1)
        return slots

    def masks(self, slots: np.ndarray) -> np.ndarray:
        return (np.asarray(slots) > 0) @ self._slot_weights

    def decode(self, slots: np.ndarray) -> np.ndarray:
        """Slots must be LUT-legal; illegal patterns raise ValueError."""
        slots = np.asarray(slots, dtype=int)
        lead = slots.shape[:-1]
        row = self.row_of_mask[self.masks(slots)]
        if np.any(row < 0):
            raise ValueError("slot pattern outside the LUT")
        out = np.empty((*lead, self.m), dtype=int)
        for i in range(self.lut.m1):
            out[..., i] = (row >> (self.lut.m1 - 1 - i)) & 1
        positions = self.rows[row]
        syms = np.take_along_axis(slots, positions, axis=-1)  # (..., t)
        values = self.inverse[syms - 1]
        for beta in range(self.lut.t):
            for i in range(self.q):
                out[..., self.lut.m1 + beta * self.q + i] = (values[..., beta] >> (self.q - 1 - i)) & 1
        return out
