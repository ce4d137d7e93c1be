"""Codeword-position look-up tables: index bits <-> active slot sets.

Slot indices are 0-based in code. The LUT override file and ``lut show``
output use 1-based slots, the way position tables are usually written.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

# The (4, 2) table is not lexicographic: it leaves out {1,2} and {3,4}.
_TABLE_4_2 = ((0, 2), (1, 3), (1, 2), (0, 3))


def index_bit_count(n: int, t: int) -> int:
    """Number of index bits ``floor(log2(C(n, t)))`` carried by a block."""
    if not 1 <= t <= n:
        raise ValueError(f"need 1 <= t <= n, got n={n}, t={t}")
    # integer bit_length avoids float log2 rounding for large C(n, t)
    return math.comb(n, t).bit_length() - 1


def _bits(value: int, width: int) -> tuple[int, ...]:
    return tuple((value >> (width - 1 - i)) & 1 for i in range(width))


@dataclass(frozen=True)
class IndexLut:
    n: int
    t: int
    rows: tuple[tuple[int, ...], ...]
    m1: int = field(init=False)

    def __post_init__(self):
        m1 = index_bit_count(self.n, self.t)
        object.__setattr__(self, "m1", m1)
        rows = tuple(tuple(sorted(r)) for r in self.rows)
        object.__setattr__(self, "rows", rows)
        if len(rows) != 2**m1:
            raise ValueError(f"LUT for n={self.n}, t={self.t} needs {2**m1} rows, got {len(rows)}")
        if len(set(rows)) != len(rows):
            raise ValueError("LUT rows are not distinct")
        for r in rows:
            if len(r) != self.t or len(set(r)) != self.t or not all(0 <= i < self.n for i in r):
                raise ValueError(f"LUT row {[i + 1 for i in r]} is not a size-{self.t} subset of 1..{self.n}")

    @property
    def bit_strings(self) -> list[tuple[int, ...]]:
        return [_bits(v, self.m1) for v in range(len(self.rows))]

    @cached_property
    def masks(self) -> tuple[int, ...]:
        """Row active sets as integer bitmasks (bit i set for active slot i)."""
        return tuple(sum(1 << i for i in r) for r in self.rows)

    def row_of_mask(self, mask: int) -> int | None:
        try:
            return self.masks.index(mask)
        except ValueError:
            return None

    @property
    def excluded(self) -> list[tuple[int, ...]]:
        """Size-t subsets that no LUT row uses."""
        used = set(self.rows)
        return [c for c in itertools.combinations(range(self.n), self.t) if c not in used]


def build_lut(n: int, t: int) -> IndexLut:
    m1 = index_bit_count(n, t)
    if (n, t) == (4, 2):
        return IndexLut(n, t, _TABLE_4_2)
    rows = tuple(itertools.islice(itertools.combinations(range(n), t), 2**m1))
    return IndexLut(n, t, rows)


def bits_to_indices(lut: IndexLut, bits) -> tuple[int, ...]:
    bits = tuple(int(b) for b in bits)
    if len(bits) != lut.m1:
        raise ValueError(f"expected {lut.m1} index bits, got {len(bits)}")
    value = 0
    for b in bits:
        value = (value << 1) | b
    return lut.rows[value]


def indices_to_bits(lut: IndexLut, indices) -> tuple[int, ...] | None:
    """Bit string of the row using ``indices``; None when the set is not in the LUT."""
    key = tuple(sorted(int(i) for i in indices))
    if len(key) != lut.t:
        raise ValueError(f"expected {lut.t} indices, got {len(key)}")
    try:
        return _bits(lut.rows.index(key), lut.m1)
    except ValueError:
        return None


def parse_lut(text: str, n: int, t: int) -> IndexLut:
    """Parse override rows of the form ``01 -> 2,4`` (1-based slots).

    Blank lines and ``#`` comments are ignored; rows must cover every bit
    string exactly once.
    """
    m1 = index_bit_count(n, t)
    by_value: dict[int, tuple[int, ...]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" not in line:
            raise ValueError(f"line {lineno}: expected 'bits -> indices'")
        lhs, rhs = (part.strip() for part in line.split("->", 1))
        bits = lhs.replace(" ", "")
        if bits == "-":
            bits = ""
        if len(bits) != m1 or set(bits) - {"0", "1"}:
            raise ValueError(f"line {lineno}: {lhs!r} is not a {m1}-bit string")
        value = int(bits, 2) if m1 else 0
        if value in by_value:
            raise ValueError(f"line {lineno}: bit string {lhs!r} repeated")
        try:
            idx = tuple(int(s) - 1 for s in rhs.split(","))
        except ValueError:
            raise ValueError(f"line {lineno}: bad index list {rhs!r}") from None
        by_value[value] = idx
    if len(by_value) != 2**m1:
        raise ValueError(f"LUT file defines {len(by_value)} rows, need {2**m1}")
    return IndexLut(n, t, tuple(by_value[v] for v in range(2**m1)))


def load_lut(path, n: int, t: int) -> IndexLut:
    return parse_lut(Path(path).read_text(), n, t)


def format_lut(lut: IndexLut) -> str:
    lines = []
    for bits, row in zip(lut.bit_strings, lut.rows):
        label = "".join(map(str, bits)) or "-"
        lines.append(f"{label} -> {','.join(str(i + 1) for i in row)}")
    return "\n".join(lines)
