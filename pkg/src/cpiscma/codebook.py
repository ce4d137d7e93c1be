"""SCMA codebook loading, validation and the user/resource factor graph."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

NORM_TOL = 1e-9
_ALLOWED_KEYS = {"name", "J", "K", "M", "codewords"}
BUNDLED_CODEBOOK = "scma_6x4x4.json"


class CodebookError(ValueError):
    """Raised for malformed or inconsistent codebook documents."""


@dataclass(frozen=True, eq=False)
class Codebook:
    """Per-user SCMA codeword dictionary.

    ``entries[j, m]`` is the K-chip codeword of user ``j`` for symbol ``m + 1``
    (symbols are numbered 1..M everywhere else in the package).
    """

    entries: np.ndarray
    name: str = ""
    renormalized: bool = False

    @property
    def J(self) -> int:
        return self.entries.shape[0]

    @property
    def M(self) -> int:
        return self.entries.shape[1]

    @property
    def K(self) -> int:
        return self.entries.shape[2]

    @property
    def support(self) -> np.ndarray:
        """Boolean (J, K) mask of the chips each user occupies."""
        return np.any(self.entries != 0, axis=1)

    @classmethod
    def from_array(cls, entries, name: str = "", strict: bool = True) -> "Codebook":
        """Validate a (J, M, K) complex array and wrap it.

        ``strict=False`` skips the sparsity checks (per-user pattern consistency,
        codewords with no zero chip, resources with no users), which only toy
        test codebooks need.
        """
        arr = np.array(entries, dtype=complex)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise CodebookError(f"codebook entries must have shape (J, M, K), got {arr.shape}")
        J, M, K = arr.shape
        if M & (M - 1):
            raise CodebookError(f"M={M} is not a power of two")

        nonzero = arr != 0
        for j in range(J):
            pattern = nonzero[j].any(axis=0)
            for m in range(M):
                if strict and not np.array_equal(nonzero[j, m], pattern):
                    raise CodebookError(
                        f"user {j + 1}: codeword {m + 1} has a different sparsity pattern"
                    )
            if not pattern.any():
                raise CodebookError(f"user {j + 1}: codewords are all zero")
            if strict and pattern.all():
                raise CodebookError(f"user {j + 1}: codewords have no zero chip")

        support = nonzero.any(axis=1)
        d_f = support.sum(axis=0)
        if strict and np.any(d_f == 0):
            empty = [int(k) + 1 for k in np.flatnonzero(d_f == 0)]
            raise CodebookError(f"resource(s) {empty} carry no users")
        d_v = support.sum(axis=1)
        if len(set(d_v)) == 1 and len(set(d_f)) == 1 and J * d_v[0] != K * d_f[0]:
            raise CodebookError(f"J*d_v={J * d_v[0]} does not match K*d_f={K * d_f[0]}")

        norms = np.sum(np.abs(arr) ** 2, axis=2)
        renorm = bool(np.any(np.abs(norms - 1.0) > NORM_TOL))
        if renorm:
            warnings.warn(f"codebook {name!r}: codewords renormalized to unit energy", stacklevel=2)
            arr = arr / np.sqrt(norms)[:, :, None]
        arr.setflags(write=False)
        return cls(entries=arr, name=name, renormalized=renorm)

    def codeword(self, j: int, symbol: int) -> np.ndarray:
        """Codeword of user ``j`` (0-based) for ``symbol`` in 1..M."""
        if not 1 <= symbol <= self.M:
            raise ValueError(f"symbol {symbol} outside 1..{self.M}")
        return self.entries[j, symbol - 1]

    def to_dict(self) -> dict:
        doc = {"J": self.J, "K": self.K, "M": self.M}
        if self.name:
            doc = {"name": self.name, **doc}
        doc["codewords"] = [
            [[[float(v.real), float(v.imag)] for v in cw] for cw in user] for user in self.entries
        ]
        return doc


def _parse_int(doc: dict, key: str) -> int:
    if key not in doc:
        raise CodebookError(f"missing field {key!r}")
    value = doc[key]
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise CodebookError(f"field {key!r} must be a positive integer, got {value!r}")
    return value


def parse_codebook(text: str, name: str = "<string>", strict: bool = True) -> Codebook:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CodebookError(f"{name}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise CodebookError(f"{name}: top level must be an object")
    unknown = set(doc) - _ALLOWED_KEYS
    if unknown:
        raise CodebookError(f"{name}: unknown field(s) {sorted(unknown)}")
    J, K, M = (_parse_int(doc, key) for key in ("J", "K", "M"))
    rows = doc.get("codewords")
    if not isinstance(rows, list) or len(rows) != J:
        raise CodebookError(f"{name}: field 'codewords' must list J={J} users")

    entries = np.zeros((J, M, K), dtype=complex)
    for j, user in enumerate(rows):
        if not isinstance(user, list) or len(user) != M:
            raise CodebookError(f"{name}: codewords[{j}] must list M={M} codewords")
        for m, cw in enumerate(user):
            if not isinstance(cw, list) or len(cw) != K:
                raise CodebookError(f"{name}: codewords[{j}][{m}] must have K={K} chips")
            for k, pair in enumerate(cw):
                ok = (
                    isinstance(pair, list)
                    and len(pair) == 2
                    and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in pair)
                )
                if not ok:
                    raise CodebookError(f"{name}: codewords[{j}][{m}][{k}] is not a [re, im] pair")
                entries[j, m, k] = complex(pair[0], pair[1])
    return Codebook.from_array(entries, name=str(doc.get("name", name)), strict=strict)


def load_codebook(source=None, strict: bool = True) -> Codebook:
    """Load a codebook document; ``None`` selects the bundled 6x4x4 codebook."""
    if source is None:
        text = resources.files("cpiscma.data").joinpath(BUNDLED_CODEBOOK).read_text()
        return parse_codebook(text, name=BUNDLED_CODEBOOK, strict=strict)
    path = Path(source)
    return parse_codebook(path.read_text(), name=str(path), strict=strict)


def dump_codebook(cb: Codebook) -> str:
    # repr-exact floats make load(dump(cb)) bit-identical
    return json.dumps(cb.to_dict(), indent=1)


@dataclass(frozen=True)
class FactorGraph:
    """Bipartite adjacency between function nodes (chips) and user nodes.

    Indices are 0-based; each neighbor tuple is sorted ascending.
    """

    fn_neighbors: tuple[tuple[int, ...], ...]
    un_neighbors: tuple[tuple[int, ...], ...]
    d_f: tuple[int, ...] = field(init=False)
    d_v: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "d_f", tuple(len(s) for s in self.fn_neighbors))
        object.__setattr__(self, "d_v", tuple(len(s) for s in self.un_neighbors))

    @property
    def max_d_f(self) -> int:
        return max(self.d_f)


def build_factor_graph(cb: Codebook) -> FactorGraph:
    support = cb.support
    fn = tuple(tuple(int(j) for j in np.flatnonzero(support[:, k])) for k in range(cb.K))
    un = tuple(tuple(int(k) for k in np.flatnonzero(support[j])) for j in range(cb.J))
    return FactorGraph(fn_neighbors=fn, un_neighbors=un)
