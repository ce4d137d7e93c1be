"""Closed-form and empirical figures of merit.

Transmission efficiency, the two-exponential Q approximation, the fading
averaged pairwise error probability with its union bound, and error-pattern
statistics gathered from detector diagnostics.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .codebook import Codebook
from .index_map import IndexLut, index_bit_count
from .transmitter import BlockCodec, bits_per_symbol, render_slots

EXHAUSTIVE_PAIR_LIMIT = 10**7


@dataclass(frozen=True)
class EfficiencyReport:
    r_t_c: Fraction
    r_t_cpi: Fraction | None

    @property
    def ratio(self) -> Fraction | None:
        return None if self.r_t_cpi is None else self.r_t_cpi / self.r_t_c


def transmission_efficiency(J: int, K: int, M: int, n: int | None = None, t: int | None = None) -> EfficiencyReport:
    """Bits per chip of conventional SCMA and, given (n, t), of CPI-SCMA."""
    q = bits_per_symbol(M)
    r_c = Fraction(J * q, K)
    if n is None or t is None:
        return EfficiencyReport(r_c, None)
    m1 = index_bit_count(n, t)
    return EfficiencyReport(r_c, Fraction(J * (m1 + t * q), n * K))


def q_approx(x: float) -> float:
    """Q(x) ~ exp(-x^2/2)/12 + exp(-2x^2/3)/4."""
    if x < 0:
        raise ValueError("q_approx is defined for x >= 0")
    return math.exp(-x * x / 2) / 12 + math.exp(-2 * x * x / 3) / 4


def pairwise_distance(sent, detected) -> np.ndarray:
    """Per-chip squared distance summed over users; inputs are (J, n*K) chips."""
    diff = np.asarray(sent) - np.asarray(detected)
    return np.sum(np.abs(diff) ** 2, axis=0)


def upep(lam2, N0: float) -> float | np.ndarray:
    """Rayleigh-averaged pairwise error probability under the Q approximation.

    ``lam2`` has the chip axis last; leading axes are evaluated independently.
    Uses E[exp(-a|h|^2)] = 1/(1 + a) for unit-variance complex gains.
    """
    if N0 <= 0:
        raise ValueError("N0 must be positive")
    lam2 = np.asarray(lam2, dtype=float)
    a = np.prod(4 * N0 / (4 * N0 + lam2), axis=-1)
    b = np.prod(3 * N0 / (3 * N0 + lam2), axis=-1)
    return a / 12 + b / 4


def upep_product_form(lam2, N0: float) -> float | np.ndarray:
    """The product form N0(48N0 - 13 l)/((4N0 - l)(6N0 - l)) over chips.

    Kept for comparison only: it gives 2 per chip at zero distance, has poles
    at 4 N0 and 6 N0, and is negative for 48 N0/13 < l < 4 N0.
    """
    lam2 = np.asarray(lam2, dtype=float)
    terms = N0 * (48 * N0 - 13 * lam2) / ((4 * N0 - lam2) * (6 * N0 - lam2))
    return np.prod(terms, axis=-1)


def all_blocks(lut: IndexLut, cb: Codebook, labeling: str = "natural") -> np.ndarray:
    """Slot vectors of every block a user can send, in bit-string order."""
    codec = BlockCodec(lut, cb.M, labeling)
    inputs = np.array(list(itertools.product((0, 1), repeat=codec.m)), dtype=int).reshape(-1, codec.m)
    return codec.encode(inputs)


@dataclass
class BoundResult:
    value: float
    stderr: float
    pairs: int
    method: str


def abler_bound(
    cb: Codebook,
    lut: IndexLut,
    N0: float,
    j: int = 0,
    sampling="exhaustive",
    scale: float = 1.0,
    rng: np.random.Generator | None = None,
    literal: bool = False,
) -> BoundResult:
    """Union bound on user ``j``'s block error rate.

    ``sampling`` is ``"exhaustive"`` or ``("monte-carlo", count)``. The average
    runs over the 2^m1 * M^t distinct blocks per user.
    """
    pep = upep_product_form if literal else upep
    slots = all_blocks(lut, cb)
    nb = len(slots)
    J = cb.J
    # chips[u, b] = transmitted chips of block b for user u
    chips = np.stack([render_slots(slots, cb, u, scale).reshape(nb, -1) for u in range(J)])
    # dist[u, a, b, s] = |chips[u, a, s] - chips[u, b, s]|^2
    dist = np.abs(chips[:, :, None, :] - chips[:, None, :, :]) ** 2

    if sampling == "exhaustive":
        pairs = nb ** (2 * J)
        if pairs > EXHAUSTIVE_PAIR_LIMIT:
            raise ValueError(f"{pairs} block-set pairs exceed the exhaustive limit {EXHAUSTIVE_PAIR_LIMIT}")
        others = np.array(list(itertools.product(range(nb), repeat=J)))  # (nb^J, J)
        total = 0.0
        for sent in others:
            lam2 = sum(dist[u, sent[u]][others[:, u]] for u in range(J))  # (nb^J, chips)
            mask = others[:, j] != sent[j]
            total += float(np.sum(pep(lam2[mask], N0)))
        return BoundResult(total / nb**J, 0.0, pairs, "exhaustive")

    kind, count = sampling
    if kind != "monte-carlo" or count < 2:
        raise ValueError(f"unknown sampling {sampling!r}")
    rng = rng or np.random.default_rng()
    sent = rng.integers(0, nb, size=(count, J))
    det = rng.integers(0, nb, size=(count, J))
    # user j's detected block is uniform over the nb - 1 wrong ones
    shift = rng.integers(1, nb, size=count)
    det[:, j] = (sent[:, j] + shift) % nb
    lam2 = sum(dist[u, sent[:, u], det[:, u]] for u in range(J))
    vals = pep(lam2, N0)
    factor = (nb - 1) * nb ** (J - 1)
    return BoundResult(
        factor * float(np.mean(vals)), factor * float(np.std(vals, ddof=1)) / math.sqrt(count), count, "monte-carlo"
    )


@dataclass
class PatternStats:
    """Error-pattern occurrence counts over ``blocks`` user blocks.

    ``case_counts[g]`` counts Case g (g = n - |D|); ``search_total`` sums the
    candidate-set sizes, so ``extra_complexity`` = sum_g |psi_g| * delta_g.
    """

    n: int
    blocks: int = 0
    reliable: int = 0
    case_counts: list = field(default_factory=list)
    search_total: int = 0

    def __post_init__(self):
        if not self.case_counts:
            self.case_counts = [0] * (self.n + 1)

    @property
    def delta(self) -> list[float]:
        return [c / self.blocks if self.blocks else 0.0 for c in self.case_counts]

    @property
    def reliable_ratio(self) -> float:
        return self.reliable / self.blocks if self.blocks else 0.0

    @property
    def extra_complexity(self) -> float:
        return self.search_total / self.blocks if self.blocks else 0.0

    def add(self, case: int | None, search_size: int = 0) -> None:
        self.blocks += 1
        if case is None:
            self.reliable += 1
        else:
            self.case_counts[case] += 1
            self.search_total += search_size

    def merge(self, other: "PatternStats") -> "PatternStats":
        return PatternStats(
            n=self.n,
            blocks=self.blocks + other.blocks,
            reliable=self.reliable + other.reliable,
            case_counts=[a + b for a, b in zip(self.case_counts, other.case_counts)],
            search_total=self.search_total + other.search_total,
        )

    @classmethod
    def from_diagnostics(cls, diag, n: int) -> "PatternStats":
        case = diag.case.reshape(-1)
        counts = np.bincount(case[case >= 0], minlength=n + 1)
        return cls(
            n=n,
            blocks=int(case.size),
            reliable=int(np.sum(case < 0)),
            case_counts=[int(c) for c in counts],
            search_total=int(np.sum(diag.search_size)),
        )


def pattern_stats(records, n: int, per: str = "user") -> PatternStats:
    """Aggregate ``(frame, user, case, search_size)`` records.

    ``per="user"`` counts every user block; ``per="block"`` counts each frame
    once per case present in it (its search size is summed over the users
    that hit the case), so the ratios no longer need to sum to one.
    """
    if per == "user":
        stats = PatternStats(n=n)
        for _, _, case, size in records:
            stats.add(case, size)
        return stats
    if per != "block":
        raise ValueError(f"unknown counting mode {per!r}")
    frames: dict = {}
    for frame, _, case, size in records:
        seen = frames.setdefault(frame, {})
        if case is not None:
            seen[case] = seen.get(case, 0) + size
    stats = PatternStats(n=n, blocks=len(frames))
    for seen in frames.values():
        if not seen:
            stats.reliable += 1
        for case, size in seen.items():
            stats.case_counts[case] += 1
            stats.search_total += size
    return stats
