"""Message-passing-aided detection of whole CPI-SCMA frames.

Each slot goes through the zero-augmented MPA. Users whose decided active
set is a LUT row are trusted as reliable, and their faded blocks are
subtracted from the received chips. The remaining users are resolved
jointly by a minimum-distance search over their repair candidates.

Error-pattern cases are labelled ``n - |D|``, where D is the decided active
set. For (n, t) = (4, 2) this gives Cases 0-4: four active, three active,
an illegal pair, one active, none active.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .codebook import Codebook, FactorGraph, build_factor_graph
from .index_map import IndexLut
from .mpa import DEFAULT_ITERS, MpaDetector
from .transmitter import BlockCodec, UserBlock, render_slots

DEFAULT_PML_CAP = 100_000
MAX_SWEEPS = 10
RELIABLE = -1


def count_error_patterns(n: int, t: int) -> int:
    """Closed-form pattern count ``n + [C(n, t) - n > 0]``."""
    return n + (1 if math.comb(n, t) - n > 0 else 0)


def reachable_pattern_cases(lut: IndexLut) -> list[int]:
    """Case labels that some non-reliable decision pattern can produce."""
    cases = set()
    for mask in range(2**lut.n):
        if lut.row_of_mask(mask) is None:
            cases.add(lut.n - bin(mask).count("1"))
    return sorted(cases)


@dataclass(frozen=True)
class DetectedPattern:
    decisions: tuple[int, ...]
    active: tuple[int, ...]
    case: int | None  # None when reliable

    @property
    def reliable(self) -> bool:
        return self.case is None


def classify_pattern(decisions, lut: IndexLut) -> DetectedPattern:
    decisions = tuple(int(d) for d in decisions)
    if len(decisions) != lut.n:
        raise ValueError(f"expected {lut.n} slot decisions, got {len(decisions)}")
    active = tuple(i for i, d in enumerate(decisions) if d)
    mask = sum(1 << i for i in active)
    case = None if lut.row_of_mask(mask) is not None else lut.n - len(active)
    return DetectedPattern(decisions=decisions, active=active, case=case)


@lru_cache(maxsize=None)
def repair_template(lut: IndexLut, mask: int, M: int) -> np.ndarray:
    """Minimal-repair candidates for a decided active-set bitmask.

    Rows are length-n slot vectors: -1 means "keep the decided symbol",
    0 inactive, m a freshly enumerated symbol. LUT rows at minimal symmetric
    difference from the decided set are used, in LUT order.
    """
    dist = [bin(row ^ mask).count("1") for row in lut.masks]
    best = min(dist)
    out = []
    for row, dr in zip(lut.masks, dist):
        if dr != best:
            continue
        slots = [i for i in range(lut.n) if row >> i & 1]
        fresh = [i for i in slots if not mask >> i & 1]
        for syms in itertools.product(range(1, M + 1), repeat=len(fresh)):
            cand = [0] * lut.n
            for i in slots:
                cand[i] = -1
            for i, s in zip(fresh, syms):
                cand[i] = s
            out.append(cand)
    arr = np.array(out, dtype=int)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CandidateSet:
    j: int
    case: int
    candidates: np.ndarray  # (C, n) slot vectors

    def __len__(self) -> int:
        return len(self.candidates)

    def blocks(self, cb: Codebook, scale: float = 1.0) -> list[UserBlock]:
        from .transmitter import make_block

        return [make_block(c, cb, self.j, scale) for c in self.candidates]


def candidate_slots(decisions, lut: IndexLut, M: int) -> np.ndarray:
    decisions = np.asarray(decisions, dtype=int)
    mask = int(sum(1 << i for i in range(lut.n) if decisions[i]))
    template = repair_template(lut, mask, M)
    return np.where(template < 0, decisions[None, :], template)


def build_candidates(pattern: DetectedPattern, lut: IndexLut, cb: Codebook, j: int) -> CandidateSet:
    if pattern.reliable:
        raise ValueError("reliable patterns need no repair candidates")
    return CandidateSet(j=j, case=pattern.case, candidates=candidate_slots(pattern.decisions, lut, cb.M))


def cancel_reliable(y, gains, reliable) -> np.ndarray:
    """Residual chips after removing reliable users' faded blocks.

    ``reliable`` maps user -> transmitted chips of shape (n, K) or (n*K,)
    (UserBlock values are accepted too).
    """
    r = np.array(y, dtype=complex)
    items = reliable.items() if isinstance(reliable, dict) else reliable
    for j, block in items:
        sig = block.signal if isinstance(block, UserBlock) else block
        r = r - gains[j] * np.asarray(sig).reshape(-1)
    return r


@dataclass
class PmlResult:
    choice: dict  # user -> index into its candidate array
    hypotheses: int
    fallback: bool
    distance: float


def _joint_search(r: np.ndarray, contribs: list[np.ndarray]) -> tuple[tuple[int, ...], float]:
    """Exhaustive argmin of ||r - sum_j contribs[j][i_j]||^2; ties go to the first tuple."""
    acc = r[None, :]
    for c in contribs:
        acc = (acc[:, None, :] - c[None, :, :]).reshape(-1, r.shape[0])
    metric = np.sum(acc.real**2 + acc.imag**2, axis=1)
    flat = int(np.argmin(metric))
    return np.unravel_index(flat, [len(c) for c in contribs]), float(metric[flat])


def _coordinate_descent(r: np.ndarray, contribs: list[np.ndarray]) -> tuple[list[int], float]:
    order = sorted(range(len(contribs)), key=lambda i: len(contribs[i]))
    choice = [0] * len(contribs)
    current = sum(c[0] for c in contribs)
    for _ in range(MAX_SWEEPS):
        changed = False
        for i in order:
            rest = r - (current - contribs[i][choice[i]])
            metric = np.sum(np.abs(rest[None, :] - contribs[i]) ** 2, axis=1)
            best = int(np.argmin(metric))
            if best != choice[i]:
                current = current - contribs[i][choice[i]] + contribs[i][best]
                choice[i] = best
                changed = True
        if not changed:
            break
    return choice, float(np.sum(np.abs(r - current) ** 2))


def pml_detect(r, gains, sets, cb: Codebook, scale: float = 1.0, cap: int = DEFAULT_PML_CAP) -> PmlResult:
    """Minimum-distance search over the product of the users' candidate sets.

    Falls back to coordinate descent when the product exceeds ``cap``.
    """
    r = np.asarray(r, dtype=complex)
    sets = list(sets)
    if not sets:
        return PmlResult(choice={}, hypotheses=0, fallback=False, distance=float(np.sum(np.abs(r) ** 2)))
    contribs = []
    for cs in sets:
        if len(cs) == 0:
            raise RuntimeError(f"empty candidate set for user {cs.j}")
        chips = render_slots(cs.candidates, cb, cs.j, scale).reshape(len(cs), -1)
        contribs.append(gains[cs.j][None, :] * chips)
    size = math.prod(len(c) for c in contribs)
    if size <= cap:
        idx, dist = _joint_search(r, contribs)
        fallback = False
    else:
        idx, dist = _coordinate_descent(r, contribs)
        fallback = True
    return PmlResult(
        choice={cs.j: int(i) for cs, i in zip(sets, idx)}, hypotheses=size, fallback=fallback, distance=dist
    )


@dataclass
class DetectionDiagnostics:
    """Per (frame, user) case labels (-1 = reliable) and PML search sizes."""

    case: np.ndarray  # (B, J)
    search_size: np.ndarray  # (B, J) candidate-set size, 0 when reliable
    hypotheses: np.ndarray  # (B,) size of the joint PML product, 0 when unused
    fallback: np.ndarray  # (B,) bool

    def records(self):
        """Yield ``(frame, user, case, search_size)`` tuples; case None = reliable."""
        B, J = self.case.shape
        for b in range(B):
            for j in range(J):
                c = int(self.case[b, j])
                yield b, j, (None if c == RELIABLE else c), int(self.search_size[b, j])


@dataclass
class MpadParams:
    scale: float = 1.0
    iters: int = DEFAULT_ITERS
    augment_zero: bool = True
    prior: object = None
    pml_cap: int = DEFAULT_PML_CAP
    labeling: str = "natural"


class MpadDetector:
    """Detect batches of frames; ``y`` is (B, n*K), ``gains`` (B, J, n*K)."""

    def __init__(self, cb: Codebook, lut: IndexLut, params: MpadParams | None = None, fg: FactorGraph | None = None):
        self.cb = cb
        self.lut = lut
        self.params = params or MpadParams()
        self.fg = fg or build_factor_graph(cb)
        self.mpa = MpaDetector(
            cb,
            self.fg,
            scale=self.params.scale,
            iters=self.params.iters,
            augment_zero=self.params.augment_zero,
            prior=self.params.prior,
        )
        self.codec = BlockCodec(lut, cb.M, self.params.labeling)

    def slot_decisions(self, y, gains, N0) -> np.ndarray:
        """(B, J, n) per-slot MPA decisions."""
        y = np.atleast_2d(y)
        B = y.shape[0]
        n, K, J = self.lut.n, self.cb.K, self.cb.J
        ys = y.reshape(B * n, K)
        hs = gains.reshape(B, J, n, K).transpose(0, 2, 1, 3).reshape(B * n, J, K)
        N0 = np.repeat(np.broadcast_to(np.asarray(N0, dtype=float), (B,)), n)
        dec = self.mpa.run(ys, hs, N0).decisions
        return dec.reshape(B, n, J).transpose(0, 2, 1)

    def resolve(self, decisions, y, gains):
        """Codeword cancellation and partial ML on given slot decisions.

        Returns legal slot vectors (B, J, n) and diagnostics.
        """
        decisions = np.asarray(decisions, dtype=int)
        y = np.atleast_2d(y)
        B, J, n = decisions.shape
        masks = self.codec.masks(decisions)
        legal = self.codec.row_of_mask[masks] >= 0
        case = np.where(legal, RELIABLE, n - np.sum(decisions > 0, axis=-1))
        size = np.zeros((B, J), dtype=int)
        hyp = np.zeros(B, dtype=int)
        fallback = np.zeros(B, dtype=bool)
        out = decisions.copy()
        scale = self.params.scale
        for b in np.flatnonzero(~np.all(legal, axis=1)):
            rel = np.flatnonzero(legal[b])
            reliable = {int(j): render_slots(decisions[b, j], self.cb, int(j), scale) for j in rel}
            r = cancel_reliable(y[b], gains[b], reliable)
            sets = []
            for j in np.flatnonzero(~legal[b]):
                cand = candidate_slots(decisions[b, j], self.lut, self.cb.M)
                sets.append(CandidateSet(j=int(j), case=int(case[b, j]), candidates=cand))
                size[b, j] = len(cand)
            res = pml_detect(r, gains[b], sets, self.cb, scale, self.params.pml_cap)
            for cs in sets:
                out[b, cs.j] = cs.candidates[res.choice[cs.j]]
            hyp[b] = res.hypotheses
            fallback[b] = res.fallback
        return out, DetectionDiagnostics(case=case, search_size=size, hypotheses=hyp, fallback=fallback)

    def detect(self, y, gains, N0):
        """Full pipeline: returns (slots (B, J, n), bits (B, J, m), diagnostics)."""
        decisions = self.slot_decisions(y, gains, N0)
        slots, diag = self.resolve(decisions, y, gains)
        return slots, self.codec.decode(slots), diag


def detect_frame(frame, cb: Codebook, fg: FactorGraph | None, lut: IndexLut, params: MpadParams | None = None):
    """Detect one ReceivedFrame; returns (bits (J, m), DetectionDiagnostics)."""
    det = MpadDetector(cb, lut, params, fg)
    _, bits, diag = det.detect(frame.chips[None], frame.channel.gains[None], frame.noise_var)
    return bits[0], diag
