"""Message passing detection of one SCMA slot, optionally with a zero symbol.

Entries of the detection alphabet are indexed like block slots: with
``augment_zero`` index 0 is the all-zero codeword and index m is symbol m;
without it only symbols 1..M exist (array index m-1). Decisions are always
reported in slot convention (0 = zero, m = symbol m).

Messages live in the log domain and are normalized after every update
(log-sum-exp = 0), so their linear values sum to one.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .codebook import Codebook, FactorGraph, build_factor_graph

N0_FLOOR = 1e-12
DEFAULT_ITERS = 6
ML_MAX_USERS = 8
ML_MAX_M = 8


def _logsumexp(x: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    m = np.max(x, axis=axes, keepdims=True)
    out = np.log(np.sum(np.exp(x - m), axis=axes, keepdims=True)) + m
    return np.squeeze(out, axis=axes)


def _normalize(logp: np.ndarray) -> np.ndarray:
    return logp - _logsumexp(logp, (-1,))[..., None]


def detection_alphabet(cb: Codebook, scale: float = 1.0, augment_zero: bool = True) -> np.ndarray:
    """(J, A, K) chip values of every alphabet entry."""
    words = scale * cb.entries
    if augment_zero:
        zero = np.zeros((cb.J, 1, cb.K), dtype=complex)
        words = np.concatenate([zero, words], axis=1)
    return words


def zero_prior(M: int, n: int, t: int) -> np.ndarray:
    """Slot-occupancy prior over the augmented alphabet: P(zero) = (n - t)/n."""
    p = np.full(M + 1, t / (n * M))
    p[0] = (n - t) / n
    return p


def fn_update_cost(M: int, d_f: int, augment_zero: bool = True) -> int:
    """Likelihood terms summed per (resource, user, iteration) in the FN update."""
    return (M + 1 if augment_zero else M) ** (d_f - 1)


@dataclass
class MpaResult:
    beliefs: np.ndarray  # (B, J, A) linear posteriors, each row sums to 1
    decisions: np.ndarray  # (B, J) slot convention
    fn_to_un: list = field(default_factory=list)  # per resource: (B, d_f, A) linear
    un_to_fn: list = field(default_factory=list)


@dataclass
class SlotDecision:
    decisions: np.ndarray  # (J,) slot convention
    posteriors: np.ndarray  # (J, A)


class MpaDetector:
    """Batched MPA over many independent slots sharing one codebook.

    ``prior`` is an optional length-A probability vector applied to every
    user; the default is uniform (no prior term).
    """

    def __init__(
        self,
        cb: Codebook,
        fg: FactorGraph | None = None,
        scale: float = 1.0,
        iters: int = DEFAULT_ITERS,
        augment_zero: bool = True,
        prior=None,
    ):
        if iters < 1:
            raise ValueError("iters must be >= 1")
        self.cb = cb
        self.fg = fg if fg is not None else build_factor_graph(cb)
        self.iters = iters
        self.augment_zero = augment_zero
        self.alphabet = detection_alphabet(cb, scale, augment_zero)
        self.A = self.alphabet.shape[1]
        if prior is None:
            self.log_prior = np.full(self.A, -np.log(self.A))
        else:
            prior = np.asarray(prior, dtype=float)
            if prior.shape != (self.A,) or np.any(prior <= 0):
                raise ValueError(f"prior must be {self.A} positive weights")
            self.log_prior = np.log(prior / prior.sum())
        # edge (k, p) <-> user fn_neighbors[k][p]; per user the list of its edges
        self.user_edges = [[] for _ in range(cb.J)]
        for k, users in enumerate(self.fg.fn_neighbors):
            for p, j in enumerate(users):
                self.user_edges[j].append((k, p))

    def _log_likelihoods(self, y: np.ndarray, h: np.ndarray, N0) -> list[np.ndarray]:
        B = y.shape[0]
        N0 = np.broadcast_to(np.asarray(N0, dtype=float), (B,))
        if np.any(N0 <= 0):
            raise ValueError("N0 must be positive; use N0_FLOOR for noiseless frames")
        out = []
        for k, users in enumerate(self.fg.fn_neighbors):
            d = len(users)
            s = np.zeros((B,) + (1,) * d, dtype=complex)
            for p, j in enumerate(users):
                shape = [B] + [1] * d
                shape[p + 1] = self.A
                s = s + (h[:, j, k][:, None] * self.alphabet[j, :, k][None, :]).reshape(shape)
            diff = y[:, k].reshape((B,) + (1,) * d) - s
            out.append(-(diff.real**2 + diff.imag**2) / N0.reshape((B,) + (1,) * d))
        return out

    def run(self, y, h, N0, keep_messages: bool = False, domain: str = "linear") -> MpaResult:
        """``y``: (B, K) chips; ``h``: (B, J, K) gains; ``N0`` scalar or (B,).

        ``domain="linear"`` exponentiates the max-shifted log-likelihoods once
        and iterates on probabilities; ``domain="log"`` keeps every message in
        the log domain (slower, used as a cross-check).
        """
        y = np.atleast_2d(np.asarray(y, dtype=complex))
        h = np.asarray(h, dtype=complex)
        if h.ndim == 2:
            h = h[None]
        B = y.shape[0]
        J, K, A = self.cb.J, self.cb.K, self.A
        if y.shape != (B, K) or h.shape != (B, J, K):
            raise ValueError(f"expected y (B, {K}) and h (B, {J}, {K}), got {y.shape}, {h.shape}")

        loglik = self._log_likelihoods(y, h, N0)
        if domain == "log":
            log_u = self._iterate_log(loglik, B)
        elif domain == "linear":
            log_u = self._iterate_linear(loglik, B)
        else:
            raise ValueError(f"unknown domain {domain!r}")

        beliefs = np.empty((B, J, A))
        for j, edges in enumerate(self.user_edges):
            beliefs[:, j] = _normalize(self.log_prior + sum(log_u[k][:, p] for k, p in edges))
        beliefs = np.exp(beliefs)
        # argmax returns the first maximum: zero wins ties, then the lowest symbol
        decisions = np.argmax(beliefs, axis=-1) + (0 if self.augment_zero else 1)
        result = MpaResult(beliefs=beliefs, decisions=decisions)
        if keep_messages:
            result.fn_to_un = [np.exp(m) for m in log_u]
            result.un_to_fn = [np.exp(m) for m in self._last_log_v]
        return result

    def _un_update(self, log_u, log_v):
        for edges in self.user_edges:
            total = self.log_prior + sum(log_u[k][:, p] for k, p in edges)
            for k, p in edges:
                log_v[k][:, p] = _normalize(total - log_u[k][:, p])

    def _iterate_log(self, loglik, B):
        A = self.A
        fn = self.fg.fn_neighbors
        log_v = [np.broadcast_to(self.log_prior, (B, len(u), A)).copy() for u in fn]
        log_u = [np.zeros((B, len(u), A)) for u in fn]
        for _ in range(self.iters):
            for k, users in enumerate(fn):
                d = len(users)
                for p in range(d):
                    t = loglik[k]
                    for q in range(d):
                        if q != p:
                            shape = [B] + [1] * d
                            shape[q + 1] = A
                            t = t + log_v[k][:, q].reshape(shape)
                    others = tuple(ax for ax in range(1, d + 1) if ax != p + 1)
                    msg = _logsumexp(t, others) if others else t
                    log_u[k][:, p] = _normalize(msg)
            self._un_update(log_u, log_v)
        self._last_log_v = log_v
        return log_u

    def _iterate_linear(self, loglik, B):
        A = self.A
        fn = self.fg.fn_neighbors
        # per edge (k, p): likelihood weights with user p's axis moved first
        weights = []
        for t in loglik:
            d = t.ndim - 1
            w = np.exp(t - np.max(t, axis=tuple(range(1, d + 1)), keepdims=True))
            weights.append([np.ascontiguousarray(np.moveaxis(w, p + 1, 1)) for p in range(d)])
        log_v = [np.broadcast_to(self.log_prior, (B, len(u), A)).copy() for u in fn]
        log_u = [np.zeros((B, len(u), A)) for u in fn]
        for _ in range(self.iters):
            for k, users in enumerate(fn):
                d = len(users)
                # floor keeps products of d-1 incoming messages representable
                floor = 1e-300 ** (1.0 / max(d - 1, 1))
                v = np.maximum(np.exp(log_v[k]), floor)[..., None]  # (B, d, A, 1)
                for p in range(d):
                    msg = weights[k][p]
                    for q in reversed([q for q in range(d) if q != p]):
                        msg = np.matmul(msg.reshape(B, -1, A), v[:, q])[..., 0]
                    msg = msg.reshape(B, A)
                    total = msg.sum(axis=-1, keepdims=True)
                    dead = ~(total > 0)
                    if np.any(dead):
                        msg = np.where(dead, 1.0, msg)
                        total = msg.sum(axis=-1, keepdims=True)
                    log_u[k][:, p] = np.log(np.maximum(msg / total, 1e-300))
            self._un_update(log_u, log_v)
        self._last_log_v = log_v
        return log_u


def run_mpa_slot(
    y_slot,
    h_slot,
    cb: Codebook,
    fg: FactorGraph | None,
    N0: float,
    scale: float = 1.0,
    iters: int = DEFAULT_ITERS,
    augment_zero: bool = True,
    prior=None,
) -> SlotDecision:
    """Single-slot convenience wrapper around :class:`MpaDetector`."""
    det = MpaDetector(cb, fg, scale=scale, iters=iters, augment_zero=augment_zero, prior=prior)
    res = det.run(np.asarray(y_slot)[None], np.asarray(h_slot)[None], N0)
    return SlotDecision(decisions=res.decisions[0], posteriors=res.beliefs[0])


def exhaustive_slot_ml(
    y_slot, h_slot, cb: Codebook, N0: float = 1.0, augment_zero: bool = True, scale: float = 1.0
) -> np.ndarray:
    """Joint minimum-distance decision over every user's alphabet.

    ``N0`` does not change the minimizer; it is accepted for signature parity
    with the message passing detector.
    """
    if cb.J > ML_MAX_USERS or cb.M > ML_MAX_M:
        raise ValueError(f"exhaustive search limited to J <= {ML_MAX_USERS}, M <= {ML_MAX_M}")
    alphabet = detection_alphabet(cb, scale, augment_zero)
    A = alphabet.shape[1]
    y_slot = np.asarray(y_slot, dtype=complex)
    h_slot = np.asarray(h_slot, dtype=complex)
    combos = np.array(list(itertools.product(range(A), repeat=cb.J)))  # (A^J, J)
    faded = h_slot[:, None, :] * alphabet  # (J, A, K)
    s = np.zeros((len(combos), cb.K), dtype=complex)
    for j in range(cb.J):
        s += faded[j][combos[:, j]]
    metric = np.sum(np.abs(y_slot[None, :] - s) ** 2, axis=1)
    best = combos[int(np.argmin(metric))]
    return best + (0 if augment_zero else 1)
