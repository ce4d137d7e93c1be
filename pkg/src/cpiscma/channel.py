"""Rayleigh-faded multi-user superposition with complex AWGN.

Gains are i.i.d. CN(0, 1) per user and chip by default (fast fading);
``coherence="slot"`` holds each user's gain constant over the K chips of a
slot. The receiver is assumed to know the gains exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

COHERENCE_MODES = ("chip", "slot")


@dataclass(frozen=True, eq=False)
class ChannelState:
    gains: np.ndarray  # (J, n*K) complex


@dataclass(frozen=True, eq=False)
class ReceivedFrame:
    chips: np.ndarray  # (n*K,)
    noise_var: float
    channel: ChannelState


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    scale = np.sqrt(var / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_gains(rng: np.random.Generator, shape: tuple, n: int, K: int, coherence: str = "chip") -> np.ndarray:
    """Gains of shape (*shape, n*K)."""
    if coherence == "chip":
        return complex_normal(rng, (*shape, n * K))
    if coherence == "slot":
        return np.repeat(complex_normal(rng, (*shape, n)), K, axis=-1)
    raise ValueError(f"unknown coherence mode {coherence!r}")


def draw_channel(rng: np.random.Generator, J: int, n: int, K: int, coherence: str = "chip") -> ChannelState:
    if min(J, n, K) < 1:
        raise ValueError("channel dimensions must be positive")
    return ChannelState(gains=draw_gains(rng, (J,), n, K, coherence))


def noise_variance(ebn0_db: float, bits_per_user: int, block_energy: float) -> float:
    """N0 such that Eb/N0 (Eb = block energy / bits) equals ``ebn0_db``."""
    if block_energy <= 0:
        raise ValueError("block energy must be positive")
    if bits_per_user < 1:
        raise ValueError("bits_per_user must be >= 1")
    eb = block_energy / bits_per_user
    return eb / 10 ** (ebn0_db / 10)


def superimpose_signals(
    signals: np.ndarray, gains: np.ndarray, N0: float, rng: np.random.Generator | None
) -> np.ndarray:
    """y[..., s] = sum_j gains[..., j, s] * signals[..., j, s] + noise."""
    if signals.shape != gains.shape:
        raise ValueError(f"signal shape {signals.shape} does not match gain shape {gains.shape}")
    y = np.sum(gains * signals, axis=-2)
    if N0 > 0:
        if rng is None:
            raise ValueError("a random source is required when N0 > 0")
        y = y + complex_normal(rng, y.shape, N0)
    return y


def superimpose(blocks, ch: ChannelState, N0: float, rng: np.random.Generator | None = None) -> ReceivedFrame:
    """Received chips of one frame; ``blocks`` are UserBlocks ordered by user."""
    signals = np.stack([np.asarray(b.signal).reshape(-1) for b in blocks])
    y = superimpose_signals(signals, ch.gains, N0, rng)
    return ReceivedFrame(chips=y, noise_var=float(N0), channel=ch)
