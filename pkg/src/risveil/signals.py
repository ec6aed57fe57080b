"""Uplink transmit blocks and the received snapshot matrix at the BS."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelSet, effective_channel

MODULATIONS = ("gaussian", "qpsk")


@dataclass
class SymbolBlock:
    """(K, T) transmit matrix; row k holds sqrt(p_k) * s_k(t) with unit-power symbols."""

    s: np.ndarray
    powers: np.ndarray

    @property
    def n_users(self) -> int:
        return self.s.shape[0]

    @property
    def n_slots(self) -> int:
        return self.s.shape[1]


@dataclass
class ReceivedBlock:
    """(M, T) BS snapshot matrix and the noise variance used to generate it."""

    y: np.ndarray
    noise_power: float


def generate_symbols(k_users: int, t_slots: int, powers, modulation: str = "gaussian",
                     rng: np.random.Generator = None) -> SymbolBlock:
    """Draw a block of zero-mean unit-power symbols scaled by per-user amplitudes.

    gaussian: circularly-symmetric complex normal (capacity-achieving default).
    qpsk: constant-modulus alphabet, exact per-symbol power.
    """
    if t_slots < 1:
        raise ValueError(f"block length must be >= 1, got {t_slots}")
    powers = np.broadcast_to(np.asarray(powers, dtype=float), (k_users,))
    if np.any(powers < 0):
        raise ValueError("transmit powers must be nonnegative")
    if rng is None:
        rng = np.random.default_rng()
    shape = (k_users, t_slots)
    if modulation == "gaussian":
        s = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    elif modulation == "qpsk":
        s = np.exp(1j * (np.pi / 4.0 + np.pi / 2.0 * rng.integers(0, 4, size=shape)))
    else:
        raise ValueError(f"unknown modulation {modulation!r}; choose from {MODULATIONS}")
    return SymbolBlock(s=np.sqrt(powers)[:, None] * s, powers=powers.copy())


def receive(channels: ChannelSet, phase: np.ndarray, block: SymbolBlock,
            rng: np.random.Generator = None, phase_only: bool = False) -> ReceivedBlock:
    """Propagate a symbol block through the RIS and add receiver noise.

    By default the amplitude-bearing near-field vectors carry the signal;
    phase_only=True substitutes the Fresnel phase-only response matrix instead
    (the compact block-matrix approximation).
    """
    if block.n_users != channels.n_users:
        raise ValueError(
            f"symbol block has {block.n_users} users, channels have {channels.n_users}"
        )
    mix = channels.A if phase_only else channels.g
    y = effective_channel(channels.H, phase, mix) @ block.s
    if channels.noise_power > 0:
        if rng is None:
            rng = np.random.default_rng()
        z = (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)) / np.sqrt(2.0)
        y = y + np.sqrt(channels.noise_power) * z
    return ReceivedBlock(y=y, noise_power=channels.noise_power)
