"""Channel synthesis: Rician RIS-to-BS matrix, near-field user links, effective channels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import RisGeometry, UeState, array_response, fresnel_response, fresnel_response_matrix


@dataclass(frozen=True)
class RicianParams:
    """Rician fading parameters of the RIS-to-BS link.

    kappa is the linear LOS-to-scatter power ratio. The BS is modeled as a
    half-wavelength ULA; the LOS component is the outer product of the BS
    response at los_azimuth and the RIS far-field response toward
    (los_azimuth, los_elevation).
    """

    bs_antennas: int
    kappa: float = 2.0
    los_azimuth: float = 0.0
    los_elevation: float = 0.0

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError(f"kappa must be nonnegative, got {self.kappa}")
        if self.bs_antennas < 1:
            raise ValueError(f"bs_antennas must be >= 1, got {self.bs_antennas}")


@dataclass
class ChannelSet:
    """One scene's channels.

    H:           (M, N) RIS-to-BS matrix.
    g:           (N, K) near-field user-to-RIS vectors (amplitude-bearing), columns per user.
    A:           (N, K) phase-only Fresnel response matrix, columns per user.
    noise_power: receiver noise variance (watts).
    powers:      (K,) per-user transmit powers (watts).
    """

    H: np.ndarray
    g: np.ndarray
    A: np.ndarray
    noise_power: float
    powers: np.ndarray = field(default=None)

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=complex)
        self.g = np.asarray(self.g, dtype=complex)
        self.A = np.asarray(self.A, dtype=complex)
        if self.g.ndim == 1:
            self.g = self.g[:, None]
        if self.A.ndim == 1:
            self.A = self.A[:, None]
        n = self.H.shape[1]
        if self.g.shape[0] != n or self.A.shape[0] != n:
            raise ValueError("H columns, g rows and A rows must all equal N")
        if self.g.shape[1] != self.A.shape[1]:
            raise ValueError("g and A must have one column per user")
        if self.noise_power < 0:
            raise ValueError("noise power must be nonnegative")
        if self.powers is None:
            self.powers = np.ones(self.n_users)
        self.powers = np.asarray(self.powers, dtype=float)
        if self.powers.shape != (self.n_users,):
            raise ValueError("powers must have one entry per user")

    @property
    def n_bs(self) -> int:
        return self.H.shape[0]

    @property
    def n_ris(self) -> int:
        return self.H.shape[1]

    @property
    def n_users(self) -> int:
        return self.g.shape[1]


def random_phase_vector(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform i.i.d. phases on the complex unit circle."""
    return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=n))


def identity_phase(n: int) -> np.ndarray:
    """The all-ones configuration (the wiretapper's default guess)."""
    return np.ones(n, dtype=complex)


def is_unit_modulus(phase: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.max(np.abs(np.abs(phase) - 1.0)) < tol)


def bs_ula_response(m: int, azimuth: float) -> np.ndarray:
    """Half-wavelength ULA response of the BS toward an azimuth angle."""
    return np.exp(1j * np.pi * np.arange(m) * np.sin(azimuth))


def sample_far_field_channel(params: RicianParams, geom: RisGeometry,
                             rng: np.random.Generator) -> np.ndarray:
    """Draw the (M, N) Rician RIS-to-BS matrix.

    Deterministic given the generator state; entries have unit average power
    for any kappa (LOS entries are unit modulus, scatter entries CN(0, 1)).
    """
    m, n = params.bs_antennas, geom.n_elements
    a_bs = bs_ula_response(m, params.los_azimuth)
    a_ris = fresnel_response(geom, np.inf, params.los_azimuth, params.los_elevation,
                             include_curvature=False)
    h_los = np.outer(a_bs, a_ris.conj())
    h_nlos = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / np.sqrt(2.0)
    k = params.kappa
    return np.sqrt(k / (1.0 + k)) * h_los + np.sqrt(1.0 / (1.0 + k)) * h_nlos


def near_field_channel(ue: UeState, geom: RisGeometry) -> np.ndarray:
    """(N,) user-to-RIS vector: spherical-wave amplitude times the exact response."""
    return (geom.wavelength / (4.0 * np.pi * ue.r)) * array_response(ue, geom)


def effective_channel(H: np.ndarray, phase: np.ndarray, A: np.ndarray) -> np.ndarray:
    """H * diag(phase) * A for any per-user response matrix A (columns per user)."""
    H = np.asarray(H)
    phase = np.asarray(phase)
    A = np.asarray(A)
    if H.shape[1] != phase.shape[0] or phase.shape[0] != A.shape[0]:
        raise ValueError(
            f"dimension mismatch: H is {H.shape}, phase has {phase.shape[0]} "
            f"entries, A is {A.shape}"
        )
    return (H * phase) @ A


def build_channel_set(ues: list[UeState], geom: RisGeometry, params: RicianParams,
                      noise_power: float, rng: np.random.Generator) -> ChannelSet:
    """Synthesize all channels of one scene."""
    H = sample_far_field_channel(params, geom, rng)
    g = np.stack([near_field_channel(ue, geom) for ue in ues], axis=1)
    A = fresnel_response_matrix(ues, geom)
    powers = np.array([ue.power for ue in ues])
    return ChannelSet(H=H, g=g, A=A, noise_power=noise_power, powers=powers)
