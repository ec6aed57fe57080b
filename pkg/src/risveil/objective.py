"""Joint secure-ISAC objective: per-user SINR, sum rate, occultation penalty, gradient.

The optimization variable is the length-N complex phase vector. Gradients use
the real-pair convention: entry n is dL/d(Re phi_n) + j*dL/d(Im phi_n), i.e.
twice the derivative with respect to the conjugate coordinate, so they agree
with central finite differences over the real embedding.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, effective_channel

LN2 = np.log(2.0)

# floor applied to the interference-plus-noise term when sigma_z^2 = 0 and
# there is no interferer, to keep the SINR quotient finite
NOISE_FLOOR = 1e-30


class DegenerateChannelError(ValueError):
    """Raised when a user's effective channel vanishes (no combiner exists)."""


@dataclass(frozen=True)
class ObjectiveConfig:
    """Trade-off weight, occultation threshold, and the wiretapper's phase guess.

    rho = 1 optimizes rate only; rho = 0 only drives the cross-projection of
    the legitimate and wiretapper effective channels below epsilon.
    wiretapper_phase defaults to the all-ones (identity) configuration.
    """

    rho: float = 0.5
    epsilon: float = 0.0
    wiretapper_phase: np.ndarray = None

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        if self.epsilon < 0.0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")

    def wiretap_phase(self, n: int) -> np.ndarray:
        if self.wiretapper_phase is None:
            return np.ones(n, dtype=complex)
        wp = np.asarray(self.wiretapper_phase, dtype=complex)
        if wp.shape != (n,):
            raise ValueError(f"wiretapper phase must have length {n}")
        return wp


@dataclass
class ObjectiveEval:
    """One full evaluation of the joint objective at a phase configuration."""

    sum_rate: float
    per_user_sinr: np.ndarray
    gamma: float
    joint_value: float
    gradient: np.ndarray = field(default=None)


def combiner(v: np.ndarray) -> np.ndarray:
    """Maximum-ratio combiner: the unit-norm copy of the effective channel."""
    norm = np.linalg.norm(v)
    if norm == 0.0:
        raise DegenerateChannelError("effective user channel is zero")
    return v / norm


def user_channels(channels: ChannelSet, phase: np.ndarray) -> np.ndarray:
    """(M, K) matrix of per-user effective channels through the RIS."""
    return effective_channel(channels.H, phase, channels.g)


def _sinr_terms(channels, phase, powers, combiners=None):
    """Signal and interference-plus-noise powers for every user.

    Returns (nu, delta, V, W): (K,) arrays of the SINR numerators/denominators
    plus the effective channels and the combiners used. When combiners is None
    the MRC combiner at the given phase is used.
    """
    V = user_channels(channels, phase)
    if combiners is None:
        norms = np.linalg.norm(V, axis=0)
        if np.any(norms == 0.0):
            raise DegenerateChannelError("effective user channel is zero")
        W = V / norms
    else:
        W = np.asarray(combiners, dtype=complex)
    powers = np.asarray(powers, dtype=float)
    cross = W.conj().T @ V                      # cross[k, j] = w_k^H v_j
    cross_pow = np.abs(cross) ** 2 * powers[None, :]
    nu = np.diag(cross_pow).copy()
    w_norm2 = np.sum(np.abs(W) ** 2, axis=0)
    noise = max(channels.noise_power, NOISE_FLOOR)
    delta = cross_pow.sum(axis=1) - nu + noise * w_norm2
    return nu, delta, V, W


def sinr(k: int, channels: ChannelSet, phase: np.ndarray, powers=None) -> float:
    """SINR of user k after maximum-ratio combining."""
    if powers is None:
        powers = channels.powers
    nu, delta, _, _ = _sinr_terms(channels, phase, powers)
    return float(nu[k] / delta[k])


def sum_rate(channels: ChannelSet, phase: np.ndarray, powers=None) -> float:
    """Total achievable rate, sum of log2(1 + SINR_k), in bits/s/Hz."""
    if powers is None:
        powers = channels.powers
    nu, delta, _, _ = _sinr_terms(channels, phase, powers)
    return float(np.sum(np.log2(1.0 + nu / delta)))


def wiretap_channel(channels: ChannelSet, cfg: ObjectiveConfig) -> np.ndarray:
    """Effective channel the wiretapper reconstructs from its phase guess."""
    return effective_channel(channels.H, cfg.wiretap_phase(channels.n_ris), channels.A)


def occultation_penalty(channels: ChannelSet, phase: np.ndarray,
                        cfg: ObjectiveConfig) -> float:
    """Hinge on the squared projection between legitimate and wiretap channels."""
    gb = effective_channel(channels.H, phase, channels.A)
    gw = wiretap_channel(channels, cfg)
    proj = np.sum(np.abs(gb.conj().T @ gw) ** 2)
    return float(max(proj - cfg.epsilon, 0.0))


def joint_objective(channels: ChannelSet, phase: np.ndarray, cfg: ObjectiveConfig,
                    combiners=None) -> float:
    """rho * sum-rate minus (1 - rho) * occultation penalty.

    Passing combiners evaluates the rate part with those fixed combining
    vectors instead of refreshing the MRC at this phase (used by the
    finite-difference gradient check).
    """
    nu, delta, _, _ = _sinr_terms(channels, phase, channels.powers, combiners)
    rate = np.sum(np.log2(1.0 + nu / delta))
    value = cfg.rho * rate
    if cfg.rho < 1.0:
        value = value - (1.0 - cfg.rho) * occultation_penalty(channels, phase, cfg)
    return float(value)


def gradient(channels: ChannelSet, phase: np.ndarray, cfg: ObjectiveConfig) -> np.ndarray:
    """Closed-form ambient gradient of the joint objective.

    Combiners are the MRC vectors at the given phase and are held fixed during
    differentiation; the rate part follows the quotient rule on nu_k/delta_k,
    the penalty part is the diagonal of the chained effective-channel product.
    """
    return evaluate(channels, phase, cfg).gradient


def evaluate(channels: ChannelSet, phase: np.ndarray, cfg: ObjectiveConfig) -> ObjectiveEval:
    """Objective value, per-user SINRs, penalty, and gradient in one pass."""
    phase = np.asarray(phase, dtype=complex)
    H, g, A = channels.H, channels.g, channels.A
    powers = channels.powers
    k_users = channels.n_users

    nu, delta, V, W = _sinr_terms(channels, phase, powers)
    sinr_vals = nu / delta
    rate = float(np.sum(np.log2(1.0 + sinr_vals)))

    # rate gradient: quotient rule per user with fixed combiners
    hv = H.conj().T @ V                          # h^H v_j, reused per user pair
    hw = H.conj().T @ W                          # h^H w_k
    cross = W.conj().T @ V
    grad_rate = np.zeros(channels.n_ris, dtype=complex)
    for k in range(k_users):
        grad_nu = 2.0 * powers[k] * g[:, k].conj() * hv[:, k]
        grad_delta = np.zeros_like(grad_nu)
        for j in range(k_users):
            if j == k:
                continue
            grad_delta += 2.0 * powers[j] * cross[k, j] * (g[:, j].conj() * hw[:, k])
        grad_sinr = (delta[k] * grad_nu - nu[k] * grad_delta) / delta[k] ** 2
        grad_rate += grad_sinr / ((1.0 + sinr_vals[k]) * LN2)

    # penalty and its gradient: hinge on ||G_B^H G_W||_F^2
    gb = effective_channel(H, phase, A)
    gw = wiretap_channel(channels, cfg)
    proj = float(np.sum(np.abs(gb.conj().T @ gw) ** 2))
    gamma = max(proj - cfg.epsilon, 0.0)
    if proj > cfg.epsilon:
        u = H.conj().T @ gw                      # (N, K)
        inner = (u.conj().T * phase[None, :]) @ A
        grad_gamma = 2.0 * np.sum((u @ inner) * A.conj(), axis=1)
    else:
        grad_gamma = np.zeros(channels.n_ris, dtype=complex)

    grad = cfg.rho * grad_rate - (1.0 - cfg.rho) * grad_gamma
    joint = cfg.rho * rate - (1.0 - cfg.rho) * gamma
    return ObjectiveEval(
        sum_rate=rate,
        per_user_sinr=sinr_vals,
        gamma=float(gamma),
        joint_value=float(joint),
        gradient=grad,
    )
