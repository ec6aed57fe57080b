"""Conjugate-gradient ascent on the product manifold of N complex unit circles.

Points are unit-modulus complex vectors; the metric is the real part of the
Hermitian inner product. Steps retract by element-wise renormalization, and
tangent vectors move between points by re-projection at the destination.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet, random_phase_vector
from .objective import ObjectiveConfig, joint_objective, evaluate


class RetractionError(ValueError):
    """A step landed on the puncture |x_n + alpha*xi_n| = 0 of the retraction."""


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 500
    grad_tol: float = 1e-6
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    armijo_init_step: float = 1.0
    armijo_max_backtracks: int = 50
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.armijo_c < 1.0:
            raise ValueError(f"armijo_c must lie in (0, 1), got {self.armijo_c}")
        if not 0.0 < self.armijo_shrink < 1.0:
            raise ValueError(f"armijo_shrink must lie in (0, 1), got {self.armijo_shrink}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")


@dataclass
class OptimizerTrace:
    """Per-iteration history of one optimization run.

    Row 0 describes the initialization (zero step). manifold_err and
    tangency_err track the worst unit-modulus deviation of the iterate and the
    worst radial component of the executed search direction.
    """

    objective: list = field(default_factory=list)
    grad_norm: list = field(default_factory=list)
    step: list = field(default_factory=list)
    beta: list = field(default_factory=list)
    restart: list = field(default_factory=list)
    manifold_err: list = field(default_factory=list)
    tangency_err: list = field(default_factory=list)
    converged: bool = False
    stalled: bool = False

    @property
    def n_iters(self) -> int:
        return len(self.objective) - 1

    def append(self, objective, grad_norm, step, beta, restart, manifold_err, tangency_err):
        self.objective.append(float(objective))
        self.grad_norm.append(float(grad_norm))
        self.step.append(float(step))
        self.beta.append(float(beta))
        self.restart.append(bool(restart))
        self.manifold_err.append(float(manifold_err))
        self.tangency_err.append(float(tangency_err))

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "objective", "grad_norm", "step", "beta", "restart"])
            for i in range(len(self.objective)):
                writer.writerow([i, repr(self.objective[i]), repr(self.grad_norm[i]),
                                 repr(self.step[i]), repr(self.beta[i]),
                                 int(self.restart[i])])


def inner(a: np.ndarray, b: np.ndarray) -> float:
    """Riemannian metric: real part of the Hermitian inner product."""
    return float(np.real(np.vdot(a, b)))


def retract(x: np.ndarray, xi: np.ndarray, alpha: float) -> np.ndarray:
    """Move along xi and renormalize each entry back onto its unit circle."""
    moved = x + alpha * xi
    mags = np.abs(moved)
    if np.any(mags == 0.0):
        raise RetractionError("retraction undefined: an entry moved exactly to zero")
    return moved / mags


def project_tangent(grad: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Remove the per-entry radial component of an ambient vector at x."""
    return grad - np.real(grad * x.conj()) * x


def armijo_search(x, direction, current_value, directional_derivative,
                  cfg: OptimizerConfig, objective) -> tuple[float, bool]:
    """Backtracking line search for sufficient increase along a tangent direction.

    Returns (alpha, stalled): the largest alpha = init * shrink^m satisfying
    f(retract(x, direction, alpha)) >= f(x) + c * alpha * <grad, direction>,
    or (0.0, True) when no trial within the backtracking cap qualifies.
    """
    if directional_derivative <= 0.0 or not np.any(direction):
        return 0.0, True
    alpha = cfg.armijo_init_step
    for _ in range(cfg.armijo_max_backtracks + 1):
        try:
            candidate = retract(x, direction, alpha)
        except RetractionError:
            alpha *= cfg.armijo_shrink
            continue
        if objective(candidate) >= current_value + cfg.armijo_c * alpha * directional_derivative:
            return alpha, False
        alpha *= cfg.armijo_shrink
    return 0.0, True


def polak_ribiere_beta(r_prev_transported, r_next, r_prev, xi_prev) -> float:
    """Clamped momentum coefficient from consecutive (transported) gradients."""
    denom = inner(r_prev, xi_prev)
    if denom == 0.0:
        return 0.0
    return max(0.0, inner(r_prev - r_prev_transported, r_next) / denom)


def optimize(channels: ChannelSet, objective_cfg: ObjectiveConfig,
             optimizer_cfg: OptimizerConfig = None) -> tuple[np.ndarray, OptimizerTrace]:
    """Run the full conjugate-gradient ascent from a random phase configuration.

    Terminates when the projected-gradient norm drops below grad_tol, the line
    search stalls, or max_iters is reached. Returns the final phase vector and
    the iteration trace.
    """
    if optimizer_cfg is None:
        optimizer_cfg = OptimizerConfig()
    rng = np.random.default_rng(optimizer_cfg.seed)
    x = random_phase_vector(channels.n_ris, rng)

    def objective(y):
        return joint_objective(channels, y, objective_cfg)

    ev = evaluate(channels, x, objective_cfg)
    value = ev.joint_value
    r = project_tangent(ev.gradient, x)
    xi = r

    trace = OptimizerTrace()
    trace.append(value, np.linalg.norm(r), 0.0, 0.0, False,
                 np.max(np.abs(np.abs(x) - 1.0)), 0.0)

    for _ in range(optimizer_cfg.max_iters):
        if np.linalg.norm(r) < optimizer_cfg.grad_tol:
            trace.converged = True
            break
        restarted = False
        if inner(r, xi) <= 0.0:
            xi = r
            restarted = True
        slope = inner(r, xi)
        alpha, stalled = armijo_search(x, xi, value, slope, optimizer_cfg, objective)
        if stalled:
            trace.stalled = True
            break
        tangency = float(np.max(np.abs(np.real(xi * x.conj()))))
        x_new = retract(x, xi, alpha)
        ev = evaluate(channels, x_new, objective_cfg)
        r_new = project_tangent(ev.gradient, x_new)
        r_transported = project_tangent(r, x_new)
        beta = polak_ribiere_beta(r_transported, r_new, r, xi)
        xi = r_new + beta * project_tangent(xi, x_new)
        x, value, r = x_new, ev.joint_value, r_new
        trace.append(value, np.linalg.norm(r), alpha, beta, restarted,
                     np.max(np.abs(np.abs(x) - 1.0)), tangency)

    return x, trace
