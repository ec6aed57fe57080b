"""MUSIC localization through the RIS as seen by the BS or the wiretapper.

Both parties observe the same BS snapshots; they differ only in the RIS phase
configuration assumed inside the scan steering vectors (the BS knows the true
one, the wiretapper guesses identity). Estimation is two-stage: a far-field
azimuth/elevation scan, then a per-user near-field distance scan at the
estimated angles.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geometry import RisGeometry, fresnel_response
from .signals import ReceivedBlock

# local maxima closer than this many grid cells to a stronger peak are suppressed
PEAK_MIN_SEPARATION = 3


@dataclass(frozen=True)
class ScanGrid:
    """Uniform search axes for the angle and distance scans."""

    azimuth: np.ndarray
    elevation: np.ndarray
    distance: np.ndarray

    def __post_init__(self):
        for name in ("azimuth", "elevation", "distance"):
            axis = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, axis)
            if axis.size < 2:
                raise ValueError(f"{name} axis needs at least 2 samples")
            if np.any(np.diff(axis) <= 0):
                raise ValueError(f"{name} axis must be strictly increasing")

    @classmethod
    def default(cls, azimuth_step_deg: float = 1.0, elevation_step_deg: float = 1.0,
                distance_min: float = 0.5, distance_max: float = 25.0,
                distance_step: float = 0.1,
                azimuth_range=(-np.pi / 2, np.pi / 2),
                elevation_range=(-np.pi / 2, np.pi / 2)) -> "ScanGrid":
        az_step = np.deg2rad(azimuth_step_deg)
        el_step = np.deg2rad(elevation_step_deg)
        az_n = int(round((azimuth_range[1] - azimuth_range[0]) / az_step)) + 1
        el_n = int(round((elevation_range[1] - elevation_range[0]) / el_step)) + 1
        d_n = int(round((distance_max - distance_min) / distance_step)) + 1
        return cls(
            azimuth=azimuth_range[0] + az_step * np.arange(az_n),
            elevation=elevation_range[0] + el_step * np.arange(el_n),
            distance=distance_min + distance_step * np.arange(d_n),
        )


@dataclass
class MusicSpectrum:
    """Scanned pseudospectrum: axis names, per-point values, extracted peaks.

    peaks is a list of (coordinates, value) with coordinates a tuple matching
    axes, strongest first, at most one entry per requested source.
    """

    axes: tuple
    axis_values: tuple
    values: np.ndarray
    peaks: list


@dataclass
class SensingReport:
    """Estimates aligned to ground truth with per-parameter squared errors."""

    estimates: np.ndarray          # (K, 3) rows (azimuth, elevation, distance)
    truth: np.ndarray              # (K, 3)
    association: tuple             # estimate row used for each truth row
    sq_errors: dict = field(default_factory=dict)
    padded: bool = False


def _as_snapshots(block) -> np.ndarray:
    y = block.y if isinstance(block, ReceivedBlock) else np.asarray(block)
    if y.ndim != 2:
        raise ValueError("snapshot matrix must be 2-D (antennas x snapshots)")
    return y


def sample_covariance(block) -> np.ndarray:
    """(1/T) Y Y^H from a received block or raw snapshot matrix."""
    y = _as_snapshots(block)
    return (y @ y.conj().T) / y.shape[1]


def noise_subspace(cov: np.ndarray, k_sources: int) -> np.ndarray:
    """Orthonormal basis of the M - K weakest eigenvectors of the covariance."""
    m = cov.shape[0]
    if k_sources >= m:
        raise ValueError(f"need more antennas than sources, got M={m}, K={k_sources}")
    _, vecs = np.linalg.eigh(cov)          # ascending eigenvalues
    return vecs[:, : m - k_sources]


def _signal_subspace(cov: np.ndarray, k_sources: int) -> np.ndarray:
    """The K strongest eigenvectors; orthogonal complement of noise_subspace."""
    m = cov.shape[0]
    if k_sources >= m:
        raise ValueError(f"need more antennas than sources, got M={m}, K={k_sources}")
    _, vecs = np.linalg.eigh(cov)
    return vecs[:, m - k_sources:]


def steering(r: float, azimuth: float, elevation: float, H: np.ndarray,
             phase_assumed: np.ndarray, geom: RisGeometry,
             mode: str = "nearfield") -> np.ndarray:
    """Unit-norm BS-side steering vector through an assumed RIS configuration.

    nearfield keeps the wavefront-curvature term of the Fresnel response;
    farfield drops it (the infinite-range limit), leaving r unused.
    """
    if mode not in ("nearfield", "farfield"):
        raise ValueError(f"mode must be 'nearfield' or 'farfield', got {mode!r}")
    a = fresnel_response(geom, r, azimuth, elevation,
                         include_curvature=(mode == "nearfield"))
    b = (H * phase_assumed) @ a
    return b / np.linalg.norm(b)


def _spectrum_from_responses(es: np.ndarray, H: np.ndarray, phase_assumed: np.ndarray,
                             flat: np.ndarray) -> np.ndarray:
    """1 / ||E_n^H b||^2 for unit-norm steered responses b = H diag(phase) a.

    Evaluated through the signal-subspace complement (||E_n^H b||^2 =
    ||b||^2 - ||E_s^H b||^2 for the orthonormal eigensplit), which is much
    cheaper than the M - K noise columns on wide scans.
    """
    b = (H * phase_assumed) @ flat
    total = np.sum(np.abs(b) ** 2, axis=0)
    captured = np.sum(np.abs(es.conj().T @ b) ** 2, axis=0)
    residual = np.maximum(1.0 - captured / total, 1e-18)
    return 1.0 / residual


def _scan(es: np.ndarray, H: np.ndarray, phase_assumed: np.ndarray,
          geom: RisGeometry, r, azimuth, elevation, curvature: bool) -> np.ndarray:
    """MUSIC spectrum over broadcast (r, azimuth, elevation) arrays."""
    a = fresnel_response(geom, r, azimuth, elevation, include_curvature=curvature)
    flat = a.reshape(a.shape[0], -1)
    values = _spectrum_from_responses(es, H, phase_assumed, flat)
    return values.reshape(a.shape[1:])


def _scan_angles(es: np.ndarray, H: np.ndarray, phase_assumed: np.ndarray,
                 geom: RisGeometry, azimuth: np.ndarray,
                 elevation: np.ndarray) -> np.ndarray:
    """Far-field azimuth x elevation scan, factored over the planar array axes."""
    h_idx, v_idx = geom.element_indices()
    two_pi = 2.0 * np.pi / geom.wavelength
    alpha = two_pi * geom.d_h * np.sin(azimuth)[:, None] * np.cos(elevation)[None, :]
    beta = two_pi * geom.d_v * np.sin(elevation)
    w = (H * phase_assumed).reshape(H.shape[0], geom.n_v, geom.n_h)
    ev = np.exp(1j * np.unique(v_idx)[:, None] * beta[None, :])
    part = np.einsum("mvh,ve->mhe", w, ev)
    eh = np.exp(1j * np.unique(h_idx)[:, None, None] * alpha[None, :, :])
    b = np.einsum("mhe,hae->mae", part, eh)
    flat = b.reshape(H.shape[0], -1)
    total = np.sum(np.abs(flat) ** 2, axis=0)
    captured = np.sum(np.abs(es.conj().T @ flat) ** 2, axis=0)
    residual = np.maximum(1.0 - captured / total, 1e-18)
    return (1.0 / residual).reshape(azimuth.size, elevation.size)


def _select_peaks(values: np.ndarray, k: int, min_sep: int = PEAK_MIN_SEPARATION) -> list:
    """Up to k local maxima, strongest first, separated by more than min_sep cells."""
    local = (values == ndimage.maximum_filter(values, size=3, mode="nearest"))
    coords = np.argwhere(local)
    order = np.argsort(values[local])[::-1]
    coords = coords[order]
    chosen = []
    for c in coords:
        if any(np.max(np.abs(c - prev)) <= min_sep for prev in chosen):
            continue
        chosen.append(c)
        if len(chosen) == k:
            break
    return [tuple(int(i) for i in c) for c in chosen]


def music_aoa_spectrum(block, k_sources: int, H: np.ndarray, phase_assumed: np.ndarray,
                       geom: RisGeometry, grid: ScanGrid) -> MusicSpectrum:
    """2-D MUSIC spectrum over azimuth x elevation with far-field steering."""
    es = _signal_subspace(sample_covariance(block), k_sources)
    values = _scan_angles(es, H, phase_assumed, geom, grid.azimuth, grid.elevation)
    cells = _select_peaks(values, k_sources)
    peaks = [((float(grid.azimuth[i]), float(grid.elevation[j])), float(values[i, j]))
             for i, j in cells]
    return MusicSpectrum(axes=("azimuth", "elevation"),
                         axis_values=(grid.azimuth, grid.elevation),
                         values=values, peaks=peaks)


def music_distance_spectrum(block, k_sources: int, H: np.ndarray, phase_assumed: np.ndarray,
                            angles: tuple, geom: RisGeometry, grid: ScanGrid) -> MusicSpectrum:
    """1-D MUSIC spectrum over distance at fixed angles, near-field steering."""
    en = noise_subspace(sample_covariance(block), k_sources)
    azimuth, elevation = angles
    values = _scan(en, H, phase_assumed, geom, grid.distance, azimuth, elevation,
                   curvature=True)
    i = int(np.argmax(values))
    peaks = [((float(grid.distance[i]),), float(values[i]))]
    return MusicSpectrum(axes=("distance",), axis_values=(grid.distance,),
                         values=values, peaks=peaks)


def locate_users(block, k_sources: int, H: np.ndarray, phase_assumed: np.ndarray,
                 geom: RisGeometry, grid: ScanGrid):
    """Two-stage estimate of (azimuth, elevation, distance) for every user.

    Missing angle peaks are padded with the grid center and flagged; padded
    estimates keep their (poor) distance fits so downstream scores stay honest.

    Returns (estimates, padded, aoa_spectrum, distance_spectra).
    """
    aoa = music_aoa_spectrum(block, k_sources, H, phase_assumed, geom, grid)
    angle_list = [coords for coords, _ in aoa.peaks]
    padded = len(angle_list) < k_sources
    center = (float(np.median(grid.azimuth)), float(np.median(grid.elevation)))
    while len(angle_list) < k_sources:
        angle_list.append(center)
    estimates = np.zeros((k_sources, 3))
    spectra = []
    for k, (az, el) in enumerate(angle_list):
        dist = music_distance_spectrum(block, k_sources, H, phase_assumed,
                                       (az, el), geom, grid)
        estimates[k] = (az, el, dist.peaks[0][0][0])
        spectra.append(dist)
    return estimates, padded, aoa, spectra


def wrap_angle(delta):
    """Wrap angular differences into the principal interval around zero."""
    return (np.asarray(delta) + np.pi) % (2.0 * np.pi) - np.pi


def associate_and_score(estimates: np.ndarray, truth: np.ndarray,
                        padded: bool = False) -> SensingReport:
    """Best bijection between estimates and ground truth, with squared errors.

    Minimizes the total squared error (wrapped radians for angles, meters for
    distance) over all permutations; user counts K <= 5 keep this exhaustive
    search cheap.
    """
    estimates = np.asarray(estimates, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimates.shape != truth.shape:
        raise ValueError("estimates and truth must have matching shapes")
    k = truth.shape[0]

    def cost(perm):
        d_az = wrap_angle(estimates[perm, 0] - truth[:, 0])
        d_el = wrap_angle(estimates[perm, 1] - truth[:, 1])
        d_r = estimates[perm, 2] - truth[:, 2]
        return np.sum(d_az**2) + np.sum(d_el**2) + np.sum(d_r**2)

    best = min(itertools.permutations(range(k)), key=cost)
    aligned = estimates[list(best)]
    sq_errors = {
        "azimuth": wrap_angle(aligned[:, 0] - truth[:, 0]) ** 2,
        "elevation": wrap_angle(aligned[:, 1] - truth[:, 1]) ** 2,
        "distance": (aligned[:, 2] - truth[:, 2]) ** 2,
    }
    return SensingReport(estimates=aligned, truth=truth, association=tuple(best),
                         sq_errors=sq_errors, padded=padded)


def nmse(reports) -> dict:
    """Per-parameter normalized MSE pooled over a collection of reports."""
    reports = list(reports)
    if not reports:
        raise ValueError("at least one sensing report required")
    out = {}
    columns = {"azimuth": 0, "elevation": 1, "distance": 2}
    for name, col in columns.items():
        num = sum(float(np.sum(r.sq_errors[name])) for r in reports)
        den = sum(float(np.sum(r.truth[:, col] ** 2)) for r in reports)
        out[name] = num / den
    return out
