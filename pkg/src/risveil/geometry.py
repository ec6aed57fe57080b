"""RIS geometry: element indexing, user placement, distances, array responses.

The RIS is a planar array in the YZ-plane with its central element at the
origin. Horizontal/vertical element counts are odd so signed indices run
(-(n-1)/2 .. (n-1)/2) with (0, 0) at the geometric center. Linear element
order is left-to-right within a row, rows bottom-to-top.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RisGeometry:
    """Planar RIS layout: odd element counts, spacings and wavelength in meters."""

    n_h: int
    n_v: int
    d_h: float
    d_v: float
    wavelength: float

    def __post_init__(self):
        if self.n_h <= 0 or self.n_h % 2 == 0:
            raise ValueError(f"n_h must be odd and positive, got {self.n_h}")
        if self.n_v <= 0 or self.n_v % 2 == 0:
            raise ValueError(f"n_v must be odd and positive, got {self.n_v}")
        if self.d_h <= 0 or self.d_v <= 0:
            raise ValueError("element spacings must be positive")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")

    @property
    def n_elements(self) -> int:
        return self.n_h * self.n_v

    @property
    def aperture(self) -> float:
        """Diagonal extent of the array in meters."""
        return float(np.hypot((self.n_h - 1) * self.d_h, (self.n_v - 1) * self.d_v))

    def element_indices(self) -> tuple[np.ndarray, np.ndarray]:
        """Signed (horizontal, vertical) indices of every element in linear order."""
        half_h = (self.n_h - 1) // 2
        half_v = (self.n_v - 1) // 2
        h_idx = np.tile(np.arange(-half_h, half_h + 1), self.n_v)
        v_idx = np.repeat(np.arange(-half_v, half_v + 1), self.n_h)
        return h_idx, v_idx

    def element_positions(self) -> np.ndarray:
        """(N, 3) element coordinates; the array occupies the x = 0 plane."""
        h_idx, v_idx = self.element_indices()
        pos = np.zeros((self.n_elements, 3))
        pos[:, 1] = h_idx * self.d_h
        pos[:, 2] = v_idx * self.d_v
        return pos

    def linear_index(self, n_h_idx: int, n_v_idx: int) -> int:
        """Flatten a signed index pair into the linear element index."""
        self._check_indices(n_h_idx, n_v_idx)
        return (n_v_idx + (self.n_v - 1) // 2) * self.n_h + (n_h_idx + (self.n_h - 1) // 2)

    def signed_indices(self, n: int) -> tuple[int, int]:
        """Inverse of linear_index."""
        if not 0 <= n < self.n_elements:
            raise IndexError(f"linear index {n} out of range [0, {self.n_elements})")
        n_v_idx, n_h_idx = divmod(n, self.n_h)
        return n_h_idx - (self.n_h - 1) // 2, n_v_idx - (self.n_v - 1) // 2

    def _check_indices(self, n_h_idx, n_v_idx):
        half_h = (self.n_h - 1) // 2
        half_v = (self.n_v - 1) // 2
        if np.any(np.abs(n_h_idx) > half_h) or np.any(np.abs(n_v_idx) > half_v):
            raise IndexError(
                f"element index ({n_h_idx}, {n_v_idx}) outside "
                f"[-{half_h}, {half_h}] x [-{half_v}, {half_v}]"
            )


@dataclass(frozen=True)
class UeState:
    """Polar position of one user relative to the RIS center, plus transmit power.

    Angles are radians: azimuth in the horizontal (xy) plane, elevation from it.
    """

    r: float
    azimuth: float
    elevation: float
    power: float = 1.0

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError(f"range must be positive, got {self.r}")
        if self.power <= 0:
            raise ValueError(f"transmit power must be positive, got {self.power}")


def ue_position(ue: UeState) -> np.ndarray:
    """Cartesian (x, y, z) of a user; the RIS center is the origin."""
    ce = np.cos(ue.elevation)
    return ue.r * np.array(
        [np.cos(ue.azimuth) * ce, np.sin(ue.azimuth) * ce, np.sin(ue.elevation)]
    )


def element_distance_exact(ue: UeState, n_h_idx, n_v_idx, geom: RisGeometry):
    """Euclidean distance from the (n_h, n_v)-th element to the user.

    Index arguments may be scalars or equal-shape integer arrays.
    """
    geom._check_indices(n_h_idx, n_v_idx)
    x, y, z = ue_position(ue)
    return np.sqrt(x**2 + (y - np.asarray(n_h_idx) * geom.d_h) ** 2
                   + (z - np.asarray(n_v_idx) * geom.d_v) ** 2)


def element_distance_fresnel(ue: UeState, n_h_idx, n_v_idx, geom: RisGeometry):
    """Second-order (Fresnel) expansion of the element distance in the array offsets."""
    nh = np.asarray(n_h_idx, dtype=float)
    nv = np.asarray(n_v_idx, dtype=float)
    linear = (nh * geom.d_h * np.sin(ue.azimuth) * np.cos(ue.elevation)
              + nv * geom.d_v * np.sin(ue.elevation))
    quad = (nh**2 * geom.d_h**2 + nv**2 * geom.d_v**2) / (2.0 * ue.r)
    return ue.r - linear + quad


def array_response(ue: UeState, geom: RisGeometry) -> np.ndarray:
    """Unit-modulus RIS response using exact element distances.

    Entry n is exp(j*(2*pi/lambda)*(r - r_n)) with r_n the exact distance, so
    the central element is the phase reference (entry 1 + 0j).
    """
    h_idx, v_idx = geom.element_indices()
    dist = element_distance_exact(ue, h_idx, v_idx, geom)
    return np.exp(1j * (2.0 * np.pi / geom.wavelength) * (ue.r - dist))


def fresnel_coefficients(geom: RisGeometry, r, azimuth, elevation):
    """Per-user phase coefficients of the Fresnel response.

    Returns (alpha, beta, gamma): linear horizontal/vertical phase slopes and
    the wavefront-curvature coefficient pi/(lambda*r). Inputs broadcast.
    """
    two_pi = 2.0 * np.pi / geom.wavelength
    alpha = two_pi * geom.d_h * np.sin(azimuth) * np.cos(elevation)
    beta = two_pi * geom.d_v * np.sin(elevation)
    gamma = np.pi / (geom.wavelength * np.asarray(r, dtype=float))
    return alpha, beta, gamma


def fresnel_response(geom: RisGeometry, r, azimuth, elevation,
                     include_curvature: bool = True) -> np.ndarray:
    """RIS response under the Fresnel distance approximation.

    Entry n is exp(j*(n_h*alpha + n_v*beta - (n_h^2 d_h^2 + n_v^2 d_v^2)*gamma)),
    i.e. the exact response with the Fresnel distance substituted. Dropping the
    curvature term (include_curvature=False) gives the far-field planar response.

    Scalar (r, azimuth, elevation) give an (N,) vector; broadcastable arrays of
    shape S give (N,) + S.
    """
    alpha, beta, gamma = fresnel_coefficients(geom, r, azimuth, elevation)
    alpha, beta, gamma = np.broadcast_arrays(alpha, beta, gamma)
    h_idx, v_idx = geom.element_indices()
    extra = (1,) * alpha.ndim
    nh = h_idx.reshape(h_idx.shape + extra)
    nv = v_idx.reshape(v_idx.shape + extra)
    phase = nh * alpha + nv * beta
    if include_curvature:
        phase = phase - (nh**2 * geom.d_h**2 + nv**2 * geom.d_v**2) * gamma
    return np.exp(1j * phase)


def fresnel_response_matrix(ues: list[UeState], geom: RisGeometry) -> np.ndarray:
    """(N, K) matrix whose k-th column is the Fresnel response toward user k."""
    if len(ues) < 1:
        raise ValueError("at least one user required")
    r = np.array([ue.r for ue in ues])
    az = np.array([ue.azimuth for ue in ues])
    el = np.array([ue.elevation for ue in ues])
    return fresnel_response(geom, r, az, el)
