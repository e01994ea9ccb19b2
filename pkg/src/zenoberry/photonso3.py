"""Rotation algebra on real 3-space, ideal-mirror reflections, and the
regular mirror-polygon polarization transport with its closed-form result.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .su2core import unit3

TWO_PI = 2.0 * math.pi

POLARIZATION_UNIT_TOL = 1e-12
TRANSVERSALITY_TOL = 1e-10


class UnphysicalIncidenceWarning(UserWarning):
    """The momentum does not point into the mirror face (k.n >= 0)."""


def cross_matrix(v) -> np.ndarray:
    """The matrix [v]_x with [v]_x w = v x w."""
    x, y, z = (float(c) for c in v)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotation_about(axis, angle: float) -> np.ndarray:
    """Right-handed rotation by ``angle`` about a unit axis, in Rodrigues form.

    Equals the matrix exponential of angle*[axis]_x.
    """
    a = unit3(axis)
    c, s = math.cos(angle), math.sin(angle)
    return c * np.eye(3) + s * cross_matrix(a) + (1.0 - c) * np.outer(a, a)


def mirror_operator(normal) -> np.ndarray:
    """Ideal-mirror polarization action: the half turn about the normal.

    2*n*n^T - I: symmetric, orthogonal, det +1, and its own inverse.
    """
    n = unit3(normal)
    return 2.0 * np.outer(n, n) - np.eye(3)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = a.copy()
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PhotonState:
    """Photon with unit momentum, unit transverse polarization (a complex
    Jones-like 3-vector), and a helicity parity flag that flips sign on
    every reflection."""

    momentum: np.ndarray
    polarization: np.ndarray
    helicity_parity: int = 1

    def __post_init__(self):
        k = unit3(self.momentum, tol=1e-12)
        p = np.asarray(self.polarization, dtype=complex)
        if p.shape != (3,):
            raise ValueError(f"polarization must be a 3-vector, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("polarization components must be finite")
        dev = abs(np.linalg.norm(p) - 1.0)
        if dev > POLARIZATION_UNIT_TOL:
            raise ValueError(f"polarization must be unit norm: | |p| - 1 | = {dev:.3e}")
        overlap = abs(np.dot(p, k))
        if overlap > TRANSVERSALITY_TOL:
            raise ValueError(f"polarization must be transverse to momentum: |p.k| = {overlap:.3e}")
        if self.helicity_parity not in (-1, 1):
            raise ValueError(f"helicity_parity must be +1 or -1, got {self.helicity_parity!r}")
        object.__setattr__(self, "momentum", _frozen(k))
        object.__setattr__(self, "polarization", _frozen(p))
        object.__setattr__(self, "helicity_parity", int(self.helicity_parity))


@dataclass(frozen=True)
class MirrorPolygon:
    """Regular N-sided mirror cylinder.

    The inward normals lie in the x-y plane: the l-th is (-1, 0, 0) rotated
    by l*alpha about z, with alpha = 2*pi/N. Build one with ``regular``.
    """

    sides: int
    normals: tuple[np.ndarray, ...]
    alpha: float

    def __post_init__(self):
        sides = int(self.sides)
        if sides != self.sides or sides < 3:
            raise ValueError(f"unsupported polygon: need an integer >= 3 sides, got {self.sides!r}")
        object.__setattr__(self, "sides", sides)
        if self.alpha != TWO_PI / sides:
            raise ValueError("alpha must equal 2*pi/sides")
        if len(self.normals) != sides:
            raise ValueError(f"expected {sides} normals, got {len(self.normals)}")
        frozen = []
        for ell, n in enumerate(self.normals):
            n = unit3(n, tol=1e-12)
            expected = (-math.cos(ell * self.alpha), -math.sin(ell * self.alpha), 0.0)
            if n[2] != 0.0 or abs(n[0] - expected[0]) > 1e-12 or abs(n[1] - expected[1]) > 1e-12:
                raise ValueError(f"normal {ell} does not match the regular-polygon pattern")
            frozen.append(_frozen(n))
        object.__setattr__(self, "normals", tuple(frozen))

    @classmethod
    def regular(cls, sides: int) -> "MirrorPolygon":
        alpha = TWO_PI / int(sides)
        normals = tuple(
            np.array([-math.cos(ell * alpha), -math.sin(ell * alpha), 0.0])
            for ell in range(int(sides))
        )
        return cls(sides=int(sides), normals=normals, alpha=alpha)


def reflect(photon: PhotonState, normal) -> PhotonState:
    """Bounce off one ideal mirror.

    momentum -> k - 2*(n.k)*n, polarization -> (2*n*n^T - I) p, helicity
    parity flipped. Warns (without failing) when the momentum does not
    point into the mirror face; the operator algebra applies regardless.
    """
    n = unit3(normal)
    if float(np.dot(photon.momentum, n)) >= 0.0:
        warnings.warn(
            "momentum does not point into the mirror face (k.n >= 0)",
            UnphysicalIncidenceWarning,
            stacklevel=2,
        )
    m = mirror_operator(n)
    return PhotonState(
        momentum=-(m @ photon.momentum),
        polarization=m @ photon.polarization,
        helicity_parity=-photon.helicity_parity,
    )


def trace_polygon(initial: PhotonState, polygon: MirrorPolygon) -> list[PhotonState]:
    """Reflect off every mirror in order; returns the initial state plus one
    state per mirror (N + 1 entries)."""
    states = [initial]
    for n in polygon.normals:
        states.append(reflect(states[-1], n))
    return states


def composite_half_turn_axis(polygon: MirrorPolygon) -> np.ndarray:
    """Axis of the net half turn contributed per mirror once the z-rotation
    between adjacent mirrors is folded in: (-cos(alpha/2), sin(alpha/2), 0)."""
    half = polygon.alpha / 2.0
    return np.array([-math.cos(half), math.sin(half), 0.0])


def closed_form_final(polygon: MirrorPolygon) -> np.ndarray:
    """Net polarization transport of the whole polygon without iterating.

    The ordered product of all N mirror operators collapses to the N-th
    power of a single half turn about ``composite_half_turn_axis``: the
    identity for even N, that half turn for odd N.
    """
    if polygon.sides % 2 == 0:
        return np.eye(3)
    return rotation_about(composite_half_turn_axis(polygon), math.pi)


def default_photon(theta0: float, pol_angle: float = 0.0) -> PhotonState:
    """Photon aimed at the first mirror with a linear polarization.

    Momentum is (sin(theta0), 0, cos(theta0)). The polarization is the unit
    vector along momentum x z, rotated by pol_angle within the transverse
    plane; it is real (linear) for every choice of the two angles.
    """
    k = np.array([math.sin(theta0), 0.0, math.cos(theta0)])
    towards_z = np.cross(k, [0.0, 0.0, 1.0])
    norm = float(np.linalg.norm(towards_z))
    if norm < 1e-12:
        raise ValueError("theta0 must not align the momentum with the z axis")
    e1 = towards_z / norm
    e2 = np.cross(k, e1)
    p = math.cos(pol_angle) * e1 + math.sin(pol_angle) * e2
    return PhotonState(momentum=k, polarization=p, helicity_parity=1)


def polarization_tip_loop(states, *, imag_tol: float = 1e-10) -> list[np.ndarray]:
    """Real polarization-vector tips of a traced state sequence.

    Only linear (real) polarization traces a well-defined tip loop on the
    unit sphere; circular or elliptical inputs are rejected.
    """
    tips = []
    for k, s in enumerate(states):
        worst = float(np.max(np.abs(s.polarization.imag)))
        if worst > imag_tol:
            raise ValueError(
                f"state {k} has non-real polarization (max |Im| = {worst:.3e}); "
                "tip loops are defined for linear polarization only"
            )
        tips.append(s.polarization.real.copy())
    return tips
