"""Dense complex 2x2 spin-1/2 algebra: Pauli operators, SU(2) rotations,
ray projections, and the Bloch-sphere map.

Angle convention used throughout the package: ``rotation_operator(n, theta)``
is exp(-i*theta*sigma.n), so the Bloch vector turns by 2*theta about n (there
is no half angle in the exponent).
"""

from __future__ import annotations

import numpy as np

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY2 = np.eye(2, dtype=complex)

SPIN_UP = np.array([1.0, 0.0], dtype=complex)
SPIN_DOWN = np.array([0.0, 1.0], dtype=complex)

for _m in (PAULI_X, PAULI_Y, PAULI_Z, IDENTITY2, SPIN_UP, SPIN_DOWN):
    _m.flags.writeable = False

AXIS_UNIT_TOL = 1e-9
PURE_STATE_TOL = 1e-12
DEGENERATE_NORM = 1e-9


def as_spinor(values) -> np.ndarray:
    """Coerce to a complex two-component array with finite entries."""
    s = np.asarray(values, dtype=complex)
    if s.shape != (2,):
        raise ValueError(f"spinor must have two components, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError("spinor components must be finite")
    return s


def pure_state(c0, c1) -> np.ndarray:
    """Build a spinor whose norm is 1 within 1e-12; reject anything else."""
    s = as_spinor([c0, c1])
    dev = abs(np.linalg.norm(s) - 1.0)
    if dev > PURE_STATE_TOL:
        raise ValueError(f"pure state must be normalized: | |s| - 1 | = {dev:.3e}")
    return s


def unit3(v, *, tol: float = AXIS_UNIT_TOL) -> np.ndarray:
    """Coerce to a real 3-vector and require unit length within tol."""
    a = np.asarray(v, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("vector components must be finite")
    dev = abs(np.linalg.norm(a) - 1.0)
    if dev > tol:
        raise ValueError(f"expected a unit vector: | |v| - 1 | = {dev:.3e} > {tol:.0e}")
    return a


def sigma_dot(n) -> np.ndarray:
    """sigma . n for a unit axis n."""
    n = unit3(n)
    return n[0] * PAULI_X + n[1] * PAULI_Y + n[2] * PAULI_Z


def rotation_operator(n, theta: float) -> np.ndarray:
    """exp(-i*theta*sigma.n) = cos(theta)*I - i*sin(theta)*(sigma.n).

    Special-unitary for any real theta and unit n.
    """
    return np.cos(theta) * IDENTITY2 - 1j * np.sin(theta) * sigma_dot(n)


def project_onto(target, s) -> np.ndarray:
    """Project s onto the ray of a normalized target: target * <target|s>.

    The output norm is |<target|s>| * norm(s), so projection chains can only
    shrink a state.
    """
    target = as_spinor(target)
    dev = abs(np.linalg.norm(target) - 1.0)
    if dev > PURE_STATE_TOL:
        raise ValueError(f"projection target must be normalized: | |t| - 1 | = {dev:.3e}")
    return target * np.vdot(target, as_spinor(s))


def bloch_vector(s) -> np.ndarray:
    """Bloch direction <s|sigma|s> / <s|s>, unit-length for any pure state.

    Accepts unnormalized (but nonzero) spinors so it can be applied to the
    shrinking states along a projection chain.
    """
    s = as_spinor(s)
    c0, c1 = complex(s[0]), complex(s[1])
    n2 = c0.real**2 + c0.imag**2 + c1.real**2 + c1.imag**2
    if n2 < DEGENERATE_NORM**2:
        raise ValueError("degenerate state: norm below 1e-9, Bloch direction undefined")
    cross = c0.conjugate() * c1
    return np.array(
        [
            2.0 * cross.real,
            2.0 * cross.imag,
            abs(c0) ** 2 - abs(c1) ** 2,
        ]
    ) / n2
