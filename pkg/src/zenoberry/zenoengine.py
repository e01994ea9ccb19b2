"""Measurement-driven spin evolution.

Builds the rotating family of projection targets, evolves an initial
spin-up state through it by repeated projective measurements (with or
without a Hamiltonian acting in between), and exposes the matching closed
forms: the finite-step survival amplitude and phase, cone and polygon solid
angles, and the overlap-product (Pancharatnam) phase of a discrete loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .su2core import SPIN_UP, as_spinor, bloch_vector, rotation_operator, unit3

TWO_PI = 2.0 * math.pi
FOUR_PI = 4.0 * math.pi

# Below this overlap magnitude a projection is treated as annihilating the
# state rather than letting the chain silently denormalize.
OVERLAP_KILL = 1e-300

# Angular separation of usable polygon vertices: (MIN_SEPARATION, pi - MIN_SEPARATION).
MIN_SEPARATION = 1e-9


class EvolutionKilledError(RuntimeError):
    """A projection annihilated the evolving state."""

    def __init__(self, step: int, magnitude: float):
        super().__init__(
            f"projection at step {step} annihilated the state "
            f"(overlap magnitude {magnitude:.3e})"
        )
        self.step = step
        self.magnitude = magnitude


class DegeneratePolygonError(ValueError):
    """Consecutive polygon vertices are equal or antipodal."""


class UndefinedConnectionError(ValueError):
    """Consecutive states are orthogonal, so their relative phase is undefined."""


@dataclass(frozen=True)
class MeasurementPlan:
    """Projection schedule: target axis, total turning angle, step count.

    The k-th measurement projects onto exp(-i*(total_angle*k/steps)*sigma.axis)
    applied to spin-up. ``steps = 0`` means "no measurements at all" and is
    meaningful only for Hamiltonian runs.
    """

    axis: tuple[float, float, float]
    total_angle: float
    steps: int

    def __post_init__(self):
        ax = unit3(self.axis, tol=1e-12)
        object.__setattr__(self, "axis", (float(ax[0]), float(ax[1]), float(ax[2])))
        steps = int(self.steps)
        if steps != self.steps or steps < 0:
            raise ValueError(f"steps must be an integer >= 0, got {self.steps!r}")
        object.__setattr__(self, "steps", steps)
        angle = float(self.total_angle)
        if not math.isfinite(angle):
            raise ValueError("total_angle must be finite")
        object.__setattr__(self, "total_angle", angle)


@dataclass(frozen=True)
class HamiltonianSpec:
    """Static two-level Hamiltonian mu * sigma.axis acting for total_time."""

    mu: float
    axis: tuple[float, float, float]
    total_time: float

    def __post_init__(self):
        ax = unit3(self.axis, tol=1e-12)
        object.__setattr__(self, "axis", (float(ax[0]), float(ax[1]), float(ax[2])))
        mu = float(self.mu)
        if not math.isfinite(mu):
            raise ValueError("mu must be finite")
        object.__setattr__(self, "mu", mu)
        t = float(self.total_time)
        if not (math.isfinite(t) and t >= 0.0):
            raise ValueError("total_time must be finite and >= 0")
        object.__setattr__(self, "total_time", t)


class TrajectoryPoint(NamedTuple):
    time: float
    state: np.ndarray  # normalized post-projection spinor
    bloch: np.ndarray


@dataclass(frozen=True)
class ZenoRunResult:
    """Outcome of a projection-chain run.

    ``final_state`` is unnormalized; its squared norm is the survival
    probability. ``total_phase`` is the principal argument of the overlap
    with the initial state, in (-pi, pi]. ``geometric_phase`` is
    (total - dynamical) reduced to [0, 2*pi). The trajectory holds the
    initial state plus one normalized post-projection state per measurement.
    """

    final_state: np.ndarray
    survival_probability: float
    total_phase: float
    dynamical_phase: float
    geometric_phase: float
    trajectory: tuple[TrajectoryPoint, ...]


def family(plan: MeasurementPlan) -> list[np.ndarray]:
    """Projection targets phi_k = exp(-i*(a*k/N)*sigma.n) |up>, k = 0..N.

    Each phi_k is the first column of rotation_operator(n, a*k/N); the
    column is written out directly so large families stay cheap.
    """
    if plan.steps < 1:
        raise ValueError("a measurement family needs at least one step")
    nx, ny, nz = plan.axis
    thetas = plan.total_angle * np.arange(plan.steps + 1) / plan.steps
    upper = np.cos(thetas) - 1j * nz * np.sin(thetas)
    lower = (ny - 1j * nx) * np.sin(thetas)
    return [np.array([u, l]) for u, l in zip(upper, lower)]


def _projected_run(plan: MeasurementPlan, mu: float, b_axis, total_time: float) -> ZenoRunResult:
    """Shared chain: optional Hamiltonian step, then projection, N times.

    The dynamical phase is the left-endpoint sum -sum_k <psi_k|H|psi_k>*dT
    over the normalized post-projection states psi_k (psi_0 is the initial
    state), which matches the O(1/N) discretization error of the projection
    schedule itself.
    """
    targets = family(plan)
    dt = total_time / plan.steps
    u_step = None if mu == 0.0 else rotation_operator(b_axis, mu * dt)

    psi = targets[0].copy()
    trajectory = [TrajectoryPoint(0.0, targets[0], bloch_vector(targets[0]))]
    dyn = 0.0
    for k in range(1, plan.steps + 1):
        if u_step is not None:
            dyn -= mu * float(np.dot(b_axis, trajectory[-1].bloch)) * dt
            psi = u_step @ psi
        amp = np.vdot(targets[k], psi)
        mag = abs(amp)
        if mag < OVERLAP_KILL:
            raise EvolutionKilledError(k, mag)
        psi = targets[k] * amp
        # the normalized post-projection state is the target times the running
        # phase; dividing psi by its norm would underflow long before the kill
        # threshold does
        normalized = targets[k] * (amp / mag)
        trajectory.append(TrajectoryPoint(k * dt, normalized, bloch_vector(normalized)))

    total = float(np.angle(np.vdot(targets[0], psi)))
    geometric = (total - dyn) % TWO_PI
    return ZenoRunResult(
        final_state=psi,
        survival_probability=float(np.vdot(psi, psi).real),
        total_phase=total,
        dynamical_phase=dyn,
        geometric_phase=geometric,
        trajectory=tuple(trajectory),
    )


def run_free(plan: MeasurementPlan) -> ZenoRunResult:
    """Drag the spin-up state through the family by projections alone.

    The final state is phi_N times the product of the N successive
    overlaps, each equal to cos(a/N)*(1 + i*n_z*tan(a/N)), so the survival
    probability is (cos^2(a/N) + n_z^2*sin^2(a/N))^N. The dynamical phase
    is exactly zero. Trajectory times are fractions k/N of a unit interval;
    with no Hamiltonian the schedule has no physical time scale.
    """
    return _projected_run(plan, 0.0, None, 1.0)


def run_hamiltonian(plan: MeasurementPlan, h: HamiltonianSpec) -> ZenoRunResult:
    """Alternate exp(-i*mu*dT*sigma.b) evolution with projections onto phi_k.

    Projections happen at T_k = k*dT with dT = total_time/steps. A plan
    with ``steps = 0`` runs the undisturbed evolution
    exp(-i*mu*T*sigma.b) |up> with no projections at all.
    """
    b = np.asarray(h.axis)
    if plan.steps == 0:
        psi0 = SPIN_UP.copy()
        final = rotation_operator(b, h.mu * h.total_time) @ psi0
        # <H> is conserved along the undisturbed evolution, so the single
        # left-endpoint term is already the exact integral.
        dyn = -h.mu * float(b[2]) * h.total_time
        total = float(np.angle(final[0]))
        return ZenoRunResult(
            final_state=final,
            survival_probability=float(np.vdot(final, final).real),
            total_phase=total,
            dynamical_phase=dyn,
            geometric_phase=(total - dyn) % TWO_PI,
            trajectory=(TrajectoryPoint(0.0, psi0, bloch_vector(psi0)),),
        )
    return _projected_run(plan, h.mu, b, h.total_time)


def continuum_state(plan: MeasurementPlan) -> np.ndarray:
    """Exact infinite-measurement limit: exp(i*a*n_z) exp(-i*a*sigma.n) |up>."""
    n = np.asarray(plan.axis)
    phase = np.exp(1j * plan.total_angle * n[2])
    return phase * (rotation_operator(n, plan.total_angle) @ SPIN_UP)


def _check_cos_theta(cos_theta: float) -> float:
    c = float(cos_theta)
    if not (math.isfinite(c) and -1.0 <= c <= 1.0):
        raise ValueError(f"cos_theta must lie in [-1, 1], got {cos_theta!r}")
    return c


def _check_steps(steps: int) -> int:
    n = int(steps)
    if n != steps or n < 3:
        raise ValueError(f"unsupported step count {steps!r}: closed forms need an integer >= 3")
    return n


def closed_form_finite_n(cos_theta: float, steps: int) -> tuple[float, float]:
    """Survival amplitude rho and phase beta of the half-turn chain at finite N.

    rho  = (cos^2(pi/N) + cos_theta^2 * sin^2(pi/N))^(N/2)
    beta = pi - N*arctan(cos_theta * tan(pi/N))

    so that run_free with total_angle = pi ends in rho * exp(-i*beta) |up>.
    N = 2 sits on the tangent pole and is excluded; the projection chain
    itself stays total there.
    """
    c = _check_cos_theta(cos_theta)
    n = _check_steps(steps)
    cos_n, sin_n = math.cos(math.pi / n), math.sin(math.pi / n)
    rho = (cos_n * cos_n + c * c * sin_n * sin_n) ** (n / 2.0)
    beta = math.pi - n * math.atan(c * math.tan(math.pi / n))
    return rho, beta


def solid_angle_cone(cos_theta: float) -> float:
    """Solid angle of the circular cone of half-opening Theta: 2*pi*(1 - cos_theta)."""
    return TWO_PI * (1.0 - _check_cos_theta(cos_theta))


def solid_angle_polygon_formula(cos_theta: float, steps: int) -> float:
    """Solid angle of the regular N-gon inscribed in that cone's circle.

    2*pi - 2*N*arctan(cos_theta * tan(pi/N)); equals twice the beta of
    ``closed_form_finite_n``.
    """
    c = _check_cos_theta(cos_theta)
    n = _check_steps(steps)
    return TWO_PI - 2.0 * n * math.atan(c * math.tan(math.pi / n))


def _row_dots(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", a, b)


def _unit_tangents(at: np.ndarray, towards: np.ndarray) -> np.ndarray:
    t = towards - _row_dots(at, towards)[:, None] * at
    return t / np.linalg.norm(t, axis=1)[:, None]


def solid_angle_spherical_polygon(vertices) -> float:
    """Signed solid angle of a closed geodesic polygon on the unit sphere.

    Sums the signed turning angle at every vertex and applies the spherical
    Gauss-Bonnet identity (enclosed area = 2*pi - total turning), then
    reduces to (-2*pi, 2*pi]. The value is positive when the traversal runs
    counterclockwise around the enclosed region as seen from outside the
    sphere, and reversing the vertex order flips the sign. Solid angles of
    closed loops are only defined modulo 4*pi; compare accordingly when the
    enclosed region may exceed a hemisphere.

    Pass the polygon without repeating the first vertex. Consecutive
    vertices must be neither (nearly) equal nor (nearly) antipodal.
    """
    v = np.array([unit3(x) for x in vertices])
    m = len(v)
    if m < 3:
        raise ValueError(f"a spherical polygon needs at least 3 vertices, got {m}")
    nxt = np.roll(v, -1, axis=0)
    separations = np.arctan2(np.linalg.norm(np.cross(v, nxt), axis=1), _row_dots(v, nxt))
    degenerate = (separations <= MIN_SEPARATION) | (separations >= math.pi - MIN_SEPARATION)
    if np.any(degenerate):
        k = int(np.argmax(degenerate))
        raise DegeneratePolygonError(
            f"vertices {k} and {(k + 1) % m} are degenerate "
            f"(angular separation {separations[k]:.3e})"
        )

    arrive = -_unit_tangents(v, np.roll(v, 1, axis=0))
    depart = _unit_tangents(v, nxt)
    turning = float(
        np.sum(np.arctan2(_row_dots(np.cross(arrive, depart), v), _row_dots(arrive, depart)))
    )
    area = (TWO_PI - turning) % FOUR_PI
    return area - FOUR_PI if area > TWO_PI else area


def pancharatnam_phase(states) -> float:
    """Overlap-product phase of a discrete chain, -arg prod_k <s_{k+1}|s_k>,
    reduced to [0, 2*pi).

    For a closed chain (first and last states equal up to phase) this is the
    geometric phase of the loop. Consecutive orthogonal states leave the
    connection undefined.
    """
    chain = [as_spinor(s) for s in states]
    if len(chain) < 2:
        raise ValueError("need at least two states")
    for k, s in enumerate(chain):
        dev = abs(np.linalg.norm(s) - 1.0)
        if dev > 1e-12:
            raise ValueError(f"state {k} is not normalized: | |s| - 1 | = {dev:.3e}")
    product = 1.0 + 0.0j
    for k in range(len(chain) - 1):
        overlap = np.vdot(chain[k + 1], chain[k])
        mag = abs(overlap)
        if mag <= 1e-12:
            raise UndefinedConnectionError(f"states {k} and {k + 1} are orthogonal")
        product *= overlap / mag
    return float((-np.angle(product)) % TWO_PI)
