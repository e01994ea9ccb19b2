"""Measurement-driven spin-1/2 evolution, geometric phases, and
mirror-polygon polarization transport."""

from .photonso3 import (
    MirrorPolygon,
    PhotonState,
    UnphysicalIncidenceWarning,
    closed_form_final,
    composite_half_turn_axis,
    default_photon,
    mirror_operator,
    polarization_tip_loop,
    reflect,
    rotation_about,
    trace_polygon,
)
from .su2core import (
    SPIN_DOWN,
    SPIN_UP,
    bloch_vector,
    project_onto,
    pure_state,
    rotation_operator,
    sigma_dot,
    unit3,
)
from .zenoengine import (
    DegeneratePolygonError,
    EvolutionKilledError,
    HamiltonianSpec,
    MeasurementPlan,
    TrajectoryPoint,
    UndefinedConnectionError,
    ZenoRunResult,
    closed_form_finite_n,
    continuum_state,
    family,
    pancharatnam_phase,
    run_free,
    run_hamiltonian,
    solid_angle_cone,
    solid_angle_polygon_formula,
    solid_angle_spherical_polygon,
)

__all__ = [
    "DegeneratePolygonError",
    "EvolutionKilledError",
    "HamiltonianSpec",
    "MeasurementPlan",
    "MirrorPolygon",
    "PhotonState",
    "SPIN_DOWN",
    "SPIN_UP",
    "TrajectoryPoint",
    "UndefinedConnectionError",
    "UnphysicalIncidenceWarning",
    "ZenoRunResult",
    "bloch_vector",
    "closed_form_final",
    "closed_form_finite_n",
    "composite_half_turn_axis",
    "continuum_state",
    "default_photon",
    "family",
    "mirror_operator",
    "pancharatnam_phase",
    "polarization_tip_loop",
    "project_onto",
    "pure_state",
    "reflect",
    "rotation_about",
    "rotation_operator",
    "run_free",
    "run_hamiltonian",
    "sigma_dot",
    "solid_angle_cone",
    "solid_angle_polygon_formula",
    "solid_angle_spherical_polygon",
    "trace_polygon",
    "unit3",
]

__version__ = "0.1.0"
