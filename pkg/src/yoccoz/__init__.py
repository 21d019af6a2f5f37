"""Yoccoz puzzles for quadratic polynomials.

Exact external-angle combinatorics, ray tracing and landing, puzzle
pieces with their structural checks, bounded renormalization
combinatorics, and grid estimates of conformal moduli.
"""

from .angles import (
    Angle,
    NotDividing,
    NotDoublingInvariant,
    OrbitPortrait,
    PortraitError,
    UnequalValence,
    UnlinkedViolation,
    characteristic_arc,
    double,
    halves,
    orbit,
    periodic_angles,
    validate_portrait,
)
from .dynamics import (
    GreenValue,
    LandingCluster,
    PeriodicPoint,
    QuadraticMap,
    RayTrace,
    cluster_landings,
    equipotential,
    find_center,
    find_periodic_point,
    land_ray,
    trace_ray,
)
from .modulus import (
    GridDomain,
    ModulusEstimate,
    bigon_distance,
    extremal_distance,
    extremal_width,
    grid_modulus,
    piece_modulus,
    quasi_additivity_report,
    transfer_report,
)
from .puzzle import (
    GeometricPiece,
    Piece,
    Puzzle,
    build_puzzle,
    check_subset_lemma,
    critical_value_piece,
    piece_at,
    star,
)
from .registry import VerificationReport, run_verification
from .renorm import (
    MoleculeDecision,
    NotSatisfied,
    PrincipalNest,
    RenormData,
    alpha_puzzle,
    buffers,
    build_nest,
    classify_renormalization,
    find_dividing_cycles,
    molecule_check,
    renorm_params,
)

__version__ = "0.1.0"
