# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Polyhedral approximation and homogenization of line-tension energies.

This package approximates divergence-free matrix-valued fields on a
tetrahedral mesh by polyhedral line currents with lattice-valued
multiplicities, and compares the discrete energies ``E_sigma`` and ``F_inf``
of those currents with the limit energy ``E_0`` given by the convex envelope
of the recession density.

Example usage:
    >>> import numpy as np
    >>> from linetension import PiecewiseConstantField, glue, unit_cube_6tet
    >>> a = np.zeros((3, 3)); a[0, 2] = 1.0
    >>> glued = glue(PiecewiseConstantField.constant(unit_cube_6tet(), a), k=2)
    >>> len(glued.measure) > 0
    True
"""

from .config import DictionaryConfig, RunConfig, Tolerances
from .construction import (
    ConstructionOptions,
    ConvergenceReport,
    GluedMeasure,
    LineIncidence,
    LineLattice,
    PlaneFamily,
    TetraConstruction,
    approximate_measure_pipeline,
    build_line_lattice,
    build_tetra_measure,
    clip_cull_and_count,
    connect_to_barycenters,
    correction_rays,
    enumerate_crossings,
    exact_and_averaged_mass,
    glue,
)
from .currents import (
    BoundaryLedger,
    DivergenceReport,
    Loop,
    PolyhedralCurrent,
    Segment,
    boundary_ledger,
    check_divergence_free,
    close_outside,
    decompose_into_loops,
    pair_with_gradient,
    pair_with_matrix_field,
    round_multiplicities,
    total_variation,
)
from .densities import (
    AnisotropicDensity,
    DensitySpec,
    IsotropicDensity,
    OffsetDensity,
    QuadraticDensity,
    RecessionEvaluator,
    TableDensity,
    check_density_properties,
    g_infinity,
    inequality_chain_check,
    parse_density,
    recession,
)
from .energy import (
    EnergyReport,
    e_sigma,
    f_infinity,
    line_weight,
    lower_bound_diagnostics,
    upper_bound_experiment,
)
from .envelope import EnvelopeEvaluator, check_envelope_properties, convex_envelope
from .errors import (
    AmbiguousNodeError,
    ConfigError,
    DegenerateGeometryError,
    EnvelopeError,
    ExportError,
    InfeasibleError,
    LatticeError,
    LineTensionError,
    LoopDecompositionError,
    MeshError,
    NonLatticeMultiplicityError,
    NormalJumpError,
    RayDirectionError,
    SimplexError,
    UnboundedError,
)
from .fields import (
    PiecewiseConstantField,
    PolynomialMap,
    PotentialSpec,
    RankOneDecomposition,
    check_normal_jumps,
    coordinate_rank_one_decomposition,
    curl_of_interpolated_potential,
    e0_energy,
    integrate_field_pairing,
)
from .geometry import (
    Box,
    FaceGrid,
    Tetra,
    Triangulation,
    line_triangle_intersection,
    shrink_and_project,
    subdivide_boundary,
    tet_box_volume,
)
from .harness import CheckResult, export_geometry, import_geometry, report, run, verify
from .meshes import (
    kuhn_subdivision,
    load_mesh,
    read_mesh,
    regular_tet,
    single_tet,
    unit_cube_6tet,
    write_mesh,
)
from .simplex import Pricing, SimplexResult, solve_lp
from .testfunctions import BumpFunction, PolynomialTestFunction

__version__ = "0.1.0"

__all__ = [
    # Version
    "__version__",
    # Errors
    "LineTensionError",
    "DegenerateGeometryError",
    "MeshError",
    "AmbiguousNodeError",
    "LoopDecompositionError",
    "NormalJumpError",
    "LatticeError",
    "RayDirectionError",
    "SimplexError",
    "InfeasibleError",
    "UnboundedError",
    "EnvelopeError",
    "NonLatticeMultiplicityError",
    "ExportError",
    "ConfigError",
    # Geometry and meshes
    "Tetra",
    "Box",
    "Triangulation",
    "FaceGrid",
    "subdivide_boundary",
    "shrink_and_project",
    "line_triangle_intersection",
    "tet_box_volume",
    "single_tet",
    "regular_tet",
    "unit_cube_6tet",
    "kuhn_subdivision",
    "load_mesh",
    "read_mesh",
    "write_mesh",
    # Currents
    "Segment",
    "PolyhedralCurrent",
    "BoundaryLedger",
    "DivergenceReport",
    "Loop",
    "boundary_ledger",
    "check_divergence_free",
    "pair_with_gradient",
    "pair_with_matrix_field",
    "total_variation",
    "close_outside",
    "decompose_into_loops",
    "round_multiplicities",
    # Fields and test functions
    "PolynomialMap",
    "PotentialSpec",
    "PiecewiseConstantField",
    "RankOneDecomposition",
    "coordinate_rank_one_decomposition",
    "curl_of_interpolated_potential",
    "check_normal_jumps",
    "integrate_field_pairing",
    "e0_energy",
    "BumpFunction",
    "PolynomialTestFunction",
    # Densities and envelope
    "DensitySpec",
    "IsotropicDensity",
    "AnisotropicDensity",
    "OffsetDensity",
    "QuadraticDensity",
    "TableDensity",
    "parse_density",
    "check_density_properties",
    "recession",
    "RecessionEvaluator",
    "g_infinity",
    "inequality_chain_check",
    "convex_envelope",
    "EnvelopeEvaluator",
    "check_envelope_properties",
    "Pricing",
    "SimplexResult",
    "solve_lp",
    # Construction
    "ConstructionOptions",
    "LineLattice",
    "LineIncidence",
    "PlaneFamily",
    "TetraConstruction",
    "GluedMeasure",
    "ConvergenceReport",
    "build_line_lattice",
    "clip_cull_and_count",
    "enumerate_crossings",
    "connect_to_barycenters",
    "exact_and_averaged_mass",
    "correction_rays",
    "build_tetra_measure",
    "glue",
    "approximate_measure_pipeline",
    # Energy
    "EnergyReport",
    "e_sigma",
    "f_infinity",
    "upper_bound_experiment",
    "line_weight",
    "lower_bound_diagnostics",
    # Harness
    "DictionaryConfig",
    "Tolerances",
    "RunConfig",
    "CheckResult",
    "run",
    "verify",
    "report",
    "export_geometry",
    "import_geometry",
]
