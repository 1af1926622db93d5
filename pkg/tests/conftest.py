# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Shared test fixtures for linetension tests."""

from pathlib import Path

import numpy as np
import pytest

from linetension import (
    DictionaryConfig,
    EnvelopeEvaluator,
    IsotropicDensity,
    PiecewiseConstantField,
    RunConfig,
    Tetra,
    Triangulation,
    single_tet,
    unit_cube_6tet,
)


def e1_x_e3(n: int = 3) -> np.ndarray:
    """Return the matrix e1 (x) e3 with n rows."""
    a = np.zeros((n, 3))
    a[0, 2] = 1.0
    return a


@pytest.fixture
def reference_tet() -> Tetra:
    """Provide the tetrahedron with vertices 0, e1, e2, e3."""
    return Tetra(np.vstack([np.zeros(3), np.eye(3)]))


@pytest.fixture
def tet_mesh() -> Triangulation:
    """Provide the single reference tetrahedron as a mesh."""
    return single_tet()


@pytest.fixture
def cube_mesh() -> Triangulation:
    """Provide the unit cube split into 6 tetrahedra."""
    return unit_cube_6tet()


@pytest.fixture
def constant_field(cube_mesh: Triangulation) -> PiecewiseConstantField:
    """Provide the constant field e1 (x) e3 on the unit cube."""
    return PiecewiseConstantField.constant(cube_mesh, e1_x_e3())


@pytest.fixture
def iso() -> IsotropicDensity:
    """Provide psi(z, t) = |z|."""
    return IsotropicDensity()


@pytest.fixture
def small_evaluator(iso: IsotropicDensity) -> EnvelopeEvaluator:
    """Provide an envelope evaluator with a small dictionary."""
    return EnvelopeEvaluator(iso, 3, z_max=1, directions=16, s_max=8)


@pytest.fixture
def small_config(tmp_path: Path) -> RunConfig:
    """Provide a fast configuration on the unit cube writing into a temp directory."""
    return RunConfig(
        mesh="unit-cube-6tet",
        k=[2, 3],
        sigma=[0.5, 0.25],
        epsilon=[0.01],
        dictionary=DictionaryConfig(z_max=1, directions=16, s_max=8),
        output=str(tmp_path / "out"),
        test_functions=4,
    )
