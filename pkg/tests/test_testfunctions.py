# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Tests for bump and polynomial test functions."""

import numpy as np
import pytest

from linetension import Box, BumpFunction, PolynomialTestFunction, Triangulation
from linetension.testfunctions import random_bumps, random_bumps_in_mesh, random_matrix_tests


class TestBumpFunction:
    """Test BumpFunction class."""

    @pytest.fixture
    def bump(self) -> BumpFunction:
        """Provide a bump of radius 0.3 at the cube center."""
        return BumpFunction([0.5, 0.5, 0.5], 0.3, [2.0, -1.0])

    def test_invalid_radius(self) -> None:
        """Test that a nonpositive radius is rejected."""
        with pytest.raises(ValueError, match="radius must be positive"):
            BumpFunction(np.zeros(3), 0.0, [1.0])

    def test_values(self, bump: BumpFunction) -> None:
        """Test the peak value and the vanishing outside the support."""
        points = np.array([[0.5, 0.5, 0.5], [0.5, 0.5, 0.85]])
        values = bump(points)
        np.testing.assert_allclose(values[0], np.array([2.0, -1.0]) * np.exp(-1.0))
        np.testing.assert_array_equal(values[1], [0.0, 0.0])
        assert bump.shape == (2,)

    def test_gradient_matches_finite_differences(self, bump: BumpFunction) -> None:
        """Test the analytic Jacobian against central differences."""
        rng = np.random.default_rng(4)
        points = bump.center + 0.15 * (rng.random((6, 3)) - 0.5)
        h = 1e-6
        jac = bump.gradient(points)
        for axis in range(3):
            step = np.zeros(3)
            step[axis] = h
            fd = (bump(points + step) - bump(points - step)) / (2.0 * h)
            np.testing.assert_allclose(jac[:, :, axis], fd, atol=1e-6)

    def test_lipschitz_bound(self, bump: BumpFunction) -> None:
        """Test that sampled difference quotients stay below the Lipschitz constant."""
        rng = np.random.default_rng(8)
        x = bump.center + 0.6 * (rng.random((200, 3)) - 0.5)
        y = bump.center + 0.6 * (rng.random((200, 3)) - 0.5)
        ratio = np.linalg.norm(bump(x) - bump(y), axis=1) / np.linalg.norm(x - y, axis=1)
        assert ratio.max() <= bump.lipschitz * (1.0 + 1e-6)

    def test_supported_in(self, bump: BumpFunction) -> None:
        """Test support containment in boxes."""
        assert bump.supported_in(Box(np.zeros(3), np.ones(3)))
        assert not bump.supported_in(Box(np.zeros(3), np.full(3, 0.7)))

    def test_random_bumps_stay_inside(self) -> None:
        """Test that random bumps are supported in the domain."""
        box = Box(np.zeros(3), np.ones(3))
        bumps = random_bumps(np.random.default_rng(1), box, 2, 10)
        assert all(b.supported_in(box) for b in bumps)
        assert all(b.shape == (2,) for b in bumps)


class TestPolynomialTestFunction:
    """Test PolynomialTestFunction class."""

    def test_linear(self) -> None:
        """Test values and Jacobian of an affine map."""
        m = np.array([[1.0, 2.0, 3.0], [0.0, -1.0, 0.5]])
        f = PolynomialTestFunction.linear(m, offset=np.array([1.0, 0.0]))
        x = np.array([[1.0, 1.0, 2.0]])
        np.testing.assert_allclose(f(x), [[10.0, 0.0]])
        np.testing.assert_allclose(f.gradient(x)[0], m)

    def test_random_matrix_tests(self) -> None:
        """Test the shapes of random matrix-valued test functions."""
        tests = random_matrix_tests(np.random.default_rng(0), 2, 3)
        assert len(tests) == 3
        assert all(t.shape == (2, 3) for t in tests)
        assert tests[0](np.zeros((5, 3))).shape == (5, 2, 3)


class TestBumpsInMesh:
    """Test random_bumps_in_mesh."""

    def test_single_tet(self, tet_mesh: Triangulation) -> None:
        """Test that bumps lie inside the tetrahedron when the mesh does not fill its box."""
        tet = tet_mesh.tets[0]
        for bump in random_bumps_in_mesh(np.random.default_rng(6), tet_mesh, 1, 10):
            clearance = tet.face_offsets - tet.face_normals @ bump.center
            assert np.all(clearance > bump.radius)

    def test_filled_box(self, cube_mesh: Triangulation) -> None:
        """Test that bumps may straddle faces when the mesh fills its box."""
        bumps = random_bumps_in_mesh(np.random.default_rng(6), cube_mesh, 3, 10)
        assert all(b.supported_in(cube_mesh.domain) for b in bumps)
