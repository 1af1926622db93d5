# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Tests for line-tension densities and recession functions."""

import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linetension import (
    AnisotropicDensity,
    ConfigError,
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
from linetension.densities import rational_direction, recession_columns

E1 = np.array([1.0, 0.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


class TestBuiltinDensities:
    """Test the built-in densities."""

    def test_isotropic_call(self, iso: IsotropicDensity) -> None:
        """Test scalar and broadcast evaluation."""
        assert iso(np.array([3.0, 4.0]), E3) == 5.0
        values = iso(np.array([[3.0, 4.0], [1.0, 0.0]]), E3)
        np.testing.assert_allclose(values, [5.0, 1.0])

    def test_anisotropic(self) -> None:
        """Test that lines along the preferred axis are cheapest."""
        psi = AnisotropicDensity(2)
        assert psi.name == "aniso:e3"
        assert psi(np.array([1.0]), E3) == pytest.approx(1.0)
        assert psi(np.array([1.0]), E1) == pytest.approx(2.0)

    def test_anisotropic_invalid_axis(self) -> None:
        """Test that the axis must be 0, 1 or 2."""
        with pytest.raises(ValueError, match="axis must be"):
            AnisotropicDensity(3)

    def test_offset(self) -> None:
        """Test the core offset and its absence at z = 0."""
        psi = OffsetDensity()
        assert psi(np.array([0.0, 0.0]), E1) == 0.0
        assert psi(np.array([0.0, 2.0]), E1) == pytest.approx(3.0)

    def test_repr(self) -> None:
        """Test that the representation names the growth constants."""
        assert repr(OffsetDensity()) == "OffsetDensity(name='offset', c=1.0, c_bar=2.0)"


class TestParseDensity:
    """Test parse_density."""

    @pytest.mark.parametrize(
        "name,kind",
        [
            ("iso", IsotropicDensity),
            ("aniso", AnisotropicDensity),
            ("aniso:e1", AnisotropicDensity),
            ("offset", OffsetDensity),
            ("quadratic", QuadraticDensity),
        ],
    )
    def test_builtin_names(self, name: str, kind: type) -> None:
        """Test that built-in names map to their classes."""
        assert isinstance(parse_density(name, 3), kind)

    def test_aniso_default_axis(self) -> None:
        """Test that plain aniso prefers e3."""
        assert parse_density("aniso", 3).axis == 2
        assert parse_density("aniso:e1", 3).axis == 0

    def test_unknown_name(self) -> None:
        """Test that unknown names list the built-in densities."""
        with pytest.raises(ConfigError, match="Built-in densities"):
            parse_density("cubic", 3)


class TestTableDensity:
    """Test TableDensity class."""

    @pytest.fixture
    def table(self, tmp_path: Path) -> Path:
        """Provide a table with N = 1 and two directions for z = 1."""
        path = tmp_path / "psi.csv"
        path.write_text(
            "z1,theta,phi,value\n"
            "1,0.0,0.0,1.0\n"
            f"1,{math.pi / 2},0.0,2.0\n"
            "2,0.0,0.0,1.5\n"
        )
        return path

    def test_lookup_and_extension(self, table: Path) -> None:
        """Test nearest-direction lookup and the homogeneous extension."""
        psi = TableDensity(table, 1)
        assert psi(np.array([1.0]), E3) == pytest.approx(1.0)
        tilted = np.array([0.9, 0.0, 0.1]) / np.linalg.norm([0.9, 0.0, 0.1])
        assert psi(np.array([1.0]), tilted) == pytest.approx(2.0)
        assert psi(np.array([3.0]), E3) == pytest.approx(6.0)
        assert psi.lower == pytest.approx(0.75)
        assert psi.upper == pytest.approx(2.0)
        assert psi.assumed_elliptic

    def test_parse_by_path(self, table: Path) -> None:
        """Test that an existing path is read as a table."""
        assert isinstance(parse_density(str(table), 1), TableDensity)

    def test_malformed_rows(self, tmp_path: Path) -> None:
        """Test that every malformed row is reported."""
        path = tmp_path / "bad.csv"
        path.write_text("1,0.0,0.0\n0,0.0,0.0,1.0\n1,0.0,0.0,-1.0\n")
        with pytest.raises(ConfigError) as excinfo:
            TableDensity(path, 1)
        assert len(excinfo.value.violations) == 3
        assert "z must be nonzero" in excinfo.value.violations[1]

    def test_empty_table(self, tmp_path: Path) -> None:
        """Test that a table without rows is rejected."""
        path = tmp_path / "empty.csv"
        path.write_text("z1,theta,phi,value\n")
        with pytest.raises(ConfigError, match="table is empty"):
            TableDensity(path, 1)

    def test_missing_file(self, tmp_path: Path) -> None:
        """Test that an unreadable table raises ConfigError."""
        with pytest.raises(ConfigError, match="cannot read density table"):
            TableDensity(tmp_path / "missing.csv", 1)


class TestDensityProperties:
    """Test check_density_properties."""

    @pytest.mark.parametrize(
        "psi", [IsotropicDensity(), AnisotropicDensity(2), OffsetDensity()], ids=repr
    )
    def test_admissible_densities_pass(self, psi: object) -> None:
        """Test that built-in linear-growth densities satisfy every property."""
        report = check_density_properties(psi, 2, samples=200, directions=200)
        assert report.passed
        assert report.fitted_lower >= psi.lower - 1e-12

    def test_quadratic_fails(self) -> None:
        """Test that the quadratic density fails growth and subadditivity."""
        report = check_density_properties(QuadraticDensity(), 2, samples=200, directions=200)
        assert report["lower_bound"].passed
        assert not report["upper_bound"].passed
        assert not report["subadditivity"].passed
        assert report["subadditivity"].witness

    def test_unknown_check(self, iso: IsotropicDensity) -> None:
        """Test that asking for an unknown property raises KeyError."""
        report = check_density_properties(iso, 1, samples=10, directions=10)
        with pytest.raises(KeyError):
            report["convexity"]


class TestRationalDirection:
    """Test rational_direction."""

    def test_integer_multiple(self) -> None:
        """Test recovery of a primitive direction and its scale."""
        z, lam = rational_direction(np.array([1.5, 3.0, -4.5]))
        assert z.tolist() == [1, 2, -3]
        assert lam == pytest.approx(1.5)

    def test_irrational_and_zero(self) -> None:
        """Test that irrational ratios and the zero vector are rejected."""
        assert rational_direction(np.array([math.sqrt(2.0), 1.0])) is None
        assert rational_direction(np.zeros(2)) is None

    @given(
        st.lists(st.integers(-20, 20), min_size=1, max_size=3).filter(any),
        st.floats(min_value=0.01, max_value=100.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_reconstruction(self, ints: list[int], scale: float) -> None:
        """Test that scaled integer vectors are reconstructed."""
        b = scale * np.array(ints, dtype=float)
        found = rational_direction(b)
        assert found is not None
        z, lam = found
        assert math.gcd(*(int(x) for x in z)) == 1
        np.testing.assert_allclose(lam * z, b, rtol=1e-9, atol=1e-12)


class TestRecession:
    """Test recession, recession_columns and RecessionEvaluator."""

    def test_isotropic(self, iso: IsotropicDensity) -> None:
        """Test that the isotropic recession function is the norm."""
        estimate = recession(iso, np.array([0.5, 1.0]), E3)
        assert estimate.finite
        assert estimate.value == pytest.approx(math.sqrt(1.25))
        assert estimate.oscillation == pytest.approx(0.0, abs=1e-12)
        assert estimate.direction == (1, 2)

    def test_offset_decays_to_norm(self) -> None:
        """Test that the offset is divided by the largest multiple."""
        estimate = recession(OffsetDensity(), np.array([1.0, 0.0]), E3, s_max=64)
        assert estimate.value == pytest.approx(1.0 + 1.0 / 64.0)
        assert estimate.oscillation > 0.0

    def test_off_cone(self, iso: IsotropicDensity) -> None:
        """Test that irrational directions have infinite recession."""
        estimate = recession(iso, np.array([math.sqrt(2.0), 1.0]), E3)
        assert not estimate.finite

    def test_invalid_arguments(self, iso: IsotropicDensity) -> None:
        """Test that b = 0 and s_max < 1 are rejected."""
        with pytest.raises(ValueError, match="nonzero"):
            recession(iso, np.zeros(2), E3)
        with pytest.raises(ValueError, match="s_max"):
            recession(iso, np.ones(2), E3, s_max=0)
        with pytest.raises(ValueError, match="s_max"):
            RecessionEvaluator(iso, s_max=0)

    def test_columns_match_scalar(self) -> None:
        """Test that the vectorized version agrees with the scalar one."""
        psi = OffsetDensity()
        z = np.array([[2, 0], [1, 1], [0, -3]])
        t = np.tile(E3, (3, 1))
        expected = [recession(psi, zi.astype(float), E3, s_max=16).value for zi in z]
        np.testing.assert_allclose(recession_columns(psi, z, t, s_max=16), expected)

    def test_columns_reject_zero(self, iso: IsotropicDensity) -> None:
        """Test that zero columns are rejected."""
        with pytest.raises(ValueError, match="nonzero z"):
            recession_columns(iso, np.zeros((1, 2), dtype=int), E3[None])

    def test_evaluator_zero(self, iso: IsotropicDensity) -> None:
        """Test that the recession function vanishes at b = 0."""
        assert RecessionEvaluator(iso)(np.zeros(2), E3) == 0.0


class ForwardDensity(DensitySpec):
    """``psi(z, t) = |z| + max(z_1, 0)``, dearer for positive first components."""

    name = "forward"
    upper = 2.0

    def evaluate(self, z: np.ndarray, t: np.ndarray) -> np.ndarray:
        return np.linalg.norm(z, axis=-1) + np.maximum(z[..., 0], 0.0)


class TestGInfinity:
    """Test g_infinity."""

    def test_rank_one(self, iso: IsotropicDensity) -> None:
        """Test that rank-one matrices take the recession value."""
        a = np.outer([2.0, 0.0], E3)
        assert g_infinity(a, RecessionEvaluator(iso)) == pytest.approx(2.0)

    def test_rank_one_anisotropic(self) -> None:
        """Test that the sign ambiguity of the SVD does not matter."""
        rec = RecessionEvaluator(AnisotropicDensity(2))
        assert g_infinity(np.outer([1.0], E3), rec) == pytest.approx(1.0)
        assert g_infinity(np.outer([-1.0], E1), rec) == pytest.approx(2.0)

    def test_sign_of_odd_density(self) -> None:
        """Test that a density odd in z is read on the pair whose t starts positive."""
        rec = RecessionEvaluator(ForwardDensity())
        tilted = np.array([-0.6, 0.0, 0.8])
        assert g_infinity(np.outer([1.0], tilted), rec) == pytest.approx(1.0)
        assert g_infinity(np.outer([1.0], -tilted), rec) == pytest.approx(2.0)
        assert g_infinity(np.outer([-2.0], -tilted), rec) == pytest.approx(2.0)

    def test_higher_rank(self, iso: IsotropicDensity) -> None:
        """Test that rank-two matrices are infinite and zero is free."""
        rec = RecessionEvaluator(iso)
        assert g_infinity(np.eye(2, 3), rec) == math.inf
        assert g_infinity(np.zeros((2, 3)), rec) == 0.0


class TestInequalityChain:
    """Test inequality_chain_check."""

    @staticmethod
    def frobenius(a: np.ndarray) -> float:
        """Nuclear norm of a rank-one matrix."""
        return float(np.linalg.norm(a))

    def test_isotropic_chain_holds(self, iso: IsotropicDensity) -> None:
        """Test that psi >= psi_inf >= g holds for the norm density."""
        report = inequality_chain_check(iso, 2, self.frobenius, samples=8)
        assert report.passed
        assert report.samples == 8

    def test_too_large_envelope_fails(self, iso: IsotropicDensity) -> None:
        """Test that an envelope above the recession function is caught."""

        def doubled(a: np.ndarray) -> float:
            return 2.0 * self.frobenius(a)

        report = inequality_chain_check(iso, 2, doubled, samples=8)
        assert not report.passed
        assert report.envelope_violation > 0.5
