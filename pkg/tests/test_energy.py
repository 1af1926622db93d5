# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Tests for the discrete energies and the bound experiments."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linetension import (
    Box,
    EnergyReport,
    EnvelopeEvaluator,
    IsotropicDensity,
    NonLatticeMultiplicityError,
    OffsetDensity,
    PiecewiseConstantField,
    PolyhedralCurrent,
    RecessionEvaluator,
    e_sigma,
    f_infinity,
    glue,
    line_weight,
    lower_bound_diagnostics,
    total_variation,
    unit_cube_6tet,
    upper_bound_experiment,
)

from .conftest import e1_x_e3

UNIT_CUBE = Box(np.zeros(3), np.ones(3))


def vertical_segment(burgers: list[float]) -> PolyhedralCurrent:
    """Return the segment from (0.5, 0.5, 0) to (0.5, 0.5, 1) with the given multiplicity."""
    return PolyhedralCurrent([[0.5, 0.5, 0.0]], [[0.5, 0.5, 1.0]], [burgers])


class TestESigma:
    """Test e_sigma function."""

    def test_unit_segment(self, iso: IsotropicDensity) -> None:
        """Test that sigma e_1 on a unit segment costs sigma."""
        assert e_sigma(vertical_segment([0.25]), iso, 0.25) == pytest.approx(0.25)

    def test_window_clips_length(self, iso: IsotropicDensity) -> None:
        """Test that only the part inside the window is charged."""
        half = Box([0.0, 0.0, 0.0], [1.0, 1.0, 0.5])
        assert e_sigma(vertical_segment([0.5]), iso, 0.25, window=half) == pytest.approx(0.25)

    def test_offset_density(self) -> None:
        """Test that the core offset is paid once per unit multiplicity."""
        assert e_sigma(vertical_segment([0.25, 0.0]), OffsetDensity(), 0.25) == pytest.approx(0.5)

    def test_off_lattice(self, iso: IsotropicDensity) -> None:
        """Test that multiplicities off sigma Z^N raise or give infinity."""
        current = vertical_segment([0.3])
        with pytest.raises(NonLatticeMultiplicityError, match="is not in"):
            e_sigma(current, iso, 0.25)
        assert e_sigma(current, iso, 0.25, strict=False) == math.inf

    def test_invalid_sigma(self, iso: IsotropicDensity) -> None:
        """Test that sigma must be positive."""
        with pytest.raises(ValueError, match="sigma must be positive"):
            e_sigma(vertical_segment([1.0]), iso, 0.0)

    def test_empty_current(self, iso: IsotropicDensity) -> None:
        """Test that the empty current has zero energy."""
        assert e_sigma(PolyhedralCurrent.empty(2), iso, 0.5) == 0.0

    @given(
        st.lists(
            st.tuples(st.integers(-4, 4), st.integers(-4, 4)).filter(any), min_size=1, max_size=5
        ),
        st.sampled_from([0.5, 0.25, 0.125]),
    )
    @settings(max_examples=40, deadline=None)
    def test_isotropic_is_total_variation(self, ints: list[tuple[int, int]], sigma: float) -> None:
        """Test that E_sigma under psi = |z| equals the total variation."""
        rng = np.random.default_rng(len(ints))
        starts = rng.random((len(ints), 3))
        ends = starts + rng.random((len(ints), 3)) + 0.1
        current = PolyhedralCurrent(starts, ends, sigma * np.array(ints, dtype=float))
        energy = e_sigma(current, IsotropicDensity(), sigma)
        assert energy == pytest.approx(total_variation(current), rel=1e-12)


class TestFInfinity:
    """Test f_infinity function."""

    def test_isotropic(self, iso: IsotropicDensity) -> None:
        """Test that psi_inf = |b| for rational multiplicities."""
        assert f_infinity(vertical_segment([0.3, 0.4]), iso) == pytest.approx(0.5)

    def test_offset_recession(self) -> None:
        """Test that the offset fades with the sampled multiples."""
        value = f_infinity(vertical_segment([0.25, 0.0]), OffsetDensity(), s_max=64)
        assert value == pytest.approx(0.25 * (1.0 + 1.0 / 64.0))

    def test_evaluator_argument(self) -> None:
        """Test that a RecessionEvaluator brings its own sampling depth."""
        rec = RecessionEvaluator(OffsetDensity(), s_max=8)
        value = f_infinity(vertical_segment([1.0, 0.0]), rec)
        assert value == pytest.approx(1.0 + 1.0 / 8.0)

    def test_off_cone_is_infinite(self, iso: IsotropicDensity) -> None:
        """Test that irrational multiplicities have infinite energy."""
        assert f_infinity(vertical_segment([math.sqrt(2.0), 1.0]), iso) == math.inf

    def test_outside_window_is_free(self, iso: IsotropicDensity) -> None:
        """Test that segments outside the window are not charged."""
        far = PolyhedralCurrent([[5.0, 5.0, 5.0]], [[6.0, 5.0, 5.0]], [[math.sqrt(2.0)]])
        assert f_infinity(far, iso, window=UNIT_CUBE) == 0.0


class TestLineWeight:
    """Test line_weight function."""

    def test_coordinate_terms(self, constant_field: PiecewiseConstantField) -> None:
        """Test that a unit coordinate term weighs 1 / k**4."""
        assert line_weight(glue(constant_field, 2)) == pytest.approx(1.0 / 16.0)

    def test_zero_field(self, constant_field: PiecewiseConstantField) -> None:
        """Test that a field without terms has zero weight."""
        zero = PiecewiseConstantField.constant(constant_field.mesh, np.zeros((3, 3)))
        assert line_weight(glue(zero, 2)) == 0.0


class TestUpperBoundExperiment:
    """Test upper_bound_experiment and lower_bound_diagnostics."""

    @pytest.fixture
    def experiment(
        self, constant_field: PiecewiseConstantField, small_evaluator: EnvelopeEvaluator
    ) -> EnergyReport:
        """Provide a k = 2 experiment on the unit cube rounded at two spacings."""
        return upper_bound_experiment(
            constant_field,
            small_evaluator.psi,
            ks=[2],
            sigmas=[0.5, 0.25],
            epsilons=[0.01],
            evaluator=small_evaluator,
            seed=2,
        )

    @pytest.mark.parametrize(
        "kwargs,message",
        [
            ({"ks": [], "sigmas": [0.5]}, "must be nonempty"),
            ({"ks": [2], "sigmas": [0.0]}, "sigma values must be positive"),
            ({"ks": [2], "sigmas": [0.5], "epsilons": [-0.1]}, "epsilon values"),
            ({"ks": [2], "sigmas": [0.5], "sigma_unit": 0.0}, "sigma_unit must be positive"),
        ],
    )
    def test_invalid_arguments(
        self,
        constant_field: PiecewiseConstantField,
        iso: IsotropicDensity,
        kwargs: dict,
        message: str,
    ) -> None:
        """Test that empty or out-of-range parameter lists are rejected."""
        with pytest.raises(ValueError, match=message):
            upper_bound_experiment(constant_field, iso, **kwargs)

    @pytest.mark.slow
    def test_rows_and_rounding(self, experiment: EnergyReport) -> None:
        """Test the construction row, the rounding rows and the lattice currents."""
        assert len(experiment.rows) == 3
        construction, *rounding = experiment.rows
        assert math.isnan(construction.sigma)
        assert construction.e0 == pytest.approx(1.0, rel=1e-6)
        assert construction.e0_bound == pytest.approx(1.01, rel=1e-6)
        assert construction.eta_mass > 0.0
        assert math.isfinite(construction.f_infinity)
        assert [row.sigma for row in rounding] == [0.5, 0.25]
        assert all(math.isfinite(row.e_sigma) for row in rounding)
        assert all(row.loops > 0 for row in rounding)
        assert all(row.segments > 0 for row in rounding)
        unit = experiment.sigma_units[0.01]
        assert unit > 0.0
        assert all(row.sigma_unit == unit for row in rounding)
        assert set(experiment.rounded) == {(0.01, 0.5), (0.01, 0.25)}
        for (_, sigma), current in experiment.rounded.items():
            assert current.sigma == pytest.approx(sigma * unit)
            assert current.is_lattice(current.sigma)
        assert 0.01 in experiment.measures
        assert "sigma_gap@0.01" in experiment.rates
        assert experiment.to_rows()[0]["k"] == 2

    @pytest.mark.slow
    def test_step_bound_leaves_out_eta(self, experiment: EnergyReport) -> None:
        """Test that the step bound is E0 + epsilon L3 with relative slack only."""
        construction = experiment.rows[0]
        assert construction.step_bound == pytest.approx(1.01 * 1.03, rel=1e-6)
        assert construction.step_holds == (construction.f_infinity <= construction.step_bound)
        # at k = 2 the connectors and rays alone outweigh the slack
        assert construction.f_infinity > construction.step_bound
        assert not construction.step_holds
        assert not experiment.passed
        assert any("exceeds E0 + epsilon L3" in flag for flag in experiment.flags)

    @pytest.mark.slow
    def test_lower_bound_chain(
        self, experiment: EnergyReport, small_evaluator: EnvelopeEvaluator
    ) -> None:
        """Test that E_sigma dominates F_inf on the rounded currents."""
        lower = lower_bound_diagnostics(small_evaluator.psi, experiment, small_evaluator)
        checks = {c.name: c for c in lower.checks}
        assert checks["e_sigma_above_f_infinity"].passed
        assert "segment_above_envelope" in checks
        assert lower.sandwich["e0"] == pytest.approx(1.0, rel=1e-6)
        assert lower.sandwich["e_sigma_min"] <= lower.sandwich["e_sigma_max"]

    def test_empty_report(self, small_evaluator: EnvelopeEvaluator) -> None:
        """Test that a report without rows yields no checks."""
        lower = lower_bound_diagnostics(
            small_evaluator.psi, EnergyReport("iso", UNIT_CUBE), small_evaluator
        )
        assert lower.checks == []
        assert lower.sandwich == {}
        assert lower.passed


SIGMAS = [2.0**-m for m in range(1, 7)]


@pytest.mark.slow
class TestUnitCubeSandwich:
    """Test the upper-bound experiment on the unit cube at k = 8 and epsilon = 0.01."""

    @pytest.fixture(scope="class")
    def report(self) -> EnergyReport:
        """Provide the experiment for e1 (x) e3 under psi = |z| at k = 2, 4, 8."""
        psi = IsotropicDensity()
        field = PiecewiseConstantField.constant(unit_cube_6tet(), e1_x_e3())
        evaluator = EnvelopeEvaluator(psi, 3, z_max=1, directions=16, s_max=8)
        return upper_bound_experiment(
            field, psi, ks=[2, 4, 8], sigmas=SIGMAS, epsilons=[0.01], evaluator=evaluator
        )

    def test_lattice_part_meets_bound(self, report: EnergyReport) -> None:
        """Test that the lattice chords stay below E0 + epsilon L3 and eta makes up the rest."""
        top = [row for row in report.rows if row.k == 8 and math.isnan(row.sigma)][0]
        assert top.e0 == pytest.approx(1.0, rel=1e-6)
        assert top.f_infinity_nu <= top.step_bound
        assert top.f_infinity == pytest.approx(top.f_infinity_nu + top.eta_mass, rel=1e-9)

    def test_eta_mass_decays(self, report: EnergyReport) -> None:
        """Test that the mass of eta in the cube shrinks with every doubling of k."""
        masses = [row.eta_mass for row in report.rows if math.isnan(row.sigma)]
        assert len(masses) == 3
        assert masses[0] > masses[1] > masses[2] > 0.0

    @pytest.mark.xfail(
        reason="eta carries about 0.45 of mass in the cube at k = 8 and decays like 1 / k",
        strict=False,
    )
    def test_step_bound_at_k8(self, report: EnergyReport) -> None:
        """Test that F_inf at k = 8 is within 3% of E0 + epsilon L3."""
        top = [row for row in report.rows if row.k == 8 and math.isnan(row.sigma)][0]
        assert top.step_holds

    def test_rounding_is_nonempty_and_bounded(self, report: EnergyReport) -> None:
        """Test that every rounded current survives and its gap obeys c_bar sigma sqrt(N) L."""
        rounding = [row for row in report.rows if not math.isnan(row.sigma)]
        assert [row.sigma for row in rounding] == SIGMAS
        assert all(row.segments > 0 for row in rounding)
        assert all(row.e_sigma > 0.0 for row in rounding)
        assert all(row.within_bound for row in rounding)
        assert not any("sigma=" in flag for flag in report.flags)

    def test_e_sigma_approaches_f_infinity(self, report: EnergyReport) -> None:
        """Test that the rounding gap shrinks at least like sigma**0.8."""
        rounding = [row for row in report.rows if not math.isnan(row.sigma)]
        assert rounding[-1].gap < rounding[0].gap
        assert rounding[-1].e_sigma >= rounding[0].e_sigma
        assert report.rates["sigma_gap@0.01"] >= 0.8
