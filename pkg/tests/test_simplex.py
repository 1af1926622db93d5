# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Tests for the two-phase simplex solver, checked against scipy's HiGHS."""

import numpy as np
import pytest
from scipy.optimize import linprog

from linetension import InfeasibleError, Pricing, SimplexError, UnboundedError, simplex, solve_lp


def highs_value(c: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    """Optimal value of the same standard-form LP from scipy."""
    res = linprog(c, A_eq=a, b_eq=b, bounds=[(0, None)] * len(c), method="highs")
    assert res.success
    return float(res.fun)


class TestSolveLp:
    """Test solve_lp function."""

    def test_small_example(self) -> None:
        """Test the cheapest of two columns is chosen."""
        res = solve_lp(np.array([1.0, 2.0]), np.array([[1.0, 1.0]]), np.array([1.0]))
        assert res.x.tolist() == [1.0, 0.0]
        assert res.value == 1.0
        assert res.support.tolist() == [0]

    @pytest.mark.parametrize("seed", range(6))
    @pytest.mark.parametrize("pricing", [Pricing.DANTZIG, Pricing.BLAND])
    def test_random_lps_match_highs(self, seed: int, pricing: Pricing) -> None:
        """Test optimal values and vertex sparsity on random feasible LPs."""
        rng = np.random.default_rng(seed)
        m, n = 4, 12
        a = rng.normal(size=(m, n))
        b = a @ rng.random(n)
        c = rng.random(n) + 0.1
        res = solve_lp(c, a, b, pricing=pricing)
        assert res.value == pytest.approx(highs_value(c, a, b), rel=1e-7, abs=1e-9)
        np.testing.assert_allclose(a @ res.x, b, atol=1e-8)
        assert np.all(res.x >= 0.0)
        assert len(res.support) <= m

    def test_negative_right_hand_side(self) -> None:
        """Test that rows with b < 0 are handled."""
        a = np.array([[-1.0, -1.0, 0.0], [0.0, 1.0, 1.0]])
        b = np.array([-2.0, 1.0])
        c = np.array([1.0, 3.0, 1.0])
        res = solve_lp(c, a, b)
        assert res.value == pytest.approx(highs_value(c, a, b))

    def test_redundant_rows(self) -> None:
        """Test that duplicated constraints are dropped."""
        a = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
        b = np.ones(3)
        res = solve_lp(np.ones(3), a, b)
        assert res.value == pytest.approx(1.0)
        np.testing.assert_allclose(res.x, [0.0, 1.0, 0.0])

    def test_degenerate_cycling_example(self) -> None:
        """Test a classic degenerate LP on which textbook Dantzig pivoting cycles."""
        c = np.array([0.0, 0.0, 0.0, -0.75, 20.0, -0.5, 6.0])
        a = np.array(
            [
                [1.0, 0.0, 0.0, 0.25, -8.0, -1.0, 9.0],
                [0.0, 1.0, 0.0, 0.5, -12.0, -0.5, 3.0],
                [0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0],
            ]
        )
        b = np.array([0.0, 0.0, 1.0])
        res = solve_lp(c, a, b)
        assert res.value == pytest.approx(-1.25)
        assert res.value == pytest.approx(highs_value(c, a, b))

    def test_degenerate_run_switches_to_bland(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test that Dantzig pricing hands over to Bland's rule after degenerate pivots."""
        monkeypatch.setattr(simplex, "DEGENERATE_RUN", 1)
        c = np.array([0.0, 0.0, 0.0, -0.75, 20.0, -0.5, 6.0])
        a = np.array(
            [
                [1.0, 0.0, 0.0, 0.25, -8.0, -1.0, 9.0],
                [0.0, 1.0, 0.0, 0.5, -12.0, -0.5, 3.0],
                [0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0],
            ]
        )
        res = solve_lp(c, a, np.array([0.0, 0.0, 1.0]), pricing=Pricing.DANTZIG)
        assert res.switched_to_bland
        assert res.value == pytest.approx(-1.25)

    def test_infeasible(self) -> None:
        """Test that x1 + x2 = -1 with x >= 0 is infeasible."""
        with pytest.raises(InfeasibleError, match="infeasible"):
            solve_lp(np.ones(2), np.array([[1.0, 1.0]]), np.array([-1.0]))

    def test_unbounded(self) -> None:
        """Test that min -x1 on the ray x1 = x2 is unbounded."""
        with pytest.raises(UnboundedError, match="unbounded"):
            solve_lp(np.array([-1.0, 0.0]), np.array([[1.0, -1.0]]), np.array([0.0]))

    def test_iteration_cap(self) -> None:
        """Test that the pivot cap raises SimplexError."""
        with pytest.raises(SimplexError, match="iteration cap"):
            solve_lp(np.array([1.0, 2.0]), np.array([[1.0, 1.0]]), np.array([1.0]), max_iter=0)

    def test_inconsistent_shapes(self) -> None:
        """Test that mismatched dimensions are rejected."""
        with pytest.raises(ValueError, match="Inconsistent LP shapes"):
            solve_lp(np.ones(3), np.ones((1, 2)), np.ones(1))

    def test_pricing_by_name(self) -> None:
        """Test that pricing rules can be given by name."""
        res = solve_lp(
            np.array([2.0, 1.0]), np.array([[1.0, 1.0]]), np.array([3.0]), pricing="bland"
        )
        assert res.value == pytest.approx(3.0)
        assert res.switched_to_bland
