# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Smooth test functions for divergence and weak* checks.

Bumps are R^N-valued and compactly supported, so pairing them with the
gradient side of a current tests divergence in the interior of a domain.
Polynomial test functions may be vector- or matrix-valued.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .fields import PolynomialMap
from .geometry import Box, Triangulation

# Largest |eta'(y)| of the profile eta(y) = exp(-1 / (1 - y^2)), evaluated once
_PROFILE_GRID = np.linspace(0.0, 1.0, 200001)[:-1]
_PROFILE_SLOPE = float(
    np.max(
        np.exp(-1.0 / (1.0 - _PROFILE_GRID**2))
        * 2.0
        * _PROFILE_GRID
        / (1.0 - _PROFILE_GRID**2) ** 2
    )
)


class SmoothMap(ABC):
    """Smooth map from R^3 to a tensor space."""

    @property
    @abstractmethod
    def shape(self) -> tuple[int, ...]:
        """Shape of the values."""

    @abstractmethod
    def __call__(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at points ``(M, 3)``, returning ``(M, *shape)``."""

    @abstractmethod
    def gradient(self, points: np.ndarray) -> np.ndarray:
        """Jacobian at points ``(M, 3)``, returning ``(M, *shape, 3)``."""


@dataclass(frozen=True, eq=False)
class BumpFunction(SmoothMap):
    """Vector-valued bump ``a * eta(|x - c| / r)`` supported in a closed ball.

    Parameters
    ----------
    center : np.ndarray
        Center c.
    radius : float
        Support radius r.
    amplitude : np.ndarray
        Vector a in R^N.
    """

    center: np.ndarray
    radius: float
    amplitude: np.ndarray

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise ValueError(f"radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", np.array(self.center, dtype=float).reshape(3))
        object.__setattr__(self, "amplitude", np.array(self.amplitude, dtype=float).reshape(-1))

    @classmethod
    def random(
        cls, rng: np.random.Generator, domain: Box, n: int, margin: float = 0.0
    ) -> BumpFunction:
        """Draw a bump whose support lies inside the domain shrunk by ``margin``."""
        side = float(np.min(domain.hi - domain.lo))
        radius = rng.uniform(0.1, 0.3) * side
        lo = domain.lo + radius + margin
        hi = domain.hi - radius - margin
        center = lo + rng.random(3) * (hi - lo)
        return cls(center, radius, rng.standard_normal(n))

    @property
    def shape(self) -> tuple[int, ...]:
        """Shape ``(N,)`` of the values."""
        return self.amplitude.shape

    @property
    def lipschitz(self) -> float:
        """Lipschitz constant ``|a| max|eta'| / r``."""
        return float(np.linalg.norm(self.amplitude)) * _PROFILE_SLOPE / self.radius

    def supported_in(self, box: Box) -> bool:
        """Whether the closed support lies in the open box."""
        lo_ok = np.all(self.center - self.radius > box.lo)
        return bool(lo_ok and np.all(self.center + self.radius < box.hi))

    def _profile(
        self, points: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        offset = np.asarray(points, dtype=float).reshape(-1, 3) - self.center
        dist = np.linalg.norm(offset, axis=1)
        y = dist / self.radius
        inside = y < 1.0
        eta = np.zeros_like(y)
        slope = np.zeros_like(y)
        yi = y[inside]
        eta[inside] = np.exp(-1.0 / (1.0 - yi**2))
        slope[inside] = -eta[inside] * 2.0 * yi / (1.0 - yi**2) ** 2
        return offset, dist, eta, slope

    def __call__(self, points: np.ndarray) -> np.ndarray:
        _, _, eta, _ = self._profile(points)
        return eta[:, None] * self.amplitude

    def gradient(self, points: np.ndarray) -> np.ndarray:
        offset, dist, _, slope = self._profile(points)
        with np.errstate(invalid="ignore", divide="ignore"):
            radial = np.where(dist[:, None] > 0, offset / (self.radius * dist[:, None]), 0.0)
        return self.amplitude[None, :, None] * (slope[:, None] * radial)[:, None, :]


@dataclass(frozen=True, eq=False)
class PolynomialTestFunction(SmoothMap):
    """Test function backed by a :class:`PolynomialMap`."""

    polynomial: PolynomialMap

    @classmethod
    def random(
        cls, rng: np.random.Generator, shape: tuple[int, ...], degree: int = 2
    ) -> PolynomialTestFunction:
        """Random polynomial with unit-variance coefficients."""
        return cls(PolynomialMap.random(rng, shape, degree))

    @classmethod
    def linear(
        cls, matrix: np.ndarray, offset: np.ndarray | None = None
    ) -> PolynomialTestFunction:
        """Vector-valued affine map ``x -> M x + offset``."""
        m = np.asarray(matrix, dtype=float)
        n = m.shape[0]
        eye = np.eye(3, dtype=int)
        terms = [((i,), tuple(eye[j]), m[i, j]) for i in range(n) for j in range(3)]
        if offset is not None:
            terms.extend(((i,), (0, 0, 0), float(v)) for i, v in enumerate(offset))
        return cls(PolynomialMap.from_terms(terms, (n,)))

    @property
    def shape(self) -> tuple[int, ...]:
        """Shape of the values."""
        return self.polynomial.shape

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.polynomial(np.asarray(points, dtype=float).reshape(-1, 3))

    def gradient(self, points: np.ndarray) -> np.ndarray:
        return self.polynomial.gradient(np.asarray(points, dtype=float).reshape(-1, 3))


def random_bumps(
    rng: np.random.Generator, domain: Box, n: int, count: int, margin: float = 0.0
) -> list[BumpFunction]:
    """Draw ``count`` bumps supported inside the domain."""
    return [BumpFunction.random(rng, domain, n, margin) for _ in range(count)]


def random_matrix_tests(
    rng: np.random.Generator, n: int, count: int, degree: int = 2
) -> list[PolynomialTestFunction]:
    """Draw ``count`` polynomial test functions with values in R^{N x 3}."""
    return [PolynomialTestFunction.random(rng, (n, 3), degree) for _ in range(count)]


def random_bumps_in_mesh(
    rng: np.random.Generator, mesh: Triangulation, n: int, count: int
) -> list[BumpFunction]:
    """Draw ``count`` bumps supported in the open union of the tetrahedra.

    When the mesh fills its domain box the bumps may straddle faces; otherwise
    each bump sits inside the inscribed region of one tetrahedron.
    """
    domain = mesh.domain
    if abs(mesh.volume - domain.volume) <= 1e-12 * domain.volume:
        return random_bumps(rng, domain, n, count)
    bumps = []
    for _ in range(count):
        tet = mesh.tets[int(rng.integers(len(mesh)))]
        c = tet.barycenter
        clearance = float(np.min(tet.face_offsets - tet.face_normals @ c))
        radius = rng.uniform(0.5, 0.9) * clearance
        bumps.append(BumpFunction(c, radius, rng.standard_normal(n)))
    return bumps
