# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Exception hierarchy for linetension."""

from __future__ import annotations

from typing import Sequence


class LineTensionError(Exception):
    """Base exception for all linetension errors.

    Parameters
    ----------
    message : str
        Human-readable error message.
    original_error : Exception, optional
        The underlying exception that caused this error.
    """

    def __init__(self, message: str, original_error: Exception | None = None) -> None:
        super().__init__(message)
        self.original_error = original_error


class DegenerateGeometryError(LineTensionError):
    """Geometry too degenerate to work with.

    Raised when:
    - A tetrahedron has (near) zero volume
    - A triangle has (near) zero area
    - The shrink factor 1 - 1/k^2 vanishes (k < 2)
    - An affine interpolation matrix is singular
    """


class MeshError(LineTensionError):
    """Malformed or non-conforming triangulation.

    Raised when:
    - A mesh file line does not hold 12 floats
    - A vertex of one tetrahedron lies on or inside another one (hanging node)
    - A face is shared by more than two tetrahedra

    Parameters
    ----------
    message : str
        Human-readable error message.
    tets : Sequence[int], optional
        Indices of the offending tetrahedra.
    original_error : Exception, optional
        The underlying exception that caused this error.
    """

    def __init__(
        self,
        message: str,
        tets: Sequence[int] = (),
        original_error: Exception | None = None,
    ) -> None:
        super().__init__(message, original_error)
        self.tets = tuple(tets)


class AmbiguousNodeError(LineTensionError):
    """Two distinct nodes closer than the coordinate quantum.

    Raised when:
    - Ledger accumulation would have to merge nodes that do not snap to the same grid cell
    """

    def __init__(self, message: str, first: Sequence[float], second: Sequence[float]) -> None:
        super().__init__(message)
        self.first = tuple(first)
        self.second = tuple(second)


class LoopDecompositionError(LineTensionError):
    """Current cannot be split into closed loops.

    Raised when:
    - A node carries a net mass above tolerance (the current is not closed)
    - Peeling gets stuck because of accumulated rounding

    Parameters
    ----------
    message : str
        Human-readable error message.
    node : Sequence[float]
        Coordinates of the offending node.
    """

    def __init__(self, message: str, node: Sequence[float]) -> None:
        super().__init__(message)
        self.node = tuple(node)


class NormalJumpError(LineTensionError):
    """Piecewise-constant field is not divergence-free.

    Raised when:
    - A_i n != A_j n across an interior face beyond tolerance
    """

    def __init__(self, message: str, face: tuple[int, int], violation: float) -> None:
        super().__init__(message)
        self.face = face
        self.violation = violation


class LatticeError(LineTensionError):
    """Lattice offsets keep producing too many degenerate lines.

    Raised when:
    - Culling exceeds twice the expected budget for every offset retry
    """


class RayDirectionError(LineTensionError):
    """No admissible direction was found for a correction ray.

    Raised when:
    - Every sampled direction is too close to a forbidden plane or to another ray
    """


class SimplexError(LineTensionError):
    """Linear program could not be solved.

    Raised when:
    - The iteration cap is reached
    """


class InfeasibleError(SimplexError):
    """Linear program has no feasible point."""


class UnboundedError(SimplexError):
    """Linear program objective is unbounded below."""


class EnvelopeError(LineTensionError):
    """Rank-one dictionary cannot express the target matrix.

    Raised when:
    - The envelope LP is infeasible (increase z_max or the number of directions)
    """


class NonLatticeMultiplicityError(LineTensionError):
    """Burgers vectors are not on the lattice sigma Z^N.

    Raised when:
    - ``e_sigma`` is called in strict mode on a current with off-lattice multiplicities
    """


class ExportError(LineTensionError):
    """Geometry or report could not be written or read back.

    Raised when:
    - The output path is not writable
    - A CSV geometry file has the wrong number of columns
    """


class ConfigError(LineTensionError):
    """Run configuration is invalid.

    Parameters
    ----------
    violations : Sequence[str]
        Every violated constraint, one message each.
    """

    def __init__(self, violations: Sequence[str], original_error: Exception | None = None) -> None:
        self.violations = list(violations)
        lines = "\n".join(f"  - {v}" for v in self.violations)
        super().__init__(f"Invalid configuration:\n{lines}", original_error)
