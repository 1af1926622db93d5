# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Polyhedral matrix-valued 1-currents.

A :class:`PolyhedralCurrent` is a finite list of oriented straight segments,
each carrying a multiplicity (Burgers) vector in R^N. It represents the measure
``sum_i b_i (x) tau_i H^1 restricted to [start_i, end_i]``.

Sign convention of the boundary ledger: a segment from p to q with
multiplicity b contributes ``+b`` at p and ``-b`` at q. The pairing with a
gradient is therefore ``<mu, grad phi> = -sum(ledger mass * phi(node))``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterator, Sequence

import networkx as nx
import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.spatial import cKDTree

from .densities import rational_direction
from .errors import AmbiguousNodeError, ExportError, LoopDecompositionError
from .geometry import Box, Triangulation

logger = logging.getLogger(__name__)

# Node snapping grid, relative to the extent of the geometry
DEFAULT_QUANTUM = 2.0**-30

# Direction of the hub used to close currents outside the domain
HUB_DIRECTION = np.array([0.5772156649, 0.6180339887, 0.5338505183])

VectorField = Callable[[np.ndarray], np.ndarray]


def _canonical_flip(starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Mask of segments whose start is lexicographically larger than their end."""
    diff = starts - ends
    if len(diff) == 0:
        return np.zeros(0, dtype=bool)
    first = np.argmax(diff != 0.0, axis=1)
    lead = diff[np.arange(len(diff)), first]
    return lead > 0.0


@dataclass(frozen=True, eq=False)
class Segment:
    """Oriented straight segment carrying a constant multiplicity.

    Parameters
    ----------
    start, end : array_like
        Endpoints in R^3, distinct.
    burgers : array_like
        Multiplicity vector in R^N.
    """

    start: np.ndarray
    end: np.ndarray
    burgers: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "start", np.array(self.start, dtype=float).reshape(3))
        object.__setattr__(self, "end", np.array(self.end, dtype=float).reshape(3))
        object.__setattr__(self, "burgers", np.array(self.burgers, dtype=float).reshape(-1))
        if self.length <= 0.0:
            raise ValueError("Segment endpoints must be distinct")

    @property
    def length(self) -> float:
        """Euclidean length."""
        return float(np.linalg.norm(self.end - self.start))

    @property
    def tangent(self) -> np.ndarray:
        """Unit tangent from start to end."""
        return (self.end - self.start) / self.length

    def reversed(self) -> Segment:
        """Equivalent segment with swapped endpoints and negated multiplicity."""
        return Segment(self.end, self.start, -self.burgers)

    def canonical(self) -> Segment:
        """Equivalent segment whose start is the lexicographically smaller endpoint."""
        if _canonical_flip(self.start[None], self.end[None])[0]:
            return self.reversed()
        return self


@dataclass(frozen=True, eq=False)
class PolyhedralCurrent:
    """Finite sum of straight segments with vector multiplicities.

    Segments are stored in canonical orientation (lexicographically smaller
    endpoint first, multiplicity negated when flipped).

    Parameters
    ----------
    starts, ends : np.ndarray
        Endpoints, shape ``(M, 3)``.
    burgers : np.ndarray
        Multiplicities, shape ``(M, N)``.
    sigma : float, optional
        Lattice spacing when all multiplicities lie in sigma Z^N; ``None`` for the
        cone class (positive multiples of integer vectors).
    """

    starts: np.ndarray
    ends: np.ndarray
    burgers: np.ndarray
    sigma: float | None = None

    def __post_init__(self) -> None:
        starts = np.array(self.starts, dtype=float).reshape(-1, 3)
        ends = np.array(self.ends, dtype=float).reshape(-1, 3)
        burgers = np.array(self.burgers, dtype=float)
        burgers = burgers.reshape(len(starts), -1) if burgers.ndim != 2 else burgers
        if not (len(starts) == len(ends) == len(burgers)):
            raise ValueError("starts, ends and burgers must have the same number of rows")
        if np.any(np.all(starts == ends, axis=1)):
            raise ValueError("Segments must have positive length")
        flip = _canonical_flip(starts, ends)
        if np.any(flip):
            starts, ends = (
                np.where(flip[:, None], ends, starts),
                np.where(flip[:, None], starts, ends),
            )
            burgers = np.where(flip[:, None], -burgers, burgers)
        for array in (starts, ends, burgers):
            array.setflags(write=False)
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "ends", ends)
        object.__setattr__(self, "burgers", burgers)

    @classmethod
    def empty(cls, n: int, sigma: float | None = None) -> PolyhedralCurrent:
        """Return the zero current with multiplicities in R^n."""
        return cls(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, n)), sigma)

    @classmethod
    def from_segments(cls, segments: Sequence[Segment], n: int) -> PolyhedralCurrent:
        """Build a current from :class:`Segment` objects."""
        if not segments:
            return cls.empty(n)
        return cls(
            np.array([s.start for s in segments]),
            np.array([s.end for s in segments]),
            np.array([s.burgers for s in segments]),
        )

    @classmethod
    def concatenate(cls, currents: Sequence[PolyhedralCurrent], n: int) -> PolyhedralCurrent:
        """Sum of currents as a plain union of their segment lists."""
        parts = [c for c in currents if len(c)]
        if not parts:
            return cls.empty(n)
        return cls(
            np.vstack([c.starts for c in parts]),
            np.vstack([c.ends for c in parts]),
            np.vstack([c.burgers for c in parts]),
        )

    def __len__(self) -> int:
        return len(self.starts)

    def __add__(self, other: PolyhedralCurrent) -> PolyhedralCurrent:
        if other.n != self.n:
            raise ValueError(f"Cannot add currents with N={self.n} and N={other.n}")
        return PolyhedralCurrent.concatenate([self, other], self.n)

    @property
    def n(self) -> int:
        """Dimension N of the multiplicities."""
        return self.burgers.shape[1]

    @cached_property
    def lengths(self) -> np.ndarray:
        """Segment lengths."""
        return np.linalg.norm(self.ends - self.starts, axis=1)

    @cached_property
    def tangents(self) -> np.ndarray:
        """Unit tangents, shape ``(M, 3)``."""
        return (self.ends - self.starts) / self.lengths[:, None]

    def segments(self) -> Iterator[Segment]:
        """Iterate over the segments."""
        for s, e, b in zip(self.starts, self.ends, self.burgers):
            yield Segment(s, e, b)

    def scaled(self, factor: float) -> PolyhedralCurrent:
        """Return the current with every multiplicity multiplied by ``factor``."""
        return PolyhedralCurrent(self.starts, self.ends, factor * self.burgers, self.sigma)

    def with_sigma(self, sigma: float | None) -> PolyhedralCurrent:
        """Return the same segments tagged with another multiplicity class."""
        return PolyhedralCurrent(self.starts, self.ends, self.burgers, sigma)

    def extent(self) -> float:
        """Diameter of the bounding box of all endpoints (at least 1)."""
        if len(self) == 0:
            return 1.0
        pts = np.vstack([self.starts, self.ends])
        return max(float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0))), 1.0)

    def default_quantum(self) -> float:
        """Node snapping quantum, ``2**-30`` times the extent."""
        return DEFAULT_QUANTUM * self.extent()

    def merged(self, quantum: float | None = None, tol: float = 0.0) -> PolyhedralCurrent:
        """Sum multiplicities of geometrically identical segments.

        Parameters
        ----------
        quantum : float, optional
            Node snapping quantum; defaults to :meth:`default_quantum`.
        tol : float
            Merged segments with ``|b| <= tol`` are dropped.
        """
        if len(self) == 0:
            return self
        q = self.default_quantum() if quantum is None else quantum
        keys = np.hstack(
            [np.round(self.starts / q).astype(np.int64), np.round(self.ends / q).astype(np.int64)]
        )
        _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.reshape(-1)
        summed = np.zeros((len(first), self.n))
        np.add.at(summed, inverse, self.burgers)
        keep = np.linalg.norm(summed, axis=1) > tol
        return PolyhedralCurrent(
            self.starts[first][keep], self.ends[first][keep], summed[keep], self.sigma
        )

    def in_cone(self, tol: float = 1e-9) -> bool:
        """Whether every multiplicity is a positive multiple of an integer vector."""
        rows = np.unique(self.burgers, axis=0)
        return all(rational_direction(b, tol=tol) is not None for b in rows)

    def is_lattice(self, sigma: float, tol: float = 1e-9) -> bool:
        """Whether every multiplicity lies in ``sigma * Z^N``."""
        z = self.burgers / sigma
        return bool(np.all(np.abs(z - np.round(z)) <= tol * np.maximum(1.0, np.abs(z))))


@dataclass(frozen=True, eq=False)
class BoundaryLedger:
    """Net vector mass at the nodes of a current (its divergence).

    Attributes
    ----------
    nodes : np.ndarray
        Representative coordinates, shape ``(K, 3)``.
    masses : np.ndarray
        Accumulated masses, shape ``(K, N)``.
    keys : np.ndarray
        Integer grid keys of the nodes, shape ``(K, 3)``.
    quantum : float
        Snapping grid spacing.
    """

    nodes: np.ndarray
    masses: np.ndarray
    keys: np.ndarray
    quantum: float

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def is_empty(self) -> bool:
        """Whether no node carries mass."""
        return len(self.nodes) == 0

    def entries(self) -> dict[tuple[float, float, float], np.ndarray]:
        """Mapping from node coordinates to mass."""
        return {tuple(float(x) for x in p): m for p, m in zip(self.nodes, self.masses)}

    def mass_at(self, point: np.ndarray) -> np.ndarray:
        """Mass at the node snapping to ``point`` (zero when absent)."""
        key = np.round(np.asarray(point, dtype=float) / self.quantum).astype(np.int64)
        hit = np.all(self.keys == key, axis=1)
        if not np.any(hit):
            return np.zeros(self.masses.shape[1])
        return self.masses[np.argmax(hit)]

    def norms(self) -> np.ndarray:
        """Euclidean norm of each node mass."""
        return np.linalg.norm(self.masses, axis=1)

    def restricted(self, region: Box | Triangulation, margin: float = 0.0) -> BoundaryLedger:
        """Entries located in the open region shrunk by ``margin``."""
        inside = region.contains(self.nodes, margin=margin)
        return BoundaryLedger(
            self.nodes[inside], self.masses[inside], self.keys[inside], self.quantum
        )

    def __add__(self, other: BoundaryLedger) -> BoundaryLedger:
        if len(self) == 0:
            return other
        if len(other) == 0:
            return self
        keys = np.vstack([self.keys, other.keys])
        _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.reshape(-1)
        masses = np.zeros((len(first), self.masses.shape[1]))
        np.add.at(masses, inverse, np.vstack([self.masses, other.masses]))
        nodes = np.vstack([self.nodes, other.nodes])[first]
        keep = np.any(masses != 0.0, axis=1)
        return BoundaryLedger(nodes[keep], masses[keep], keys[first][keep], self.quantum)


def boundary_ledger(
    current: PolyhedralCurrent,
    quantum: float | None = None,
    mass_tolerance: float = 0.0,
) -> BoundaryLedger:
    """Accumulate the boundary masses of a polyhedral current.

    Each segment contributes ``+b`` at its start and ``-b`` at its end. Node
    coordinates are snapped to a grid of spacing ``quantum`` before merging.

    Parameters
    ----------
    current : PolyhedralCurrent
        The current.
    quantum : float, optional
        Snapping grid spacing; defaults to ``current.default_quantum()``.
    mass_tolerance : float
        Entries with ``|mass| <= mass_tolerance`` are dropped.

    Returns
    -------
    BoundaryLedger
        Ledger sorted by node key.

    Raises
    ------
    AmbiguousNodeError
        If two nodes snap to different grid cells but lie closer than ``quantum``.

    Examples
    --------
    >>> mu = PolyhedralCurrent([[0, 0, 0]], [[1, 0, 0]], [[1.0]])
    >>> boundary_ledger(mu).masses.ravel().tolist()
    [1.0, -1.0]
    """
    q = current.default_quantum() if quantum is None else quantum
    if len(current) == 0:
        return BoundaryLedger(
            np.zeros((0, 3)), np.zeros((0, current.n)), np.zeros((0, 3), dtype=np.int64), q
        )
    nodes = np.vstack([current.starts, current.ends])
    masses = np.vstack([current.burgers, -current.burgers])
    keys = np.round(nodes / q).astype(np.int64)
    unique_keys, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    accumulated = np.zeros((len(first), current.n))
    np.add.at(accumulated, inverse, masses)
    representatives = nodes[first]

    if len(representatives) > 1:
        pairs = cKDTree(representatives).query_pairs(r=q, output_type="ndarray")
        if len(pairs):
            a, b = pairs[0]
            raise AmbiguousNodeError(
                f"Ambiguous node merge: {representatives[a].tolist()} and "
                f"{representatives[b].tolist()} are closer than the quantum {q:.3e}",
                representatives[a],
                representatives[b],
            )

    keep = np.linalg.norm(accumulated, axis=1) > mass_tolerance
    return BoundaryLedger(representatives[keep], accumulated[keep], unique_keys[keep], q)


@dataclass(frozen=True)
class DivergenceReport:
    """Result of :func:`check_divergence_free`.

    Attributes
    ----------
    passed : bool
        Whether every node in the region balances within tolerance.
    worst_node : tuple[float, float, float] | None
        Node with the largest imbalance in the region.
    worst_mass : float
        Norm of that imbalance.
    offending : list[tuple[float, float, float]]
        All nodes above tolerance.
    """

    passed: bool
    worst_node: tuple[float, float, float] | None
    worst_mass: float
    offending: list[tuple[float, float, float]]

    def __bool__(self) -> bool:
        return self.passed


def check_divergence_free(
    current: PolyhedralCurrent,
    region: Box | Triangulation | None = None,
    tolerance: float = 1e-10,
    quantum: float | None = None,
) -> DivergenceReport:
    """Check vector-mass balance at every node inside an open region.

    Parameters
    ----------
    current : PolyhedralCurrent
        The current.
    region : Box or Triangulation, optional
        Open region Omega; nodes on or outside its boundary are exempt. ``None``
        checks every node.
    tolerance : float
        Absolute tolerance on the node mass norm.
    quantum : float, optional
        Node snapping quantum.

    Returns
    -------
    DivergenceReport
        Pass flag, worst node and the list of offending nodes.
    """
    ledger = boundary_ledger(current, quantum)
    if region is not None:
        ledger = ledger.restricted(region, margin=4.0 * ledger.quantum)
    if ledger.is_empty:
        return DivergenceReport(True, None, 0.0, [])
    norms = ledger.norms()
    worst = int(np.argmax(norms))
    bad = norms > tolerance
    offending = [tuple(float(x) for x in p) for p in ledger.nodes[bad]]
    return DivergenceReport(
        passed=not bool(np.any(bad)),
        worst_node=tuple(float(x) for x in ledger.nodes[worst]),
        worst_mass=float(norms[worst]),
        offending=offending,
    )


def pair_with_gradient(current: PolyhedralCurrent, phi: VectorField) -> float:
    """Exact pairing ``<mu, grad phi>`` with an R^N-valued test function.

    Along a straight segment with constant b the integral of ``<b, d phi/d tau>``
    is ``<b, phi(end) - phi(start)>``, so no quadrature is needed.

    Parameters
    ----------
    current : PolyhedralCurrent
        The current.
    phi : callable
        Maps points ``(M, 3)`` to values ``(M, N)``.
    """
    if len(current) == 0:
        return 0.0
    diff = phi(current.ends) - phi(current.starts)
    return float(np.sum(current.burgers * diff))


def pair_via_ledger(
    current: PolyhedralCurrent, phi: VectorField, quantum: float | None = None
) -> float:
    """Pairing with a gradient computed from the boundary ledger instead of the segments."""
    ledger = boundary_ledger(current, quantum)
    if ledger.is_empty:
        return 0.0
    return -float(np.sum(ledger.masses * phi(ledger.nodes)))


def _clip(
    current: PolyhedralCurrent, window: Box | None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return clipped starts, ends and the kept row mask."""
    if window is None:
        return current.starts, current.ends, np.ones(len(current), dtype=bool)
    t = window.clip_parameters(current.starts, current.ends)
    keep = t[:, 1] > t[:, 0]
    d = current.ends - current.starts
    starts = current.starts + t[:, 0:1] * d
    ends = current.starts + t[:, 1:2] * d
    return starts[keep], ends[keep], keep


def pair_with_matrix_field(
    current: PolyhedralCurrent,
    phi: Callable[[np.ndarray], np.ndarray],
    order: int = 2,
    window: Box | None = None,
) -> float:
    """Approximate ``sum_i int_{segment_i} <phi, b_i (x) tau_i> dH^1`` by Gauss-Legendre.

    Parameters
    ----------
    current : PolyhedralCurrent
        The current.
    phi : callable
        Maps points ``(M, 3)`` to matrices ``(M, N, 3)``.
    order : int
        Number of Gauss-Legendre nodes per segment; exact for polynomial
        ``phi`` of degree at most ``2 * order - 1``.
    window : Box, optional
        Only the parts of segments inside this box are integrated.

    Raises
    ------
    ValueError
        If ``order < 1``.
    """
    if order < 1:
        raise ValueError(f"Quadrature order must be at least 1, got {order}")
    if len(current) == 0:
        return 0.0
    starts, ends, keep = _clip(current, window)
    if len(starts) == 0:
        return 0.0
    x, w = leggauss(order)
    s = 0.5 * (x + 1.0)
    w = 0.5 * w
    d = ends - starts
    points = starts[:, None, :] + s[None, :, None] * d[:, None, :]
    values = phi(points.reshape(-1, 3)).reshape(len(starts), order, current.n, 3)
    integrand = np.einsum("mqij,mi,mj->mq", values, current.burgers[keep], d)
    return float(integrand @ w)


def total_variation(current: PolyhedralCurrent) -> float:
    """Total variation ``sum |b| * length``."""
    return float(np.sum(np.linalg.norm(current.burgers, axis=1) * current.lengths))


def total_variation_on(current: PolyhedralCurrent, box: Box) -> float:
    """Total variation of the restriction to a closed box."""
    if len(current) == 0:
        return 0.0
    fraction = box.clipped_fraction(current.starts, current.ends)
    return float(np.sum(np.linalg.norm(current.burgers, axis=1) * current.lengths * fraction))


def length_in(current: PolyhedralCurrent, box: Box | None = None) -> np.ndarray:
    """Length of each segment inside ``box`` (full length when ``box`` is None)."""
    if box is None or len(current) == 0:
        return current.lengths
    return current.lengths * box.clipped_fraction(current.starts, current.ends)


def overlap_measure(current: PolyhedralCurrent, direction_tol: float = 1e-9) -> float:
    """H^1 measure of the set where two or more segments overlap.

    Segments are grouped by their supporting line (direction and foot point
    snapped to a grid); overlaps are swept per group.
    """
    if len(current) < 2:
        return 0.0
    tau = current.tangents
    foot = current.starts - np.einsum("ij,ij->i", current.starts, tau)[:, None] * tau
    q = 1e3 * current.default_quantum()
    line_keys = np.hstack(
        [np.round(tau / direction_tol).astype(np.int64), np.round(foot / q).astype(np.int64)]
    )
    _, inverse = np.unique(line_keys, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    s0 = np.einsum("ij,ij->i", current.starts, tau)
    s1 = np.einsum("ij,ij->i", current.ends, tau)
    total = 0.0
    for group in np.flatnonzero(np.bincount(inverse) > 1):
        rows = np.flatnonzero(inverse == group)
        order = np.argsort(s0[rows], kind="stable")
        reach = -math.inf
        for r in rows[order]:
            if reach > s0[r]:
                total += min(reach, s1[r]) - s0[r]
            reach = max(reach, s1[r])
    return float(total)


@dataclass(frozen=True, eq=False)
class Loop:
    """Closed polygon with a constant multiplicity.

    Attributes
    ----------
    vertices : np.ndarray
        Polygon vertices, shape ``(L, 3)``; the last vertex connects back to the first.
    burgers : np.ndarray
        Multiplicity theta in R^N.
    """

    vertices: np.ndarray
    burgers: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.vertices, dtype=float).reshape(-1, 3)
        if len(v) < 2:
            raise ValueError("A loop needs at least two vertices")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "burgers", np.array(self.burgers, dtype=float).reshape(-1))

    @property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(starts, ends)`` of the closed polygon."""
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    @property
    def length(self) -> float:
        """Perimeter of the polygon."""
        starts, ends = self.edges
        return float(np.linalg.norm(ends - starts, axis=1).sum())

    def length_in(self, box: Box) -> float:
        """Perimeter inside a closed box."""
        starts, ends = self.edges
        lengths = np.linalg.norm(ends - starts, axis=1)
        return float(np.sum(lengths * box.clipped_fraction(starts, ends)))

    def to_current(self) -> PolyhedralCurrent:
        """Return the loop as a current."""
        starts, ends = self.edges
        return PolyhedralCurrent(starts, ends, np.tile(self.burgers, (len(starts), 1)))


def loops_to_current(
    loops: Sequence[Loop], n: int, quantum: float | None = None
) -> PolyhedralCurrent:
    """Re-sum loops into one current, merging coincident segments."""
    if not loops:
        return PolyhedralCurrent.empty(n)
    starts = np.vstack([lp.edges[0] for lp in loops])
    ends = np.vstack([lp.edges[1] for lp in loops])
    burgers = np.vstack([np.tile(lp.burgers, (len(lp.vertices), 1)) for lp in loops])
    return PolyhedralCurrent(starts, ends, burgers).merged(quantum)


def _arc(a: np.ndarray, b: np.ndarray, max_step: float) -> list[np.ndarray]:
    """Points on the great circle from unit vector a to b, excluding a, with hops <= max_step."""
    angle = float(np.arccos(np.clip(np.dot(a, b), -1.0, 1.0)))
    if angle < 1e-12:
        return [b]
    if angle > np.pi - 1e-6:
        helper = np.eye(3)[int(np.argmin(np.abs(a)))]
        mid = np.cross(a, helper)
        mid /= np.linalg.norm(mid)
        return _arc(a, mid, max_step) + _arc(mid, b, max_step)
    steps = max(1, math.ceil(angle / max_step))
    sin_angle = math.sin(angle)
    points = []
    for i in range(1, steps + 1):
        s = i / steps
        p = (math.sin((1.0 - s) * angle) * a + math.sin(s * angle) * b) / sin_angle
        points.append(p / np.linalg.norm(p))
    points[-1] = b
    return points


def close_outside(
    current: PolyhedralCurrent,
    domain: Box,
    quantum: float | None = None,
    radius_factor: float = 4.0,
    tolerance: float = 0.0,
) -> PolyhedralCurrent:
    """Close a current by paths that stay outside the closed domain.

    Every node outside the open domain with a nonzero ledger mass m is joined to
    a common hub on the sphere of radius ``radius_factor * domain.circumradius``
    by a polygon carrying m (radially out to the sphere, then along great-circle
    hops of at most 80 degrees). Masses at the hub sum to zero, so the result is
    closed wherever the input was, and its restriction to the domain is unchanged.

    Parameters
    ----------
    current : PolyhedralCurrent
        Current whose imbalanced nodes outside the domain are to be closed.
    domain : Box
        The domain Omega.
    quantum : float, optional
        Node snapping quantum.
    radius_factor : float
        Radius of the routing sphere in units of the domain circumradius (> 1.5).
    tolerance : float
        Ledger entries below this norm are left alone.
    """
    if radius_factor <= 1.5:
        raise ValueError("radius_factor must exceed 1.5 so routes stay outside the domain")
    ledger = boundary_ledger(current, quantum, mass_tolerance=tolerance)
    outside = ~domain.contains(ledger.nodes, margin=4.0 * ledger.quantum)
    if not np.any(outside):
        return current
    center = domain.center
    radius = radius_factor * domain.circumradius
    hub_dir = HUB_DIRECTION / np.linalg.norm(HUB_DIRECTION)
    hub = center + radius * hub_dir
    max_step = np.deg2rad(80.0)
    min_hop = 16.0 * ledger.quantum

    starts: list[np.ndarray] = []
    ends: list[np.ndarray] = []
    burgers: list[np.ndarray] = []
    for node, mass in zip(ledger.nodes[outside], ledger.masses[outside]):
        offset = node - center
        a = offset / np.linalg.norm(offset)
        on_sphere = center + radius * a
        # path from the node to the hub, reversed below so it runs hub -> node
        path = [node]
        if np.linalg.norm(on_sphere - node) > min_hop:
            path.append(on_sphere)
        path.extend(center + radius * p for p in _arc(a, hub_dir, max_step))
        path[-1] = hub
        path = path[::-1]
        points = [path[0]]
        for p in path[1:-1]:
            if np.linalg.norm(p - points[-1]) > min_hop:
                points.append(p)
        if len(points) > 1 and np.linalg.norm(path[-1] - points[-1]) <= min_hop:
            points[-1] = path[-1]
        else:
            points.append(path[-1])
        for p, r in zip(points[:-1], points[1:]):
            starts.append(p)
            ends.append(r)
            burgers.append(mass)
    logger.debug(f"Closed {int(outside.sum())} boundary nodes through the hub")
    if not starts:
        return current
    closure = PolyhedralCurrent(np.array(starts), np.array(ends), np.array(burgers))
    return current + closure


def decompose_into_loops(
    current: PolyhedralCurrent,
    quantum: float | None = None,
    tol: float = 1e-9,
) -> list[Loop]:
    """Split a closed polyhedral current into loops with constant multiplicity.

    Each coordinate of the multiplicity is handled as a scalar edge flow on the
    node graph. Edges are oriented so flows are positive, then cycles are peeled
    by walking until a node repeats (lexicographically smallest successor
    first) and subtracting the smallest flow on the cycle. Every loop carries
    ``f * e_c`` with ``f > 0``.

    Parameters
    ----------
    current : PolyhedralCurrent
        A current whose ledger vanishes everywhere.
    quantum : float, optional
        Node snapping quantum.
    tol : float
        Relative tolerance (times the largest multiplicity) for balance and for
        dropping exhausted edges.

    Returns
    -------
    list[Loop]
        Loops whose sum reproduces the current segment by segment.

    Raises
    ------
    LoopDecompositionError
        If some node is not balanced.
    """
    if len(current) == 0:
        return []
    q = current.default_quantum() if quantum is None else quantum
    scale = float(np.abs(current.burgers).max())
    threshold = tol * scale

    ledger = boundary_ledger(current, q)
    if not ledger.is_empty:
        norms = ledger.norms()
        worst = int(np.argmax(norms))
        if norms[worst] > threshold:
            raise LoopDecompositionError(
                f"Node {ledger.nodes[worst].tolist()} carries net mass {norms[worst]:.3e}; "
                "the current is not closed",
                ledger.nodes[worst],
            )

    nodes = np.vstack([current.starts, current.ends])
    keys = np.round(nodes / q).astype(np.int64)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.reshape(-1)
    coords = nodes[first]
    m = len(current)
    u_ids, v_ids = inverse[:m], inverse[m:]

    loops: list[Loop] = []
    for c in range(current.n):
        flow = current.burgers[:, c]
        active = (flow != 0.0) & (u_ids != v_ids)
        if not np.any(active):
            continue
        a = np.minimum(u_ids[active], v_ids[active])
        b = np.maximum(u_ids[active], v_ids[active])
        signed = np.where(u_ids[active] < v_ids[active], flow[active], -flow[active])
        pairs, pair_inverse = np.unique(np.column_stack([a, b]), axis=0, return_inverse=True)
        net = np.zeros(len(pairs))
        np.add.at(net, pair_inverse.reshape(-1), signed)

        graph = nx.DiGraph()
        for (pa, pb), f in zip(pairs.tolist(), net.tolist()):
            if f > threshold:
                graph.add_edge(pa, pb, flow=f)
            elif f < -threshold:
                graph.add_edge(pb, pa, flow=-f)

        unit = np.zeros(current.n)
        unit[c] = 1.0
        before = len(loops)
        for start in sorted(graph.nodes):
            while graph.out_degree(start) > 0:
                loops.extend(_peel_from(graph, start, coords, unit, threshold))
        logger.debug(f"Component {c}: peeled {len(loops) - before} loops")
    return loops


def _peel_from(
    graph: nx.DiGraph,
    start: int,
    coords: np.ndarray,
    unit: np.ndarray,
    threshold: float,
) -> list[Loop]:
    """Peel cycles reachable from ``start`` until its out-edges are exhausted."""
    loops = []
    path = [start]
    position = {start: 0}
    while path:
        node = path[-1]
        successors = graph.succ[node]
        if not successors:
            if len(path) == 1:
                break
            raise LoopDecompositionError(
                f"Flow peeling got stuck at node {coords[node].tolist()}", coords[node]
            )
        nxt = min(successors)
        if nxt not in position:
            position[nxt] = len(path)
            path.append(nxt)
            continue
        cycle = path[position[nxt]:]
        edges = list(zip(cycle, cycle[1:] + [nxt]))
        flows = [graph[x][y]["flow"] for x, y in edges]
        f_min = min(flows)
        for (x, y), f in zip(edges, flows):
            remaining = f - f_min
            if remaining <= threshold:
                graph.remove_edge(x, y)
            else:
                graph[x][y]["flow"] = remaining
        loops.append(Loop(coords[cycle], f_min * unit))
        for dropped in path[position[nxt] + 1:]:
            del position[dropped]
        path = path[: position[nxt] + 1]
        if len(path) == 1 and graph.out_degree(start) == 0:
            break
    return loops


def round_multiplicities(
    loops: Sequence[Loop],
    sigma: float,
    n: int,
    quantum: float | None = None,
    tol: float = 1e-12,
) -> PolyhedralCurrent:
    """Round every loop multiplicity down to the lattice sigma Z^N and re-sum.

    The componentwise floor ``sigma * floor(theta / sigma)`` is applied per loop
    before summation, so each loop stays closed with a constant multiplicity.
    Quotients within ``tol`` (relative) below an integer count as that integer.

    Parameters
    ----------
    loops : Sequence[Loop]
        Loop decomposition of a current.
    sigma : float
        Lattice spacing (> 0).
    n : int
        Dimension N of the multiplicities.
    quantum : float, optional
        Node snapping quantum used when merging.
    tol : float
        Relative slack of the floor.

    Raises
    ------
    ValueError
        If ``sigma <= 0``.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    rounded = []
    for lp in loops:
        z = lp.burgers / sigma
        theta = sigma * np.floor(z + tol * np.maximum(1.0, np.abs(z)))
        if np.any(theta != 0.0):
            rounded.append(Loop(lp.vertices, theta))
    return loops_to_current(rounded, n, quantum).with_sigma(sigma)


def write_csv(current: PolyhedralCurrent, path: str | Path) -> None:
    """Write segments as ``x0,y0,z0,x1,y1,z1,b1..bN`` with round-trip float formatting.

    Raises
    ------
    ExportError
        If the file cannot be written.
    """
    header = ["x0", "y0", "z0", "x1", "y1", "z1"] + [f"b{i + 1}" for i in range(current.n)]
    try:
        with open(path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            for s, e, b in zip(current.starts, current.ends, current.burgers):
                writer.writerow([repr(float(x)) for x in (*s, *e, *b)])
    except OSError as e:
        raise ExportError(f"Cannot write geometry to {path}", original_error=e) from e


def read_csv(path: str | Path, sigma: float | None = None) -> PolyhedralCurrent:
    """Read a current written by :func:`write_csv`.

    Raises
    ------
    ExportError
        If the file cannot be read or a row has the wrong number of columns.
    """
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    except OSError as e:
        raise ExportError(f"Cannot read geometry from {path}", original_error=e) from e
    if not rows:
        raise ExportError(f"{path}: missing header")
    n = len(rows[0]) - 6
    if n < 1:
        raise ExportError(f"{path}: header needs at least 7 columns")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != n + 6:
            raise ExportError(f"{path}:{lineno}: expected {n + 6} columns, got {len(row)}")
        data.append([float(x) for x in row])
    if not data:
        return PolyhedralCurrent.empty(n, sigma)
    array = np.array(data)
    return PolyhedralCurrent(array[:, 0:3], array[:, 3:6], array[:, 6:], sigma)


def _burgers_tag(burgers: np.ndarray) -> str:
    return "b=" + ",".join(f"{x:.12g}" for x in burgers)


def write_obj(geometry: PolyhedralCurrent | Sequence[Loop], path: str | Path) -> None:
    """Write polylines in Wavefront OBJ format.

    A current is written with one object per segment, a loop list with one
    closed polyline object per loop. Object names carry the multiplicity.

    Raises
    ------
    ExportError
        If the file cannot be written.
    """
    try:
        with open(path, "w", encoding="utf-8") as handle:
            index = 1
            if isinstance(geometry, PolyhedralCurrent):
                for i, (s, e, b) in enumerate(
                    zip(geometry.starts, geometry.ends, geometry.burgers)
                ):
                    handle.write(f"o segment_{i}_{_burgers_tag(b)}\n")
                    handle.write("v " + " ".join(repr(float(x)) for x in s) + "\n")
                    handle.write("v " + " ".join(repr(float(x)) for x in e) + "\n")
                    handle.write(f"l {index} {index + 1}\n")
                    index += 2
            else:
                for i, lp in enumerate(geometry):
                    handle.write(f"o loop_{i}_{_burgers_tag(lp.burgers)}\n")
                    for p in lp.vertices:
                        handle.write("v " + " ".join(repr(float(x)) for x in p) + "\n")
                    ids = list(range(index, index + len(lp.vertices)))
                    handle.write("l " + " ".join(str(j) for j in ids + [ids[0]]) + "\n")
                    index += len(lp.vertices)
    except OSError as e:
        raise ExportError(f"Cannot write geometry to {path}", original_error=e) from e
