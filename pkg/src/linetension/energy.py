# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Line-tension energies and the upper/lower bound experiments.

``E_sigma`` charges a lattice current ``sigma psi(b / sigma, t)`` per unit
length, ``F_inf`` charges a cone-valued current ``psi_inf(b, t)`` and the limit
energy ``E_0`` integrates the convex envelope over a field. The upper-bound
experiment builds recovery currents from envelope certificates, closes them
outside the domain, splits them into loops and rounds the loops to
``sigma Z^N``; the lower-bound diagnostics check the one-sided inequalities
between the three energies on the resulting currents.

Infinite energies are returned as ``math.inf`` and never clipped.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .construction import ConstructionOptions, GluedMeasure, glue
from .currents import (
    PolyhedralCurrent,
    close_outside,
    decompose_into_loops,
    length_in,
    round_multiplicities,
    total_variation_on,
)
from .densities import DensitySpec, PropertyCheck, RecessionEvaluator, rational_direction
from .envelope import EnvelopeEvaluator
from .errors import NonLatticeMultiplicityError
from .fields import PiecewiseConstantField, e0_energy
from .geometry import Box

logger = logging.getLogger(__name__)

LATTICE_TOLERANCE = 1e-9


def e_sigma(
    current: PolyhedralCurrent,
    psi: DensitySpec,
    sigma: float,
    window: Box | None = None,
    strict: bool = True,
    tol: float = LATTICE_TOLERANCE,
) -> float:
    """Energy ``sum sigma psi(b / sigma, t) H1(segment in window)``.

    Parameters
    ----------
    current : PolyhedralCurrent
        Current with multiplicities in ``sigma Z^N``.
    psi : DensitySpec
        Line-tension density on integer vectors.
    sigma : float
        Lattice spacing (> 0).
    window : Box, optional
        Omega; segments count fully when omitted.
    strict : bool
        Raise on multiplicities off the lattice instead of returning ``math.inf``.
    tol : float
        Relative distance to the lattice still accepted as on it.

    Raises
    ------
    ValueError
        If ``sigma <= 0``.
    NonLatticeMultiplicityError
        If ``strict`` and a multiplicity lies off ``sigma Z^N``.

    Examples
    --------
    A unit segment with multiplicity ``sigma e_1`` under ``psi = |z|``:

    >>> from linetension.densities import IsotropicDensity
    >>> seg = PolyhedralCurrent(np.zeros((1, 3)), np.array([[0.0, 0.0, 1.0]]), [[0.25]])
    >>> e_sigma(seg, IsotropicDensity(), 0.25)
    0.25
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    lengths = length_in(current, window)
    keep = (lengths > 0.0) & np.any(current.burgers != 0.0, axis=1)
    if not np.any(keep):
        return 0.0
    z = current.burgers[keep] / sigma
    nearest = np.round(z)
    off = np.abs(z - nearest).max(axis=1) > tol * np.maximum(1.0, np.abs(z).max(axis=1))
    if np.any(off):
        worst = int(np.flatnonzero(off)[0])
        message = (
            f"Multiplicity {current.burgers[keep][worst].tolist()} is not in "
            f"{sigma:g} Z^N"
        )
        if strict:
            raise NonLatticeMultiplicityError(message)
        logger.info(f"{message}; energy is infinite")
        return math.inf
    values = psi.evaluate(nearest, current.tangents[keep])
    return float(sigma * np.sum(values * lengths[keep]))


def _recession_on_segments(
    psi: DensitySpec, burgers: np.ndarray, tangents: np.ndarray, s_max: int, tol: float
) -> np.ndarray:
    """``psi_inf(b, t)`` per row, sharing the cone test between equal b."""
    out = np.empty(len(burgers))
    unique, inverse = np.unique(burgers, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    s = np.arange(1, s_max + 1, dtype=float)
    for u, b in enumerate(unique):
        rows = np.flatnonzero(inverse == u)
        if not np.any(b):
            out[rows] = 0.0
            continue
        found = rational_direction(b, tol=tol)
        if found is None:
            out[rows] = math.inf
            continue
        z, lam = found
        best = np.full(len(rows), math.inf)
        for multiple in s:
            zs = np.broadcast_to(multiple * z, (len(rows), len(z)))
            best = np.minimum(best, psi.evaluate(zs, tangents[rows]) / multiple)
        out[rows] = lam * best
    return out


def f_infinity(
    current: PolyhedralCurrent,
    psi: DensitySpec | RecessionEvaluator,
    window: Box | None = None,
    s_max: int = 64,
    tol: float = LATTICE_TOLERANCE,
) -> float:
    """Energy ``sum psi_inf(b, t) H1(segment in window)``.

    Multiplicities outside the cone of positive multiples of integer vectors
    give ``math.inf``.

    Parameters
    ----------
    current : PolyhedralCurrent
        Polyhedral current.
    psi : DensitySpec or RecessionEvaluator
        Density (its recession is sampled up to ``s_max``) or a ready evaluator.
    window : Box, optional
        Omega; segments count fully when omitted.
    s_max : int
        Recession sampling depth when ``psi`` is a density.
    tol : float
        Cone-membership tolerance.
    """
    if isinstance(psi, RecessionEvaluator):
        density, s_max, tol = psi.psi, psi.s_max, psi.tol
    else:
        density = psi
    lengths = length_in(current, window)
    keep = (lengths > 0.0) & np.any(current.burgers != 0.0, axis=1)
    if not np.any(keep):
        return 0.0
    values = _recession_on_segments(
        density, current.burgers[keep], current.tangents[keep], s_max, tol
    )
    if not np.all(np.isfinite(values)):
        return math.inf
    return float(np.sum(values * lengths[keep]))


@dataclass(frozen=True)
class EnergyRow:
    """One line of an energy report.

    Construction rows have ``sigma = nan``; rounding rows carry the loop
    energies at one sigma for the largest k. ``sigma`` is relative to
    ``sigma_unit``, the rounded current lives on ``(sigma * sigma_unit) Z^N``
    and ``segments`` counts its segments inside the window. ``eta_mass`` is
    reported next to the step bound and never enters it.
    """

    k: int
    epsilon: float
    sigma: float
    e0: float
    e0_bound: float
    f_infinity: float
    f_infinity_nu: float
    eta_mass: float
    step_bound: float
    step_holds: bool
    e_sigma: float = math.nan
    gap: float = math.nan
    gap_bound: float = math.nan
    within_bound: bool = True
    loops: int = 0
    sigma_unit: float = math.nan
    segments: int = 0


@dataclass
class EnergyReport:
    """Rows, fitted rates and the rounded currents of an upper-bound experiment.

    Attributes
    ----------
    density : str
        Name of psi.
    window : Box
        Evaluation window Omega.
    rows : list[EnergyRow]
        Construction rows and rounding rows.
    rates : dict[str, float]
        Fitted log-log slopes of ``|E_sigma - F_inf|`` against sigma, per epsilon.
    measures : dict[float, GluedMeasure]
        Recovery measure at the largest k, per epsilon.
    rounded : dict[tuple[float, float], PolyhedralCurrent]
        Rounded currents keyed by ``(epsilon, sigma)`` with sigma relative; each
        current carries its absolute spacing in ``sigma``.
    sigma_units : dict[float, float]
        Absolute spacing of ``sigma = 1``, per epsilon.
    flags : list[str]
        Failures: the step bound at the largest k, empty or infinite rounded
        energies, rounding gaps above their bound and slow sigma-rates.
    """

    density: str
    window: Box
    rows: list[EnergyRow] = field(default_factory=list)
    rates: dict[str, float] = field(default_factory=dict)
    measures: dict[float, GluedMeasure] = field(default_factory=dict)
    rounded: dict[tuple[float, float], PolyhedralCurrent] = field(default_factory=dict)
    sigma_units: dict[float, float] = field(default_factory=dict)
    flags: list[str] = field(default_factory=list)

    def to_rows(self) -> list[dict[str, Any]]:
        """Rows as plain dictionaries in column order."""
        return [dict(row.__dict__) for row in self.rows]

    @property
    def passed(self) -> bool:
        """Whether no failure was flagged."""
        return not self.flags


def _certificates(
    field: PiecewiseConstantField, evaluator: EnvelopeEvaluator, epsilon: float
) -> tuple[list, float]:
    decompositions = []
    total = 0.0
    for index, (tet, a) in enumerate(zip(field.mesh.tets, field.matrices)):
        result = evaluator.certificate(a, epsilon)
        decompositions.append(result.certificate)
        total += result.value * tet.volume
        logger.debug(
            f"tet {index}: certificate with {len(result.certificate)} terms, "
            f"value {result.value:.6g} at level {result.level}"
        )
    return decompositions, total


def line_weight(glued: GluedMeasure) -> float:
    """Largest lattice-line multiplicity ``|b_j|_inf / k**4`` of a glued measure."""
    weights = [
        float(np.abs(c.decomposition.burgers).max(initial=0.0)) / glued.k**4
        for c in glued.constructions
        if len(c.decomposition)
    ]
    return max(weights, default=0.0)


def _fit_sigma_rate(sigmas: Sequence[float], gaps: Sequence[float]) -> float:
    x = np.asarray(sigmas, dtype=float)
    y = np.asarray(gaps, dtype=float)
    keep = np.isfinite(y) & (y > 0)
    if keep.sum() < 2:
        return math.nan
    slope, _ = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return float(slope)


def upper_bound_experiment(
    field: PiecewiseConstantField,
    psi: DensitySpec,
    ks: Sequence[int],
    sigmas: Sequence[float],
    epsilons: Sequence[float] = (0.01,),
    evaluator: EnvelopeEvaluator | None = None,
    seed: int = 0,
    options: ConstructionOptions | None = None,
    workers: int = 1,
    rel_tol: float = 0.03,
    sigma_unit: float | None = None,
    min_sigma_rate: float = 0.8,
) -> EnergyReport:
    """Build recovery currents from envelope certificates and round them.

    For every epsilon, each tetrahedron's matrix is decomposed by the coarsest
    envelope certificate within epsilon of the finest level. For every k the
    glued measure ``mu`` gives ``F_inf(mu)``, compared with the step bound
    ``E_0 + epsilon L3(Omega)`` up to the relative slack ``rel_tol``; the mass
    of ``eta`` in Omega is reported beside it. Only the largest k is flagged
    when the bound fails. At the largest k the measure is closed outside
    Omega, split into loops, rounded at every sigma and charged with
    ``E_sigma``; the gap to ``F_inf`` is compared with
    ``c_bar sigma sqrt(N)`` times the loop length in Omega.

    Spacings are relative: ``sigma`` rounds to ``(sigma * sigma_unit) Z^N``.
    The default unit is the largest lattice-line weight ``|b|_inf / k**4``,
    the scale of the multiplicities being rounded.

    Parameters
    ----------
    field : PiecewiseConstantField
        Field satisfying the normal-jump condition.
    psi : DensitySpec
        Line-tension density.
    ks : sequence of int
        Resolutions (>= 2); the largest is used for rounding.
    sigmas : sequence of float
        Relative lattice spacings (> 0).
    epsilons : sequence of float
        Certificate slacks (>= 0).
    evaluator : EnvelopeEvaluator, optional
        Envelope; a default ladder is built when omitted.
    seed : int
        Run seed.
    options : ConstructionOptions, optional
        Construction constants.
    workers : int
        Threads per gluing.
    rel_tol : float
        Relative slack of the step bound.
    sigma_unit : float, optional
        Absolute spacing of ``sigma = 1``.
    min_sigma_rate : float
        Smallest accepted log-log slope of the rounding gap against sigma.

    Returns
    -------
    EnergyReport
        Rows per (k, epsilon) and per (sigma, epsilon), rates and currents.
    """
    if not ks or not sigmas or not epsilons:
        raise ValueError("ks, sigmas and epsilons must be nonempty")
    if any(s <= 0 for s in sigmas):
        raise ValueError("sigma values must be positive")
    if any(e < 0 for e in epsilons):
        raise ValueError("epsilon values must be nonnegative")
    if sigma_unit is not None and sigma_unit <= 0:
        raise ValueError(f"sigma_unit must be positive, got {sigma_unit}")
    evaluator = evaluator or EnvelopeEvaluator(psi, field.n)
    window = field.mesh.domain
    report = EnergyReport(density=psi.name, window=window)
    c_bar = psi.upper
    k_top = max(ks)
    rec = evaluator.recession

    for epsilon in epsilons:
        decompositions, _ = _certificates(field, evaluator, epsilon)
        e0 = e0_energy(field, evaluator, window)
        e0_bound = e0 + epsilon * window.volume
        step_bound = e0_bound + rel_tol * max(e0_bound, 1e-300)
        for k in sorted(ks):
            glued = glue(field, k, decompositions, seed=seed, options=options, workers=workers)
            f_inf = f_infinity(glued.measure, rec, window)
            f_nu = f_infinity(glued.nu, rec, window)
            eta_mass = total_variation_on(glued.eta, window)
            holds = f_inf <= step_bound
            report.rows.append(
                EnergyRow(
                    k=k,
                    epsilon=epsilon,
                    sigma=math.nan,
                    e0=e0,
                    e0_bound=e0_bound,
                    f_infinity=f_inf,
                    f_infinity_nu=f_nu,
                    eta_mass=eta_mass,
                    step_bound=step_bound,
                    step_holds=bool(holds),
                )
            )
            logger.info(
                f"epsilon={epsilon:g}, k={k}: E0 {e0:.6g}, F_inf {f_inf:.6g}, "
                f"F_inf(nu) {f_nu:.6g}, |eta| {eta_mass:.4g}"
            )
            if k == k_top:
                report.measures[epsilon] = glued
                if not holds:
                    report.flags.append(
                        f"k={k}, epsilon={epsilon:g}: F_inf {f_inf:.6g} exceeds "
                        f"E0 + epsilon L3 = {e0_bound:.6g} by more than {rel_tol:.0%} "
                        f"(|eta| in Omega {eta_mass:.4g})"
                    )

        glued = report.measures[epsilon]
        top = report.rows[-1]
        unit = sigma_unit if sigma_unit is not None else line_weight(glued)
        if unit <= 0.0:
            logger.info(f"epsilon={epsilon:g}: zero measure, nothing to round")
            continue
        report.sigma_units[epsilon] = unit
        closed = close_outside(glued.measure, window)
        loops = decompose_into_loops(closed)
        loop_length = float(sum(lp.length_in(window) for lp in loops))
        logger.info(
            f"epsilon={epsilon:g}: {len(loops)} loops, length {loop_length:.6g} in Omega, "
            f"sigma unit {unit:.4g}"
        )
        gaps = []
        for sigma in sigmas:
            spacing = sigma * unit
            rounded = round_multiplicities(loops, spacing, field.n)
            segments = int(np.count_nonzero(length_in(rounded, window) > 0.0))
            energy = e_sigma(rounded, psi, spacing, window, strict=False)
            gap = abs(energy - top.f_infinity) if math.isfinite(energy) else math.inf
            bound = c_bar * spacing * math.sqrt(field.n) * loop_length
            within = gap <= bound + 1e-12 * max(1.0, top.f_infinity)
            report.rounded[(epsilon, sigma)] = rounded
            report.rows.append(
                EnergyRow(
                    k=k_top,
                    epsilon=epsilon,
                    sigma=sigma,
                    e0=e0,
                    e0_bound=e0_bound,
                    f_infinity=top.f_infinity,
                    f_infinity_nu=top.f_infinity_nu,
                    eta_mass=top.eta_mass,
                    step_bound=math.nan,
                    step_holds=True,
                    e_sigma=energy,
                    gap=gap,
                    gap_bound=bound,
                    within_bound=bool(within),
                    loops=len(loops),
                    sigma_unit=unit,
                    segments=segments,
                )
            )
            if not math.isfinite(energy):
                report.flags.append(f"epsilon={epsilon:g}, sigma={sigma:g}: E_sigma is infinite")
            elif segments == 0 and top.f_infinity > 0.0:
                report.flags.append(
                    f"epsilon={epsilon:g}, sigma={sigma:g}: rounded current is empty in Omega"
                )
            elif not within:
                report.flags.append(
                    f"epsilon={epsilon:g}, sigma={sigma:g}: gap {gap:.4g} exceeds {bound:.4g}"
                )
            gaps.append(gap)
        rate = _fit_sigma_rate(sigmas, gaps)
        report.rates[f"sigma_gap@{epsilon:g}"] = rate
        if math.isnan(rate):
            logger.info(f"epsilon={epsilon:g}: fewer than two nonzero gaps, no sigma-rate")
        elif rate < min_sigma_rate:
            report.flags.append(
                f"epsilon={epsilon:g}: sigma-rate {rate:.3g} below {min_sigma_rate:g}"
            )
    return report


@dataclass
class LowerBoundReport:
    """Results of :func:`lower_bound_diagnostics`.

    Attributes
    ----------
    checks : list[PropertyCheck]
        ``E_sigma >= F_inf`` on every rounded current and
        ``sigma psi(z, t) >= g(sigma z (x) t)`` on sampled segments.
    sandwich : dict[str, float]
        ``E_0``, the smallest and largest ``E_sigma`` seen, ``E_0 + epsilon L3``
        and the relative width of the sandwich.
    """

    checks: list[PropertyCheck] = field(default_factory=list)
    sandwich: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        """Whether every check holds."""
        return all(c.passed for c in self.checks)


def lower_bound_diagnostics(
    psi: DensitySpec,
    report: EnergyReport,
    evaluator: EnvelopeEvaluator,
    max_samples: int = 50,
    lp_tol: float = 1e-9,
    tol: float = 1e-9,
) -> LowerBoundReport:
    """Check the lower-bound chain on the rounded currents of an experiment.

    Each rounded current is charged at the spacing it carries. On every
    rounded current ``E_sigma >= F_inf`` must hold (``sigma psi(z)``
    dominates ``psi_inf(sigma z)``), and on up to ``max_samples`` distinct
    segment types ``sigma psi(z, t) >= g(sigma z (x) t) - lp_tol`` with g
    evaluated by the envelope (an upper bound on the true envelope, so the
    check is one-sided).
    """
    out = LowerBoundReport()
    window = report.window

    worst, witness = -math.inf, ()
    for (epsilon, sigma), current in report.rounded.items():
        spacing = current.sigma or sigma
        energy = e_sigma(current, psi, spacing, window, strict=False)
        lower = f_infinity(current, evaluator.recession, window)
        gap = lower - energy - tol * max(1.0, abs(energy))
        if gap > worst:
            worst, witness = gap, (epsilon, sigma)
    if report.rounded:
        out.checks.append(PropertyCheck("e_sigma_above_f_infinity", worst <= 0.0, worst, witness))

    worst, witness = -math.inf, ()
    seen = 0
    for (_, sigma), current in report.rounded.items():
        if seen >= max_samples or len(current) == 0:
            continue
        spacing = current.sigma or sigma
        keys = np.hstack([current.burgers, current.tangents])
        _, first = np.unique(np.round(keys, 12), axis=0, return_index=True)
        for row in np.sort(first)[: max_samples - seen]:
            b = current.burgers[row]
            t = current.tangents[row]
            if not np.any(b):
                continue
            seen += 1
            lhs = spacing * float(psi(np.round(b / spacing), t))
            rhs = evaluator(np.outer(b, t))
            gap = rhs - lhs - lp_tol * max(1.0, lhs)
            if gap > worst:
                worst, witness = gap, (tuple(float(x) for x in b), tuple(float(x) for x in t))
    if seen:
        out.checks.append(PropertyCheck("segment_above_envelope", worst <= 0.0, worst, witness))

    construction_rows = [r for r in report.rows if math.isnan(r.sigma)]
    rounding_rows = [r for r in report.rows if not math.isnan(r.sigma)]
    if construction_rows:
        e0 = min(r.e0 for r in construction_rows)
        top = max(r.e0_bound for r in construction_rows)
        finest = [r for r in construction_rows if r.k == max(x.k for x in construction_rows)]
        f_values = [r.f_infinity for r in finest]
        energies = [r.e_sigma for r in rounding_rows if math.isfinite(r.e_sigma)]
        out.sandwich = {
            "e0": e0,
            "e0_plus_epsilon": top,
            "f_infinity_min": min(f_values),
            "f_infinity_max": max(f_values),
            "e_sigma_min": min(energies) if energies else math.nan,
            "e_sigma_max": max(energies) if energies else math.nan,
            "relative_width": (max(f_values) - e0) / e0 if e0 > 0 else 0.0,
        }
    return out
