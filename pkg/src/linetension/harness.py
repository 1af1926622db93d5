# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Configuration-driven runs, verification suite and output files.

Every run writes into its output directory:

- CSV tables with round-trip float formatting (``repr``),
- YAML summaries with sorted keys,
- geometry in CSV or OBJ,
- ``manifest.yaml`` with the package version, the configuration and its
  SHA-256, and the SHA-256 of every file written.

Nothing time-dependent is recorded, so identical configurations give
byte-identical directories.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np
import yaml

from .config import RunConfig
from .construction import (
    ConstructionOptions,
    PlaneFamily,
    approximate_measure_pipeline,
    build_line_lattice,
    clip_cull_and_count,
    enumerate_crossings,
    glue,
)
from .currents import (
    Loop,
    PolyhedralCurrent,
    check_divergence_free,
    pair_with_gradient,
    read_csv,
    total_variation,
    write_csv,
    write_obj,
)
from .densities import check_density_properties, inequality_chain_check
from .energy import lower_bound_diagnostics, upper_bound_experiment
from .envelope import EnvelopeEvaluator, check_envelope_properties
from .errors import ConfigError, ExportError, MeshError
from .fields import PiecewiseConstantField, check_normal_jumps
from .geometry import shrink_and_project, subdivide_boundary
from .meshes import random_tet
from .testfunctions import random_bumps_in_mesh

logger = logging.getLogger(__name__)

MANIFEST = "manifest.yaml"
INJECTIONS = ("normal-jump", "ledger")

# Largest accepted |N - |<t, n>| area k^4| / (diam k) in the lattice count check
LATTICE_COUNT_CONSTANT = 8.0

# Resolutions and random tetrahedra of the lattice count check
LATTICE_COUNT_KS = (2, 4, 8, 16)
LATTICE_COUNT_TETS = 5

# Fitted log-log slopes of the connector and ray masses must not exceed this
MAX_CORRECTOR_RATE = -0.8


def _plain(value: Any) -> Any:
    """Convert numpy scalars and arrays (recursively) to plain Python data."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def _format_cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_table(path: Path, rows: Sequence[dict[str, Any]]) -> None:
    """Write rows as CSV with a header from the first row."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        if not rows:
            return
        columns = list(rows[0])
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row[c]) for c in columns])


def write_summary(path: Path, data: dict[str, Any]) -> None:
    """Write a YAML summary with sorted keys."""
    path.write_text(yaml.safe_dump(_plain(data), sort_keys=True), encoding="utf-8")


def sha256_file(path: Path) -> str:
    """Hex SHA-256 of a file."""
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1024 * 1024), b""):
            digest.update(chunk)
    return digest.hexdigest()


def export_geometry(
    geometry: PolyhedralCurrent | Sequence[Loop], path: str | Path, fmt: str | None = None
) -> Path:
    """Write a current or a loop list as CSV or OBJ.

    Parameters
    ----------
    geometry : PolyhedralCurrent or sequence of Loop
        What to write; loops are written as one current in CSV.
    path : str or Path
        Target file.
    fmt : str, optional
        ``csv`` or ``obj``; taken from the suffix when omitted.

    Raises
    ------
    ExportError
        If the format is unknown or the file cannot be written.
    """
    target = Path(path)
    kind = (fmt or target.suffix.lstrip(".")).lower()
    if kind == "obj":
        write_obj(geometry, target)
    elif kind == "csv":
        if not isinstance(geometry, PolyhedralCurrent):
            n = len(geometry[0].burgers) if geometry else 1
            geometry = PolyhedralCurrent.concatenate([lp.to_current() for lp in geometry], n)
        write_csv(geometry, target)
    else:
        raise ExportError(f"Unknown geometry format '{kind}'; use csv or obj")
    logger.debug(f"Wrote geometry to {target}")
    return target


def import_geometry(path: str | Path, sigma: float | None = None) -> PolyhedralCurrent:
    """Read a current written as CSV by :func:`export_geometry`.

    Raises
    ------
    ExportError
        If the file is not CSV or is malformed.
    """
    if Path(path).suffix.lower() != ".csv":
        raise ExportError(f"{path}: only CSV geometry can be imported")
    return read_csv(path, sigma)


@dataclass
class RunResult:
    """Outcome of :func:`run`.

    Attributes
    ----------
    command : str
        Experiment that ran.
    output : Path
        Output directory.
    files : list[str]
        Files written, relative to ``output``.
    passed : bool
        Whether every bound checked by the experiment held.
    """

    command: str
    output: Path
    files: list[str] = field(default_factory=list)
    passed: bool = True

    @property
    def status(self) -> int:
        """Process exit status."""
        return 0 if self.passed else 1


def _options(config: RunConfig) -> ConstructionOptions:
    return ConstructionOptions(eps=config.tolerances.degeneracy)


def _evaluator(config: RunConfig) -> EnvelopeEvaluator:
    d = config.dictionary
    return EnvelopeEvaluator(
        config.build_density(), config.n, d.z_max, d.directions, d.s_max, config.tolerances.lp
    )


def _run_approximate(config: RunConfig, field_: PiecewiseConstantField, out: Path) -> RunResult:
    result = RunResult("approximate", out)
    measures, report = approximate_measure_pipeline(
        field_,
        config.k,
        seed=config.seed,
        options=_options(config),
        workers=config.workers,
        test_functions=config.test_functions,
        ledger_tolerance=config.tolerances.ledger,
    )
    write_table(out / "convergence.csv", report.to_rows())
    write_summary(
        out / "convergence.yaml",
        {
            "field_mass": report.field_mass,
            "window": {"lo": report.window.lo, "hi": report.window.hi},
            "rates": report.rates,
        },
    )
    result.files += ["convergence.csv", "convergence.yaml"]
    for glued in measures:
        name = f"measure_k{glued.k}.{config.format}"
        export_geometry(glued.measure, out / name, config.format)
        dump = f"construction_k{glued.k}.yaml"
        write_summary(out / dump, {"tets": [c.summary() for c in glued.constructions]})
        result.files += [name, dump]
    return result


def _run_energy(config: RunConfig, field_: PiecewiseConstantField, out: Path) -> RunResult:
    result = RunResult("energy", out)
    psi = config.build_density()
    if field_.is_zero:
        write_table(out / "energy.csv", [])
        write_summary(out / "energy.yaml", {"density": psi.name, "zero_field": True})
        result.files += ["energy.csv", "energy.yaml"]
        return result
    evaluator = _evaluator(config)
    report = upper_bound_experiment(
        field_,
        psi,
        config.k,
        config.sigma,
        config.epsilon,
        evaluator=evaluator,
        seed=config.seed,
        options=_options(config),
        workers=config.workers,
    )
    lower = lower_bound_diagnostics(psi, report, evaluator, lp_tol=config.tolerances.lp)
    write_table(out / "energy.csv", report.to_rows())
    write_summary(
        out / "energy.yaml",
        {
            "density": psi.name,
            "rates": report.rates,
            "flags": report.flags,
            "sandwich": lower.sandwich,
            "lower_bound_checks": [
                {"name": c.name, "passed": c.passed, "worst": c.worst} for c in lower.checks
            ],
        },
    )
    result.files += ["energy.csv", "energy.yaml"]
    epsilon = config.epsilon[0]
    name = f"recovery.{config.format}"
    export_geometry(report.measures[epsilon].measure, out / name, config.format)
    result.files.append(name)
    result.passed = report.passed and lower.passed
    return result


def _run_envelope(config: RunConfig, field_: PiecewiseConstantField, out: Path) -> RunResult:
    result = RunResult("envelope", out)
    psi = config.build_density()
    evaluator = _evaluator(config)
    rows = []
    seen: set[bytes] = set()
    for index, a in enumerate(field_.matrices):
        key = np.ascontiguousarray(a).tobytes()
        if key in seen or not np.any(a):
            continue
        seen.add(key)
        for level, value in enumerate(evaluator.ladder(a)):
            rows.append({"tet": index, "level": level, "value": value})
    density_report = check_density_properties(psi, config.n, seed=config.seed)
    envelope_report = check_envelope_properties(evaluator, seed=config.seed)
    write_table(out / "envelope.csv", rows)
    write_summary(
        out / "envelope.yaml",
        {
            "density": psi.name,
            "levels": evaluator.levels,
            "density_checks": {c.name: c.passed for c in density_report.checks},
            "envelope_checks": {c.name: c.passed for c in envelope_report.checks},
            "growth": [envelope_report.growth_lower, envelope_report.growth_upper],
        },
    )
    result.files += ["envelope.csv", "envelope.yaml"]
    result.passed = envelope_report.passed
    return result


COMMANDS: dict[str, Callable[[RunConfig, PiecewiseConstantField, Path], RunResult]] = {
    "approximate": _run_approximate,
    "energy": _run_energy,
    "envelope": _run_envelope,
}


def run(config: RunConfig, command: str = "approximate") -> RunResult:
    """Validate a configuration, run one experiment and write its outputs.

    Parameters
    ----------
    config : RunConfig
        The configuration.
    command : str
        ``approximate``, ``energy`` or ``envelope``.

    Returns
    -------
    RunResult
        Written files and the pass flag.

    Raises
    ------
    ConfigError
        If the configuration is invalid.
    ExportError
        If the output directory cannot be written.
    """
    from . import __version__

    if command not in COMMANDS:
        raise ValueError(f"Unknown command '{command}'")
    config.validate()
    out = Path(config.output)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ExportError(f"Cannot create output directory {out}", original_error=e) from e
    field_ = config.build_field()
    logger.info(f"Running {command} on {config.mesh} ({len(field_.mesh)} tets), seed {config.seed}")
    try:
        result = COMMANDS[command](config, field_, out)
        write_summary(
            out / MANIFEST,
            {
                "version": __version__,
                "command": command,
                "config": config.to_dict(),
                "config_sha256": config.config_hash(),
                "passed": result.passed,
                "files": {name: sha256_file(out / name) for name in sorted(result.files)},
            },
        )
    except OSError as e:
        raise ExportError(f"Cannot write results to {out}", original_error=e) from e
    result.files.append(MANIFEST)
    return result


@dataclass(frozen=True)
class CheckResult:
    """One named check of the verification suite."""

    name: str
    passed: bool
    detail: str = ""


def _inject_normal_jump(field_: PiecewiseConstantField) -> PiecewiseConstantField:
    faces = field_.mesh.interior_faces
    if not faces:
        raise ConfigError(["normal-jump injection needs a mesh with interior faces"])
    face = faces[0]
    tet = face.tets[0]
    bump = np.zeros((field_.n, 3))
    bump[0] = 1e-3 * np.array(face.normal)
    return field_.with_matrix(tet, field_.matrices[tet] + bump)


@dataclass(frozen=True)
class LatticeCountReport:
    """Lattice-line counts per boundary triangle against the area estimate.

    Attributes
    ----------
    ks : tuple[int, ...]
        Resolutions.
    constants : np.ndarray
        ``max_h |N_h - k**4 |<t, n_h>| area_h| / (diam k)``, one row per
        tetrahedron and one column per k, with N_h from lattice-point
        enumeration.
    disagreements : int
        Crossings the clipper assigns differently from the enumeration,
        beyond two per culled line, summed over all runs.
    """

    ks: tuple[int, ...]
    constants: np.ndarray
    disagreements: int

    @property
    def spread(self) -> float:
        """Largest factor between a constant and its tetrahedron's median over k."""
        median = np.median(self.constants, axis=1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.maximum(self.constants / median, median / self.constants)
        return float(np.nan_to_num(ratio, nan=1.0, posinf=math.inf).max(initial=1.0))

    @property
    def passed(self) -> bool:
        return (
            self.disagreements == 0
            and self.spread <= 2.0
            and float(self.constants.max(initial=0.0)) <= LATTICE_COUNT_CONSTANT
        )


def lattice_count_report(
    seed: int,
    ks: Sequence[int] = LATTICE_COUNT_KS,
    tets: int = LATTICE_COUNT_TETS,
    options: ConstructionOptions | None = None,
) -> LatticeCountReport:
    """Check lattice-line counts on random tetrahedra over several resolutions.

    Each tetrahedron gets a random line direction t. At every k the clipper's
    counts are compared with brute-force enumeration of lattice points in the
    projected triangles, and the enumerated counts with
    ``k**4 |<t, n_h>| area_h``. The discrepancy scaled by ``diam k`` should
    stay of the same size as k grows.
    """
    options = options or ConstructionOptions()
    ks = tuple(ks)
    constants = np.zeros((tets, len(ks)))
    disagreements = 0
    for row in range(tets):
        rng = np.random.default_rng(np.random.SeedSequence([seed, 17, row]))
        tet = random_tet(rng)
        t = rng.standard_normal(3)
        t /= np.linalg.norm(t)
        for col, k in enumerate(ks):
            grid = shrink_and_project(tet, subdivide_boundary(tet, k))
            lattice = build_line_lattice(np.ones(1), t, k, rng.random(2), tet.barycenter)
            incidence = clip_cull_and_count(
                lattice, grid, PlaneFamily.empty(), options.eps * tet.diam
            )
            enumerated = enumerate_crossings(lattice, grid.inner_triangles)
            mismatch = int(np.abs(incidence.counts - enumerated).sum())
            disagreements += max(0, mismatch - 2 * incidence.culled)
            expected = np.abs(grid.normals @ t) * grid.inner_areas * k**4
            constants[row, col] = np.abs(enumerated - expected).max() / (tet.diam * k)
            logger.debug(
                f"Lattice counts, tet {row}, k={k}: constant {constants[row, col]:.3g}, "
                f"mismatch {mismatch}, culled {incidence.culled}"
            )
    return LatticeCountReport(ks, constants, disagreements)


def _check_lattice_counts(config: RunConfig) -> CheckResult:
    counts = lattice_count_report(config.seed, options=_options(config))
    return CheckResult(
        "lattice_counts",
        counts.passed,
        f"max |N - area k^4| / (diam k) = {counts.constants.max():.3g}, "
        f"spread {counts.spread:.2f}x over k = {list(counts.ks)}, "
        f"{counts.disagreements} count disagreements",
    )


def verify(config: RunConfig, inject: str | None = None) -> list[CheckResult]:
    """Run the desk-scale verification suite on a configuration.

    Parameters
    ----------
    config : RunConfig
        Mesh, field, density and resolutions to check.
    inject : str, optional
        ``normal-jump`` perturbs one matrix across an interior face,
        ``ledger`` adds an unbalanced segment inside the domain.

    Returns
    -------
    list[CheckResult]
        One result per check; failures carry the offending face or node.
    """
    if inject is not None and inject not in INJECTIONS:
        raise ValueError(f"Unknown injection '{inject}'; use one of {', '.join(INJECTIONS)}")
    config.validate()
    results: list[CheckResult] = []
    mesh = config.build_mesh()
    try:
        mesh.check_conformity()
        results.append(CheckResult("conformity", True, f"{len(mesh)} tets"))
    except MeshError as e:
        results.append(CheckResult("conformity", False, str(e)))
        return results

    field_ = config.build_field(mesh)
    if inject == "normal-jump":
        field_ = _inject_normal_jump(field_)
    jumps = check_normal_jumps(field_, config.tolerances.normal_jump)
    results.append(
        CheckResult(
            "normal_jump",
            jumps.passed,
            f"max violation {jumps.max_violation:.3e} on face {jumps.face}",
        )
    )

    psi = config.build_density()
    density = check_density_properties(psi, config.n, samples=200, directions=100, seed=config.seed)
    failed = [c for c in density.checks if not c.passed]
    results.append(
        CheckResult(
            "density_properties",
            not failed,
            "; ".join(f"{c.name} fails at {c.witness}" for c in failed) or psi.name,
        )
    )

    evaluator = _evaluator(config)
    chain = inequality_chain_check(psi, config.n, evaluator, samples=6, seed=config.seed)
    results.append(
        CheckResult(
            "inequality_chain",
            chain.passed,
            f"monotone {chain.monotone_violation:.2e}, recession "
            f"{chain.recession_violation:.2e}, envelope {chain.envelope_violation:.2e}",
        )
    )
    envelope = check_envelope_properties(evaluator, samples=4, seed=config.seed)
    results.append(
        CheckResult(
            "envelope_properties",
            envelope.passed,
            ", ".join(f"{c.name}={'ok' if c.passed else 'FAIL'}" for c in envelope.checks),
        )
    )
    results.append(_check_lattice_counts(config))

    if not jumps.passed or field_.is_zero:
        return results

    k = min(config.k)
    glued = glue(
        field_, k, seed=config.seed, options=_options(config), workers=config.workers,
        jump_tolerance=config.tolerances.normal_jump,
    )
    measure = glued.measure
    if inject == "ledger":
        tet = mesh.tets[0]
        step = 0.1 * tet.inradius * np.ones(3) / np.sqrt(3.0)
        stray = PolyhedralCurrent(
            tet.barycenter[None], (tet.barycenter + step)[None], np.eye(config.n)[:1]
        )
        measure = measure + stray
    mass = total_variation(measure)
    divergence = check_divergence_free(measure, mesh, config.tolerances.ledger * mass)
    results.append(
        CheckResult(
            "divergence_free",
            divergence.passed,
            f"worst node {divergence.worst_node} with mass {divergence.worst_mass:.3e}",
        )
    )
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 23]))
    worst = 0.0
    for bump in random_bumps_in_mesh(rng, mesh, config.n, 20):
        pairing = abs(pair_with_gradient(measure, bump))
        worst = max(worst, pairing / (mass * bump.lipschitz))
    results.append(
        CheckResult(
            "bump_pairings",
            worst <= config.tolerances.ledger,
            f"max |<mu, grad phi>| / (|mu| Lip) = {worst:.3e}",
        )
    )

    if len(config.k) > 1:
        _, report = approximate_measure_pipeline(
            field_, sorted(config.k), seed=config.seed, options=_options(config),
            workers=config.workers, test_functions=config.test_functions,
        )
        gaps = [row.weak_gap for row in report.rows]
        results.append(
            CheckResult(
                "weak_convergence",
                gaps[-1] <= gaps[0] and not report.rates["weak_gap"] > 0.0,
                "gaps " + ", ".join(f"{g:.3e}" for g in gaps)
                + f", rate {report.rates['weak_gap']:.2f}",
            )
        )
        if len(report.rows) > 2:
            rates = {name: report.rates[name] for name in ("mass_omega", "mass_rho")}
            results.append(
                CheckResult(
                    "corrector_decay",
                    all(not rate > MAX_CORRECTOR_RATE for rate in rates.values()),
                    ", ".join(f"{name} rate {rate:.2f}" for name, rate in rates.items()),
                )
            )
    return results


def report(out_dir: str | Path) -> str:
    """Render the summaries of an output directory and check its file hashes.

    Raises
    ------
    ExportError
        If the manifest is missing or unreadable.
    """
    out = Path(out_dir)
    try:
        manifest = yaml.safe_load((out / MANIFEST).read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as e:
        raise ExportError(f"Cannot read {out / MANIFEST}", original_error=e) from e
    lines = [
        f"{manifest['command']} run, linetension {manifest['version']}",
        f"config sha256 {manifest['config_sha256']}",
        f"status: {'passed' if manifest['passed'] else 'FAILED'}",
    ]
    for name, digest in manifest["files"].items():
        path = out / name
        if not path.exists():
            state = "missing"
        elif sha256_file(path) != digest:
            state = "modified"
        else:
            state = "ok"
        lines.append(f"  {name}: {state}")
        if name.endswith(".yaml") and state == "ok":
            summary = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
            for key in ("rates", "sandwich", "flags"):
                if summary.get(key):
                    lines.append(f"    {key}: {_describe(summary[key])}")
    return "\n".join(lines)


def _describe(value: Any) -> str:
    if isinstance(value, dict):
        return ", ".join(f"{k}={_describe(v)}" for k, v in sorted(value.items()))
    if isinstance(value, list):
        return "; ".join(_describe(v) for v in value)
    if isinstance(value, float) and math.isfinite(value):
        return f"{value:.4g}"
    return str(value)

