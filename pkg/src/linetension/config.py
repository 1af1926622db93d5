# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Run configuration loaded from YAML.

A configuration names the mesh, the field, the density and the parameter
lists of an experiment::

    schema_version: 1
    mesh: unit-cube-6tet
    field:
      kind: potential
      path: potential.csv
    density: iso
    n: 3
    k: [2, 4, 8]
    sigma: [0.5, 0.25]
    epsilon: [0.01]
    seed: 7
    output: runs/cube

Field kinds are ``constant`` (``matrix``), ``matrices`` (``matrices`` or
``path``), ``potential`` (``path`` to a coefficient CSV) and ``polynomial``
(``terms`` or a random potential of ``degree``).
"""

from __future__ import annotations

import dataclasses
import hashlib
import logging
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .densities import DensitySpec, parse_density
from .errors import ConfigError, LineTensionError
from .fields import (
    PiecewiseConstantField,
    PolynomialMap,
    PotentialSpec,
    curl_of_interpolated_potential,
    read_field,
)
from .geometry import Triangulation
from .meshes import load_mesh

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FIELD_KINDS = ("constant", "matrices", "potential", "polynomial")
GEOMETRY_FORMATS = ("csv", "obj")


@dataclass
class DictionaryConfig:
    """Finest level of the envelope dictionary ladder."""

    z_max: int = 3
    directions: int = 256
    s_max: int = 64


@dataclass
class Tolerances:
    """Numerical tolerances of a run."""

    degeneracy: float = 1e-9
    ledger: float = 1e-10
    normal_jump: float = 1e-10
    lp: float = 1e-9
    quantum: float = 2.0**-30


def _default_field() -> dict[str, Any]:
    return {"kind": "constant", "matrix": [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]}


@dataclass
class RunConfig:
    """Complete description of an experiment.

    Attributes
    ----------
    mesh : str
        Built-in mesh name or mesh file path.
    field : dict
        Field specification with a ``kind`` key.
    density : str
        Density name or table path.
    n : int
        Dimension N of the multiplicities.
    k : list[int]
        Resolutions.
    sigma : list[float]
        Lattice spacings of the rounding step, in units of the largest
        lattice-line weight ``|b|_inf / k**4``.
    epsilon : list[float]
        Envelope certificate slacks.
    dictionary : DictionaryConfig
        Envelope dictionary parameters.
    tolerances : Tolerances
        Numerical tolerances.
    seed : int
        Run seed.
    output : str
        Output directory.
    format : str
        Geometry export format, ``csv`` or ``obj``.
    workers : int
        Threads used for per-tetrahedron constructions.
    test_functions : int
        Polynomial test functions for weak* gaps.
    schema_version : int
        Configuration schema version.
    """

    mesh: str = "single-tet"
    field: dict[str, Any] = dataclasses.field(default_factory=_default_field)
    density: str = "iso"
    n: int = 3
    k: list[int] = dataclasses.field(default_factory=lambda: [2, 4])
    sigma: list[float] = dataclasses.field(default_factory=lambda: [0.5, 0.25])
    epsilon: list[float] = dataclasses.field(default_factory=lambda: [0.01])
    dictionary: DictionaryConfig = dataclasses.field(default_factory=DictionaryConfig)
    tolerances: Tolerances = dataclasses.field(default_factory=Tolerances)
    seed: int = 0
    output: str = "runs/default"
    format: str = "csv"
    workers: int = 1
    test_functions: int = 10
    schema_version: int = SCHEMA_VERSION

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunConfig:
        """Build a configuration from parsed YAML.

        Raises
        ------
        ConfigError
            Listing unknown keys and values of the wrong type.
        """
        if not isinstance(data, dict):
            raise ConfigError(["Configuration must be a mapping"])
        known = {f.name for f in fields(cls)}
        problems = [f"Unknown key '{key}'" for key in sorted(data) if key not in known]
        values = {key: value for key, value in data.items() if key in known}
        for key in ("k", "sigma", "epsilon"):
            if key in values and not isinstance(values[key], list):
                values[key] = [values[key]]
        for key, kind in (("dictionary", DictionaryConfig), ("tolerances", Tolerances)):
            if key in values:
                nested = values[key] or {}
                allowed = {f.name for f in fields(kind)}
                unknown = sorted(set(nested) - allowed)
                problems.extend(f"Unknown key '{key}.{name}'" for name in unknown)
                values[key] = kind(**{k: v for k, v in nested.items() if k in allowed})
        if problems:
            raise ConfigError(problems)
        try:
            return cls(**values)
        except TypeError as e:
            raise ConfigError([str(e)], original_error=e) from e

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        """Read a YAML configuration file.

        Raises
        ------
        ConfigError
            If the file cannot be read or parsed.
        """
        try:
            text = Path(path).read_text(encoding="utf-8")
            data = yaml.safe_load(text)
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError([f"Cannot read configuration {path}: {e}"], original_error=e) from e
        config = cls.from_dict(data or {})
        base = Path(path).resolve().parent
        config._resolve_paths(base)
        return config

    def _resolve_paths(self, base: Path) -> None:
        """Make relative file references relative to the configuration file."""
        if "path" in self.field and not Path(self.field["path"]).is_absolute():
            candidate = base / self.field["path"]
            if candidate.exists():
                self.field["path"] = str(candidate)
        for attr in ("mesh", "density"):
            value = getattr(self, attr)
            candidate = base / value
            if not Path(value).is_absolute() and candidate.is_file():
                setattr(self, attr, str(candidate))

    def to_dict(self) -> dict[str, Any]:
        """Plain-data form, suitable for YAML."""
        return asdict(self)

    def config_hash(self) -> str:
        """SHA-256 of the canonical YAML dump."""
        text = yaml.safe_dump(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def validate(self) -> None:
        """Check every constraint and report all violations at once.

        Raises
        ------
        ConfigError
            Listing every violated constraint.
        """
        problems: list[str] = []
        if self.schema_version != SCHEMA_VERSION:
            problems.append(
                f"schema_version must be {SCHEMA_VERSION}, got {self.schema_version}"
            )
        if not isinstance(self.n, int) or self.n < 1:
            problems.append(f"n must be a positive integer, got {self.n!r}")
        if not self.k:
            problems.append("k must be a nonempty list")
        problems.extend(
            f"k values must be integers >= 2, got {k!r}"
            for k in self.k
            if not isinstance(k, int) or k < 2
        )
        if not self.sigma:
            problems.append("sigma must be a nonempty list")
        problems.extend(f"sigma values must be positive, got {s!r}" for s in self.sigma if s <= 0)
        if not self.epsilon:
            problems.append("epsilon must be a nonempty list")
        problems.extend(
            f"epsilon values must be nonnegative, got {e!r}" for e in self.epsilon if e < 0
        )
        for name in ("z_max", "directions", "s_max"):
            value = getattr(self.dictionary, name)
            if not isinstance(value, int) or value < 1:
                problems.append(f"dictionary.{name} must be a positive integer, got {value!r}")
        for name, value in asdict(self.tolerances).items():
            if not value > 0:
                problems.append(f"tolerances.{name} must be positive, got {value!r}")
        if self.workers < 1:
            problems.append(f"workers must be at least 1, got {self.workers}")
        if self.test_functions < 1:
            problems.append(f"test_functions must be at least 1, got {self.test_functions}")
        if self.format not in GEOMETRY_FORMATS:
            problems.append(f"format must be one of {', '.join(GEOMETRY_FORMATS)}")

        mesh = None
        try:
            mesh = load_mesh(self.mesh)
        except LineTensionError as e:
            problems.append(str(e))
        if isinstance(self.n, int) and self.n >= 1:
            try:
                parse_density(self.density, self.n)
            except ConfigError as e:
                problems.extend(e.violations)
            if mesh is not None:
                problems.extend(self._field_problems(mesh))
        if problems:
            raise ConfigError(problems)

    def _field_problems(self, mesh: Triangulation) -> list[str]:
        kind = self.field.get("kind")
        if kind not in FIELD_KINDS:
            return [f"field.kind must be one of {', '.join(FIELD_KINDS)}, got {kind!r}"]
        try:
            self.build_field(mesh)
        except ConfigError as e:
            return list(e.violations)
        except (LineTensionError, ValueError, KeyError, TypeError) as e:
            return [f"field: {e}"]
        return []

    def build_mesh(self) -> Triangulation:
        """Load the configured mesh."""
        return load_mesh(self.mesh)

    def build_density(self) -> DensitySpec:
        """Parse the configured density."""
        return parse_density(self.density, self.n)

    def build_field(self, mesh: Triangulation | None = None) -> PiecewiseConstantField:
        """Build the configured field on the mesh.

        Raises
        ------
        ConfigError
            If the field data has the wrong shape or a file is malformed.
        """
        mesh = mesh or self.build_mesh()
        spec = self.field
        kind = spec.get("kind")
        if kind == "constant":
            matrix = np.asarray(spec.get("matrix"), dtype=float)
            if matrix.shape != (self.n, 3):
                raise ConfigError([f"field.matrix must have shape ({self.n}, 3)"])
            return PiecewiseConstantField.constant(mesh, matrix)
        if kind == "matrices":
            if "path" in spec:
                return read_field(spec["path"], mesh, self.n)
            matrices = np.asarray(spec.get("matrices"), dtype=float)
            if matrices.shape != (len(mesh), self.n, 3):
                raise ConfigError(
                    [f"field.matrices must have shape ({len(mesh)}, {self.n}, 3)"]
                )
            return PiecewiseConstantField(mesh, matrices)
        if kind == "potential":
            if "path" not in spec:
                raise ConfigError(["field.path is required for a potential field"])
            potential = PotentialSpec.read(spec["path"], self.n)
            return curl_of_interpolated_potential(potential, mesh)
        if kind == "polynomial":
            return curl_of_interpolated_potential(self._polynomial(), mesh)
        raise ConfigError([f"field.kind must be one of {', '.join(FIELD_KINDS)}"])

    def _polynomial(self) -> PotentialSpec:
        spec = self.field
        if "terms" in spec:
            terms = []
            problems = []
            for i, term in enumerate(spec["terms"]):
                try:
                    index = (int(term["row"]), int(term["component"]))
                    exponents = tuple(int(x) for x in term["exponents"])
                    value = float(term["coefficient"])
                except (KeyError, TypeError, ValueError):
                    problems.append(
                        f"field.terms[{i}] needs row, component, exponents and coefficient"
                    )
                    continue
                if not (0 <= index[0] < self.n and 0 <= index[1] < 3) or len(exponents) != 3:
                    problems.append(f"field.terms[{i}]: index out of range")
                    continue
                terms.append((index, exponents, value))
            if problems:
                raise ConfigError(problems)
            return PotentialSpec(PolynomialMap.from_terms(terms, (self.n, 3)))
        degree = int(spec.get("degree", 2))
        scale = float(spec.get("scale", 1.0))
        rng = np.random.default_rng(np.random.SeedSequence([self.seed, degree]))
        return PotentialSpec(PolynomialMap.random(rng, (self.n, 3), degree, scale))
