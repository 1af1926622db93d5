# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Tests for the YAML run configuration."""

from pathlib import Path

import numpy as np
import pytest
import yaml

from linetension import ConfigError, DictionaryConfig, IsotropicDensity, RunConfig, Tolerances


class TestFromDict:
    """Test RunConfig.from_dict."""

    def test_defaults(self) -> None:
        """Test that an empty mapping gives a valid single-tetrahedron run."""
        config = RunConfig.from_dict({})
        assert config.mesh == "single-tet"
        assert config.dictionary == DictionaryConfig()
        assert config.tolerances == Tolerances()
        config.validate()

    def test_scalars_become_lists(self) -> None:
        """Test that single values of list parameters are wrapped."""
        config = RunConfig.from_dict({"k": 4, "sigma": 0.5, "epsilon": 0.0})
        assert config.k == [4]
        assert config.sigma == [0.5]
        assert config.epsilon == [0.0]

    def test_nested_sections(self) -> None:
        """Test parsing the dictionary and tolerance sections."""
        config = RunConfig.from_dict(
            {"dictionary": {"z_max": 2, "directions": 64}, "tolerances": {"ledger": 1e-8}}
        )
        assert config.dictionary.z_max == 2
        assert config.dictionary.s_max == 64
        assert config.tolerances.ledger == 1e-8
        assert config.tolerances.lp == 1e-9

    def test_unknown_keys_are_all_reported(self) -> None:
        """Test that every unknown key, nested ones included, is listed."""
        with pytest.raises(ConfigError) as excinfo:
            RunConfig.from_dict({"meshes": "x", "dictionary": {"zmax": 2}, "colour": 1})
        assert excinfo.value.violations == [
            "Unknown key 'colour'",
            "Unknown key 'meshes'",
            "Unknown key 'dictionary.zmax'",
        ]

    def test_not_a_mapping(self) -> None:
        """Test that a YAML list is rejected."""
        with pytest.raises(ConfigError, match="must be a mapping"):
            RunConfig.from_dict([1, 2])


class TestLoad:
    """Test RunConfig.load."""

    def test_relative_paths(self, tmp_path: Path) -> None:
        """Test that field files are resolved against the configuration directory."""
        (tmp_path / "phi.csv").write_text("0,1,1,0,0,1.0\n")
        path = tmp_path / "run.yaml"
        path.write_text(
            yaml.safe_dump(
                {
                    "mesh": "unit-cube-6tet",
                    "n": 1,
                    "field": {"kind": "potential", "path": "phi.csv"},
                }
            )
        )
        config = RunConfig.load(path)
        assert Path(config.field["path"]) == tmp_path / "phi.csv"
        field = config.build_field()
        np.testing.assert_allclose(field.matrices, np.tile([[0.0, 0.0, 1.0]], (6, 1, 1)))

    def test_unreadable(self, tmp_path: Path) -> None:
        """Test that missing files raise ConfigError."""
        with pytest.raises(ConfigError, match="Cannot read configuration"):
            RunConfig.load(tmp_path / "missing.yaml")

    def test_malformed_yaml(self, tmp_path: Path) -> None:
        """Test that YAML syntax errors raise ConfigError."""
        path = tmp_path / "bad.yaml"
        path.write_text("k: [2, 4\n")
        with pytest.raises(ConfigError, match="Cannot read configuration"):
            RunConfig.load(path)

    def test_empty_file(self, tmp_path: Path) -> None:
        """Test that an empty file gives the defaults."""
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert RunConfig.load(path).k == [2, 4]


class TestValidate:
    """Test RunConfig.validate."""

    def test_small_config_is_valid(self, small_config: RunConfig) -> None:
        """Test that the shared fixture passes validation."""
        small_config.validate()

    def test_every_violation_is_reported(self) -> None:
        """Test that all violated constraints are collected in one error."""
        config = RunConfig(
            k=[1, 3],
            sigma=[-0.5],
            epsilon=[],
            workers=0,
            format="vtk",
            density="cubic",
            dictionary=DictionaryConfig(z_max=0),
            tolerances=Tolerances(ledger=0.0),
            schema_version=2,
        )
        with pytest.raises(ConfigError) as excinfo:
            config.validate()
        text = "\n".join(excinfo.value.violations)
        for fragment in (
            "schema_version must be 1",
            "k values must be integers >= 2, got 1",
            "sigma values must be positive",
            "epsilon must be a nonempty list",
            "dictionary.z_max must be a positive integer",
            "tolerances.ledger must be positive",
            "workers must be at least 1",
            "format must be one of csv, obj",
            "Built-in densities",
        ):
            assert fragment in text
        assert "Invalid configuration" in str(excinfo.value)

    def test_unknown_mesh(self) -> None:
        """Test that unknown mesh names are reported with the built-in list."""
        with pytest.raises(ConfigError, match="Built-in meshes"):
            RunConfig(mesh="torus").validate()

    def test_bad_field_kind(self) -> None:
        """Test that unknown field kinds are reported."""
        with pytest.raises(ConfigError, match="field.kind must be one of"):
            RunConfig(field={"kind": "random"}).validate()

    def test_matrix_shape(self) -> None:
        """Test that a constant matrix must match n."""
        with pytest.raises(ConfigError, match=r"field.matrix must have shape \(2, 3\)"):
            RunConfig(n=2).validate()


class TestBuild:
    """Test the build_* helpers."""

    def test_density(self) -> None:
        """Test that the density name is parsed."""
        assert isinstance(RunConfig().build_density(), IsotropicDensity)

    def test_matrices_field(self) -> None:
        """Test an explicit list of matrices, one per tetrahedron."""
        matrices = np.zeros((6, 1, 3))
        matrices[:, 0, 2] = 2.0
        config = RunConfig(
            mesh="unit-cube-6tet", n=1, field={"kind": "matrices", "matrices": matrices.tolist()}
        )
        assert config.build_field().l1_norm() == pytest.approx(2.0)

    def test_polynomial_terms(self) -> None:
        """Test a potential given by explicit terms."""
        term = {"row": 0, "component": 1, "exponents": [1, 0, 0], "coefficient": 1.0}
        config = RunConfig(n=1, field={"kind": "polynomial", "terms": [term]})
        np.testing.assert_allclose(config.build_field().matrices, [[[0.0, 0.0, 1.0]]])

    def test_polynomial_bad_terms(self) -> None:
        """Test that malformed terms are reported by index."""
        terms = [{"row": 0}, {"row": 5, "component": 0, "exponents": [0, 0, 0], "coefficient": 1}]
        config = RunConfig(n=1, field={"kind": "polynomial", "terms": terms})
        with pytest.raises(ConfigError) as excinfo:
            config.build_field()
        assert excinfo.value.violations == [
            "field.terms[0] needs row, component, exponents and coefficient",
            "field.terms[1]: index out of range",
        ]

    def test_random_polynomial_depends_on_seed(self) -> None:
        """Test that random potentials are reproducible per seed."""
        first = RunConfig(seed=1, field={"kind": "polynomial", "degree": 2}).build_field()
        again = RunConfig(seed=1, field={"kind": "polynomial", "degree": 2}).build_field()
        other = RunConfig(seed=2, field={"kind": "polynomial", "degree": 2}).build_field()
        np.testing.assert_array_equal(first.matrices, again.matrices)
        assert not np.array_equal(first.matrices, other.matrices)

    def test_config_hash(self) -> None:
        """Test that the hash changes with the content only."""
        assert RunConfig().config_hash() == RunConfig().config_hash()
        assert RunConfig().config_hash() != RunConfig(seed=1).config_hash()
