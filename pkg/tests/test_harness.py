# SPDX-FileCopyrightText: 2026 The linetension developers
#
# SPDX-License-Identifier: LGPL-2.1-or-later

"""Tests for configuration-driven runs, output files and the verification suite."""

import dataclasses
from pathlib import Path

import numpy as np
import pytest
import yaml

from linetension import (
    ConfigError,
    ExportError,
    Loop,
    PolyhedralCurrent,
    RunConfig,
    export_geometry,
    import_geometry,
    report,
    run,
    verify,
)
from linetension.harness import (
    LATTICE_COUNT_CONSTANT,
    LATTICE_COUNT_KS,
    LATTICE_COUNT_TETS,
    MANIFEST,
    LatticeCountReport,
    lattice_count_report,
    write_summary,
    write_table,
)


def square_loop() -> Loop:
    """Return a unit square in the plane z = 0.5 with multiplicity (1, 0)."""
    vertices = [[0.0, 0.0, 0.5], [1.0, 0.0, 0.5], [1.0, 1.0, 0.5], [0.0, 1.0, 0.5]]
    return Loop(np.array(vertices), np.array([1.0, 0.0]))


class TestOutputFiles:
    """Test table, summary and geometry writers."""

    def test_table_uses_round_trip_floats(self, tmp_path: Path) -> None:
        """Test the header, float formatting and booleans."""
        path = tmp_path / "rows.csv"
        write_table(path, [{"k": 2, "gap": 0.1, "ok": True}, {"k": 3, "gap": 1 / 3, "ok": False}])
        lines = path.read_text().splitlines()
        assert lines == ["k,gap,ok", "2,0.1,true", f"3,{1 / 3!r},false"]

    def test_empty_table(self, tmp_path: Path) -> None:
        """Test that no rows give an empty file."""
        path = tmp_path / "rows.csv"
        write_table(path, [])
        assert path.read_text() == ""

    def test_summary_is_plain_yaml(self, tmp_path: Path) -> None:
        """Test that numpy values are written as plain YAML with sorted keys."""
        path = tmp_path / "summary.yaml"
        write_summary(path, {"b": np.arange(2), "a": np.float64(0.5), "c": np.bool_(True)})
        assert path.read_text().splitlines()[0] == "a: 0.5"
        assert yaml.safe_load(path.read_text()) == {"a": 0.5, "b": [0, 1], "c": True}

    def test_geometry_csv_round_trip(self, tmp_path: Path) -> None:
        """Test exporting loops as CSV and reading them back."""
        path = export_geometry([square_loop()], tmp_path / "loops.csv")
        current = import_geometry(path)
        assert len(current) == 4
        assert current.n == 2

    def test_geometry_obj(self, tmp_path: Path) -> None:
        """Test that OBJ output holds one object per loop."""
        path = export_geometry([square_loop()], tmp_path / "loops.obj")
        text = path.read_text()
        assert text.startswith("o loop_0_")
        assert text.count("\no ") == 0
        assert "l 1 2 3 4 1" in text

    def test_unknown_format(self, tmp_path: Path) -> None:
        """Test that unknown geometry formats raise ExportError."""
        with pytest.raises(ExportError, match="Unknown geometry format 'vtk'"):
            export_geometry(PolyhedralCurrent.empty(1), tmp_path / "mu.vtk")

    def test_import_needs_csv(self, tmp_path: Path) -> None:
        """Test that only CSV geometry can be read back."""
        with pytest.raises(ExportError, match="only CSV"):
            import_geometry(tmp_path / "mu.obj")


class TestRun:
    """Test run and report."""

    def test_approximate(self, small_config: RunConfig) -> None:
        """Test the files written by an approximate run."""
        result = run(small_config, "approximate")
        assert result.passed
        assert result.status == 0
        assert set(result.files) == {
            "convergence.csv",
            "convergence.yaml",
            "measure_k2.csv",
            "measure_k3.csv",
            "construction_k2.yaml",
            "construction_k3.yaml",
            MANIFEST,
        }
        out = Path(small_config.output)
        assert all((out / name).is_file() for name in result.files)
        manifest = yaml.safe_load((out / MANIFEST).read_text())
        assert manifest["config_sha256"] == small_config.config_hash()
        assert manifest["command"] == "approximate"
        rows = (out / "convergence.csv").read_text().splitlines()
        assert rows[0].startswith("k,segments,")
        assert len(rows) == 3

    def test_runs_are_reproducible(self, small_config: RunConfig) -> None:
        """Test that rerunning a configuration rewrites identical files."""
        run(small_config, "approximate")
        first = (Path(small_config.output) / MANIFEST).read_text()
        run(small_config, "approximate")
        assert (Path(small_config.output) / MANIFEST).read_text() == first

    def test_obj_format(self, small_config: RunConfig) -> None:
        """Test that the geometry format follows the configuration."""
        config = dataclasses.replace(small_config, format="obj", k=[2])
        result = run(config, "approximate")
        assert "measure_k2.obj" in result.files

    def test_envelope(self, small_config: RunConfig) -> None:
        """Test that the envelope run writes the ladder of the field matrix."""
        result = run(small_config, "envelope")
        out = Path(small_config.output)
        assert {"envelope.csv", "envelope.yaml", MANIFEST} <= set(result.files)
        rows = (out / "envelope.csv").read_text().splitlines()
        assert rows[0] == "tet,level,value"
        assert len(rows) == 4
        summary = yaml.safe_load((out / "envelope.yaml").read_text())
        assert summary["density"] == "iso"
        assert summary["density_checks"]["subadditivity"]

    def test_energy_on_zero_field(self, small_config: RunConfig) -> None:
        """Test that the zero field writes an empty energy table."""
        zero = {"kind": "constant", "matrix": [[0.0] * 3] * 3}
        config = dataclasses.replace(small_config, field=zero)
        result = run(config, "energy")
        assert result.passed
        summary = yaml.safe_load((Path(config.output) / "energy.yaml").read_text())
        assert summary["zero_field"]

    @pytest.mark.slow
    def test_energy(self, small_config: RunConfig) -> None:
        """Test the files written by an upper-bound experiment."""
        result = run(small_config, "energy")
        assert {"energy.csv", "energy.yaml", "recovery.csv", MANIFEST} <= set(result.files)
        rows = (Path(small_config.output) / "energy.csv").read_text().splitlines()
        assert len(rows) == 1 + 2 + 2

    def test_unknown_command(self, small_config: RunConfig) -> None:
        """Test that unknown commands are rejected."""
        with pytest.raises(ValueError, match="Unknown command 'plot'"):
            run(small_config, "plot")

    def test_invalid_config(self, small_config: RunConfig) -> None:
        """Test that runs validate their configuration first."""
        with pytest.raises(ConfigError, match="k values"):
            run(dataclasses.replace(small_config, k=[1]), "approximate")

    def test_report(self, small_config: RunConfig) -> None:
        """Test the rendered summary and the hash check."""
        run(small_config, "approximate")
        out = Path(small_config.output)
        text = report(out)
        assert text.startswith("approximate run, linetension ")
        assert "status: passed" in text
        assert "convergence.csv: ok" in text
        assert "rates:" in text
        (out / "convergence.csv").write_text("tampered\n")
        (out / "measure_k3.csv").unlink()
        text = report(out)
        assert "convergence.csv: modified" in text
        assert "measure_k3.csv: missing" in text

    def test_report_without_manifest(self, tmp_path: Path) -> None:
        """Test that a directory without manifest raises ExportError."""
        with pytest.raises(ExportError, match="Cannot read"):
            report(tmp_path)


class TestVerify:
    """Test the verification suite."""

    @pytest.mark.slow
    def test_clean_run(self, small_config: RunConfig) -> None:
        """Test that the structural checks pass on the unit cube."""
        results = {r.name: r for r in verify(small_config)}
        for name in ("conformity", "normal_jump", "divergence_free", "bump_pairings"):
            assert results[name].passed, results[name].detail
        assert {"density_properties", "inequality_chain", "envelope_properties"} <= set(results)
        assert {"lattice_counts", "weak_convergence"} <= set(results)

    @pytest.mark.slow
    def test_normal_jump_injection(self, small_config: RunConfig) -> None:
        """Test that a perturbed matrix fails the jump check and stops the suite."""
        results = {r.name: r for r in verify(small_config, inject="normal-jump")}
        assert not results["normal_jump"].passed
        assert "divergence_free" not in results

    @pytest.mark.slow
    def test_ledger_injection(self, small_config: RunConfig) -> None:
        """Test that a stray segment fails the divergence check."""
        results = {r.name: r for r in verify(small_config, inject="ledger")}
        assert results["normal_jump"].passed
        assert not results["divergence_free"].passed

    def test_normal_jump_injection_needs_faces(self, small_config: RunConfig) -> None:
        """Test that a single tetrahedron cannot carry a jump."""
        config = dataclasses.replace(small_config, mesh="single-tet")
        with pytest.raises(ConfigError, match="interior faces"):
            verify(config, inject="normal-jump")

    def test_unknown_injection(self, small_config: RunConfig) -> None:
        """Test that unknown injections are rejected."""
        with pytest.raises(ValueError, match="Unknown injection"):
            verify(small_config, inject="mesh")


class TestLatticeCountReport:
    """Test lattice_count_report and LatticeCountReport."""

    def test_spread(self) -> None:
        """Test the spread against the per-tetrahedron median."""
        counts = LatticeCountReport((2, 4, 8), np.array([[1.0, 2.0, 1.5], [0.5, 0.5, 0.5]]), 0)
        assert counts.spread == pytest.approx(1.5)
        assert counts.passed

    def test_disagreement_fails(self) -> None:
        """Test that any count disagreement fails the report."""
        assert not LatticeCountReport((2,), np.ones((1, 1)), 1).passed

    def test_wide_spread_fails(self) -> None:
        """Test that a constant drifting by more than 2x over k fails the report."""
        assert not LatticeCountReport((2, 4, 8), np.array([[0.1, 0.3, 0.9]]), 0).passed

    @pytest.mark.slow
    def test_random_tetrahedra(self) -> None:
        """Test that enumeration matches the clipper and the constant holds over k = 2..16."""
        counts = lattice_count_report(seed=11)
        assert counts.ks == LATTICE_COUNT_KS
        assert counts.constants.shape == (LATTICE_COUNT_TETS, len(LATTICE_COUNT_KS))
        assert counts.disagreements == 0
        assert counts.spread <= 2.0
        assert counts.constants.max() <= LATTICE_COUNT_CONSTANT
        assert counts.passed
