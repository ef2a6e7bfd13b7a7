"""Unit tests for run directories, manifests and memory checks."""

import json
from pathlib import Path
from types import SimpleNamespace

import numpy as np
import pytest

from turnstile_sketch.core.exceptions import SketchResourceError, StreamFormatError
from turnstile_sketch.utils.resources import ensure_memory, rss_mib
from turnstile_sketch.utils.run_files import (
    MANIFEST_FORMAT_VERSION,
    MANIFEST_NAME,
    new_run_dir,
    read_json,
    write_json_atomic,
    write_manifest,
)


class TestJsonFiles:
    """Test JSON helpers."""

    def test_numpy_values_serialized(self, tmp_path):
        """Test numpy scalars, arrays and paths become JSON."""
        path = write_json_atomic(
            tmp_path / "a.json",
            {"x": np.float64(1.5), "v": np.arange(3), "where": Path("runs/x"), "k": np.int64(4)},
        )
        assert read_json(path) == {"x": 1.5, "v": [0, 1, 2], "where": "runs/x", "k": 4}
        assert not (tmp_path / "a.json.tmp").exists()

    def test_unserializable(self, tmp_path):
        """Test foreign objects raise TypeError."""
        with pytest.raises(TypeError):
            write_json_atomic(tmp_path / "b.json", {"x": object()})

    def test_read_missing(self, tmp_path):
        """Test missing files raise the package error."""
        with pytest.raises(StreamFormatError, match="cannot read"):
            read_json(tmp_path / "missing.json")

    def test_read_non_mapping(self, tmp_path):
        """Test JSON lists are rejected."""
        path = tmp_path / "list.json"
        path.write_text("[1, 2]")
        with pytest.raises(StreamFormatError, match="mapping"):
            read_json(path)


class TestRunDirectories:
    """Test run directories and manifests."""

    def test_new_run_dir_under_settings(self, isolated_settings):
        """Test the default parent is TURNSTILE_RUN_DIR."""
        run_dir = new_run_dir("sketch")
        assert run_dir.parent == isolated_settings.run_dir
        assert run_dir.name.startswith("sketch-")
        assert run_dir.is_dir()

    def test_new_run_dir_explicit_parent(self, tmp_path):
        """Test an explicit parent directory."""
        assert new_run_dir("sample", parent=tmp_path).parent == tmp_path

    def test_manifest_contents(self, tmp_path):
        """Test parameters, sections and versions are recorded."""
        path = write_manifest(tmp_path, "sample", {"seed": 3, "k": 10}, timings={"sample_seconds": 0.5})
        assert path.name == MANIFEST_NAME
        manifest = json.loads(path.read_text())
        assert manifest["format_version"] == MANIFEST_FORMAT_VERSION
        assert manifest["command"] == "sample"
        assert manifest["parameters"] == {"seed": 3, "k": 10}
        assert manifest["timings"]["sample_seconds"] == 0.5
        assert manifest["numpy_version"] == np.__version__


class TestResources:
    """Test memory accounting."""

    def test_small_allocation_passes(self):
        """Test a kilobyte always fits."""
        ensure_memory(1024, "tiny", fraction=0.5)

    def test_refuses_large_allocation(self, monkeypatch):
        """Test the allowance is a fraction of available memory."""
        monkeypatch.setattr(
            "turnstile_sketch.utils.resources.psutil.virtual_memory",
            lambda: SimpleNamespace(available=2 ** 30),
        )
        ensure_memory(2 ** 28, "quarter", fraction=0.5)
        with pytest.raises(SketchResourceError, match="big needs"):
            ensure_memory(2 ** 30, "big", fraction=0.5)

    def test_rss_positive(self):
        """Test the resident set size is reported."""
        assert rss_mib() > 0
