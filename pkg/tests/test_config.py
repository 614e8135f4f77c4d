"""Tests for run configuration loading."""

from pathlib import Path

import pytest
from pydantic import ValidationError

from geokit.config import DEFAULT_CONFIG, THREADS_ENV, load_run_config, thread_count

REPO = Path(__file__).resolve().parent.parent


class TestLoadRunConfig:
    def test_defaults_without_file(self):
        config = load_run_config()
        assert config.resolution == 256
        assert config.dims == [2]
        assert config.p_for(2) == [1.0, 2.0, 5.0, 0.5, -0.5, -1.0, -3.0, -4.0]
        assert config.i_for(3) == [-1.0, 0.0, 1.5, 3.0, 4.0]

    def test_missing_file_falls_back(self, tmp_path):
        config = load_run_config(tmp_path / "absent.yaml")
        assert config.count == 20

    def test_shipped_default(self):
        config = load_run_config(REPO / DEFAULT_CONFIG)
        assert config.search.k_max == 6
        assert config.p_values is None
        assert config.db is None

    def test_yaml_and_overrides(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text(
            "resolution: 128\nseed: 4\ndims: [2, 3]\np_values: [1, -1]\n"
            "search:\n  starts: 5\n  family: ellipsoid\n"
        )
        config = load_run_config(path, count=3, starts=2, max_iters=None, seed=None)
        assert config.resolution == 128
        assert config.dims == [2, 3]
        assert config.p_values == [1.0, -1.0]
        assert config.count == 3
        assert config.search.starts == 2
        assert config.search.family == "ellipsoid"
        assert config.search.seed == 4

    def test_comma_lists(self):
        config = load_run_config(dims="2,3", p_values="1,0.5", i_values="0")
        assert config.dims == [2, 3]
        assert config.p_values == [1.0, 0.5]
        assert config.i_values == [0.0]

    def test_non_mapping(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ValueError):
            load_run_config(path)

    def test_planar_resolution(self):
        with pytest.raises(ValidationError):
            load_run_config(resolution=100)

    def test_p_equal_to_minus_n(self):
        with pytest.raises(ValidationError):
            load_run_config(dims=[2, 3], p_values=[-3.0])


class TestThreadCount:
    def test_env(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "3")
        assert thread_count() == 3

    def test_invalid_env(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV, "many")
        assert thread_count() == 1

    def test_default(self, monkeypatch):
        monkeypatch.delenv(THREADS_ENV, raising=False)
        assert 1 <= thread_count() <= 8
