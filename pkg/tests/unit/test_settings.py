"""Unit tests for environment settings."""

from pathlib import Path

import pytest

from load_disaggregation.infrastructure.config.settings import Settings


class TestSettings:
    """Tests for Settings."""

    @pytest.fixture(autouse=True)
    def isolated(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)

    def test_prefixed_environment_overrides(self, monkeypatch):
        monkeypatch.setenv("LOAD_DISAGG_OUTPUT_DIR", "runs")
        monkeypatch.setenv("LOAD_DISAGG_WORKERS", "3")
        settings = Settings()
        assert settings.output_dir == Path("runs")
        assert settings.workers == 3

    def test_manifest_version_is_not_a_setting(self, monkeypatch):
        monkeypatch.setenv("LOAD_DISAGG_MANIFEST_VERSION", "2")
        settings = Settings()
        assert not hasattr(settings, "manifest_version")
        assert set(Settings.model_fields) == {"output_dir", "workers", "log_level", "log_format"}
