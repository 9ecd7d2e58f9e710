# ==============================================================================
# test_env_utils.py  –  Tests for environment lookups
# ==============================================================================

from pathlib import Path

import pytest

from singshift.utils import env_utils


def test_env_str(monkeypatch):
    monkeypatch.setenv("SINGSHIFT_TEST_VAR", "  value ")
    assert env_utils.env_str("SINGSHIFT_TEST_VAR") == "value"
    monkeypatch.setenv("SINGSHIFT_TEST_VAR", "   ")
    assert env_utils.env_str("SINGSHIFT_TEST_VAR", "fallback") == "fallback"
    monkeypatch.delenv("SINGSHIFT_TEST_VAR")
    assert env_utils.env_str("SINGSHIFT_TEST_VAR") is None


@pytest.mark.parametrize("raw, expected", [("1", True), ("TRUE", True), ("yes", True), ("0", False), ("off", False)])
def test_bool_env(monkeypatch, raw, expected):
    monkeypatch.setenv("SINGSHIFT_TEST_FLAG", raw)
    assert env_utils.bool_env("SINGSHIFT_TEST_FLAG") is expected


def test_bool_env_default(monkeypatch):
    monkeypatch.delenv("SINGSHIFT_TEST_FLAG", raising=False)
    assert env_utils.bool_env("SINGSHIFT_TEST_FLAG", "true") is True


def test_int_env(monkeypatch):
    monkeypatch.delenv("SINGSHIFT_TEST_INT", raising=False)
    assert env_utils.int_env("SINGSHIFT_TEST_INT", 5) == 5
    monkeypatch.setenv("SINGSHIFT_TEST_INT", "12")
    assert env_utils.int_env("SINGSHIFT_TEST_INT", 5) == 12
    monkeypatch.setenv("SINGSHIFT_TEST_INT", "twelve")
    with pytest.raises(RuntimeError, match="SINGSHIFT_TEST_INT"):
        env_utils.int_env("SINGSHIFT_TEST_INT", 5)


def test_torch_threads(monkeypatch):
    calls = []
    monkeypatch.setattr("torch.set_num_threads", calls.append)
    monkeypatch.setenv("SINGSHIFT_NUM_THREADS", "0")
    assert env_utils.configure_torch_threads() is None
    monkeypatch.setenv("SINGSHIFT_NUM_THREADS", "2")
    assert env_utils.configure_torch_threads() == 2
    assert calls == [2]


def test_results_db_url(monkeypatch, tmp_path):
    monkeypatch.delenv("SINGSHIFT_RESULTS_DB", raising=False)
    url = env_utils.get_results_db_url(tmp_path)
    assert url == f"sqlite:///{Path(tmp_path).resolve() / 'results.db'}"
    monkeypatch.setenv("SINGSHIFT_RESULTS_DB", "sqlite:///:memory:")
    assert env_utils.get_results_db_url(tmp_path) == "sqlite:///:memory:"
