"""
Test settings, numerics constants, logging and error payloads
"""

import orjson
import pytest
from loguru import logger

from nsflow.core.config import Settings
from nsflow.core.exceptions import (
    InvalidArgumentError,
    NsflowError,
    NumericalFailureError,
    ProblemValidationError,
    RefusedError,
    UnsupportedConfigurationError,
    UnsupportedError,
)
from nsflow.core.logging import setup_logging
from nsflow.core.numerics_config import DEFAULTS, NumericsConfigLoader, numerics


def test_settings_read_environment(monkeypatch):
    """NSFLOW_* variables override the defaults"""
    monkeypatch.setenv("NSFLOW_THREADS", "2")
    monkeypatch.setenv("NSFLOW_LOG_FORMAT", "json")
    fresh = Settings()
    assert fresh.threads == 2
    assert fresh.log_format == "json"


def test_settings_reject_bad_log_format(monkeypatch):
    monkeypatch.setenv("NSFLOW_LOG_FORMAT", "xml")
    with pytest.raises(ValueError):
        Settings()


def test_numerics_sections_present():
    for section in DEFAULTS:
        assert numerics(section)
    assert numerics("energy")["slack"] == pytest.approx(0.05)
    assert numerics("microlocal")["decay_threshold"] < 0


def test_missing_config_falls_back(tmp_path):
    """A missing YAML file yields the built-in defaults"""
    loader = NumericsConfigLoader(tmp_path / "absent")
    assert loader.load() == DEFAULTS


def test_yaml_overrides_merge(tmp_path):
    (tmp_path / "defaults.yaml").write_text("energy:\n  slack: 0.1\nunknown:\n  a: 1\n")
    loader = NumericsConfigLoader(tmp_path)
    constants = loader.load()
    assert constants["energy"]["slack"] == pytest.approx(0.1)
    assert "unknown" not in constants
    assert constants["solvers"] == DEFAULTS["solvers"]


@pytest.mark.parametrize(
    "error_cls, code, kind",
    [
        (InvalidArgumentError, 2, "invalid-argument"),
        (ProblemValidationError, 2, "validation"),
        (UnsupportedError, 2, "unsupported"),
        (NumericalFailureError, 3, "numerical-failure"),
        (UnsupportedConfigurationError, 3, "unsupported-configuration"),
        (RefusedError, 3, "refused"),
    ],
)
def test_error_exit_codes(error_cls, code, kind):
    error = error_cls("boom", where=[1, 2])
    assert isinstance(error, NsflowError)
    assert error.exit_code == code
    payload = orjson.loads(orjson.dumps(error.to_dict()))
    assert payload == {"error": kind, "detail": "boom", "context": {"where": [1, 2]}}


def test_error_default_detail():
    assert str(RefusedError()) == "Operation refused"


def test_json_logging_serializes(capsys):
    setup_logging("INFO", "json")
    logger.info("solver started")
    record = orjson.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert record["record"]["message"] == "solver started"
    setup_logging("WARNING", "text")
