import logging
import logging.handlers

import pytest

from geofeedkit.logger import LoggerConfigError, NamedLogger, build_handler, component_logger


def test_named_logger_prefix():
    log = NamedLogger(logging.getLogger("x"), {"name": "FETCH"})
    assert log.process("hello", {}) == ("[FETCH]: hello", {})

    log = NamedLogger(logging.getLogger("x"), {"name": None})
    assert log.process("hello", {}) == ("hello", {})


def test_component_logger(caplog):
    log = component_logger("geofeedkit.tests", "TEST")
    with caplog.at_level(logging.INFO, logger="geofeedkit.tests"):
        log.info("fetched %d", 3)
    assert "[TEST]: fetched 3" in caplog.text


def test_stream_handler():
    handler = build_handler("stderr", "INFO")
    assert handler["class"] == "logging.StreamHandler"


@pytest.mark.parametrize(
    "rotate, arg, key, expected",
    [
        ("size", "10M", "maxBytes", 10 * 2 ** 20),
        ("size", "512", "maxBytes", 512),
        ("time", "2:H", "interval", 2),
        ("time", "midnight", "when", "midnight"),
    ],
)
def test_rotation_handlers(tmp_path, rotate, arg, key, expected):
    handler = build_handler(str(tmp_path / "log"), "DEBUG", rotate, arg)
    assert handler[key] == expected


@pytest.mark.parametrize("rotate, arg", [("size", "10X"), ("time", "fortnight"), ("size", None)])
def test_rotation_errors(tmp_path, rotate, arg):
    with pytest.raises(LoggerConfigError):
        build_handler(str(tmp_path / "log"), "DEBUG", rotate, arg)


def test_plain_file_handler(tmp_path):
    handler = build_handler(str(tmp_path / "log"), "DEBUG")
    assert handler["class"] == "logging.FileHandler"
