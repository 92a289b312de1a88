#!/usr/bin/env python3

import datetime
import logging
import time

import numpy as np
import pytest

from flowBR.exceptions import AllPointsLost, FlowBRError, PipelineError
from flowBR.helpers import as_points, get_elapsed_time, midpoint, window_to_half_width
from flowBR.logger import close_logger, configure_logger
from flowBR.timeout import timeout


def test_helpers_01():
    assert window_to_half_width(20) == 10
    assert window_to_half_width(40) == 20
    assert midpoint((0, 0), (4, 2)) == (2.0, 1.0)
    assert as_points([]).shape == (0, 2)
    assert as_points([(1, 2), (3, 4)]).tolist() == [[1.0, 2.0], [3.0, 4.0]]


def test_elapsed_02():
    start = datetime.datetime(2020, 1, 1, 10, 0, 0)
    runtime, time_str = get_elapsed_time(start, start + datetime.timedelta(hours=1, minutes=2, seconds=3))
    assert runtime == 3723.0
    assert time_str == "1 hours, 2 minutes, 3 seconds"
    assert get_elapsed_time(start, start)[1] == "0 seconds"
    assert get_elapsed_time(start, start + datetime.timedelta(minutes=5))[1] == "5 minutes, "


def test_logger_03(tmp_path):
    log_file = tmp_path / "flowbr.log"
    logger = configure_logger(logger_file=str(log_file), logger_level="TRACE", to_stderr=False, to_file=True)
    assert logging.TRACE == logging.DEBUG - 5
    logging.getLogger("flowBR.test").trace("tracing a point")
    close_logger(logger)
    assert logger.handlers == []
    assert "TRACE flowBR.test: tracing a point" in log_file.read_text()
    logger.setLevel(logging.WARNING)


def test_exceptions_04():
    cause = AllPointsLost("All points lost at frame 1.", frame_index=1)
    error = PipelineError("track", cause)
    assert str(error) == "[track] All points lost at frame 1."
    assert repr(error) == "PipelineError"
    assert error.cause.frame_index == 1
    assert isinstance(error, FlowBRError)
    assert str(FlowBRError()) == "FlowBRError"


def test_timeout_05():
    with pytest.raises(TimeoutError):
        with timeout(1, "too slow"):
            time.sleep(2)
    with timeout(0):
        time.sleep(0.01)
    with timeout(2):
        value = np.sum(np.arange(10))
    assert value == 45


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    test_helpers_01()
    test_elapsed_02()
    test_logger_03(Path(tempfile.mkdtemp()))
    test_exceptions_04()
    test_timeout_05()
