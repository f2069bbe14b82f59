import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core_sim import RngStream  # noqa: E402


@pytest.fixture
def stream() -> RngStream:
    return RngStream(12345)
