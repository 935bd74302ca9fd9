from __future__ import annotations

import pytest

from heatquant.rng import RngStream


@pytest.fixture
def rng():
    return RngStream(1234, 0)
