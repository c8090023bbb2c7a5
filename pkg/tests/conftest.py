from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from setsense.config import EngineConfig, default_calibration
from setsense.geometry import calculate_areas


@pytest.fixture
def cal():
    """Canonical test calibration: 1280x720, net x 240..1040, net band y 180..480."""
    return default_calibration()


@pytest.fixture
def sections(cal):
    return calculate_areas(cal)


@pytest.fixture
def config():
    return EngineConfig.default()
