"""Shared fixtures; the modules live at the repository root."""

import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from circuit_blocks import (  # noqa: E402
    CompensatorSpec,
    OpAmpModel,
    canonical_advance_spec,
    rc_lowpass_block,
)

RC_R = 1000.0
RC_C = 1e-6
RC = RC_R * RC_C


@pytest.fixture
def rc_line():
    return rc_lowpass_block(RC_R, RC_C)


@pytest.fixture
def ideal_rc_spec(rc_line):
    """RC feedback element with an amplifier close to the ideal limit (GBW = 1e4 / RC)."""
    return CompensatorSpec(rc_line, OpAmpModel(dc_gain=1e8, pole_frequency=1e-4 / RC))


@pytest.fixture
def advance_spec():
    return canonical_advance_spec()
