import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from erlyf import SpinParams
from erlyf.units import mhz_to_angular


@pytest.fixture(scope="session")
def ground_params():
    """Published ground-manifold parameter set of 167Er:LiYF4."""
    return SpinParams(
        g_par=3.137,
        g_perp=8.105,
        a_hf=mhz_to_angular(-325.8),
        b_hf=mhz_to_angular(840.0),
    )


@pytest.fixture(scope="session")
def excited_params():
    """Excited-manifold set; transverse g unknown experimentally, kept 0."""
    return SpinParams(
        g_par=1.56,
        g_perp=0.0,
        a_hf=mhz_to_angular(-170.0),
        b_hf=mhz_to_angular(970.0),
        p_quad=mhz_to_angular(15.0),
    )
