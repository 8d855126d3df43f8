import numpy as np
import pytest

from mollowkit.params import DriveParams, EmitterParams

T1_PS, T2_PS = 56.8, 103.5


@pytest.fixture
def emitter():
    return EmitterParams.from_ps(T1_PS, T2_PS)


@pytest.fixture
def drive4():
    return DriveParams.from_ghz(4.0)


def random_parameter_sets(n, seed, oscillatory=None, detuned=False):
    """Valid (emitter, drive) pairs spanning weak to strong drive.

    ``oscillatory`` True/False restricts to one side of the damping threshold.
    """
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        t1 = rng.uniform(0.02, 0.5)
        t2 = rng.uniform(0.2, 1.0) * 2 * t1
        e = EmitterParams(t1, t2)
        rabi = np.exp(rng.uniform(np.log(0.3), np.log(200.0)))
        det = rng.uniform(-50, 50) if detuned else 0.0
        d = DriveParams(rabi, det)
        above = rabi > abs(e.damping_offset) * 1.05
        below = rabi < abs(e.damping_offset) * 0.95
        if oscillatory is True and not above:
            continue
        if oscillatory is False and not below:
            continue
        out.append((e, d))
    return out
