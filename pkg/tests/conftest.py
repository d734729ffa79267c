import numpy as np
import pytest

from sheafcontrol.affine import build_boolean_scheme
from sheafcontrol.boolrelax import build_thresholded_sheaves, error_budget
from sheafcontrol.encode import build_S
from sheafcontrol.problems import BUNDLED, load_bundled


@pytest.fixture(scope="session")
def bundled():
    return {name: load_bundled(name) for name in BUNDLED}


@pytest.fixture(scope="session")
def encoded(bundled):
    return {name: build_S(lp.problem) for name, lp in bundled.items()}


@pytest.fixture(scope="session")
def systems(bundled, encoded):
    """Scheme, error budget and thresholded sheaves of every bundled problem with a nominal block."""
    out = {}
    for name, lp in bundled.items():
        if lp.nominal is None:
            continue
        scheme = build_boolean_scheme(lp.problem, lp.nominal, lp.dynamics, strict=lp.is_affine)
        out[name] = (scheme, error_budget(scheme), build_thresholded_sheaves(encoded[name], scheme))
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
