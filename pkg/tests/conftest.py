from __future__ import annotations

import pytest

from scaller import (build_population, default_delay_params,
                     silicon_delay_params, silicon_variation_params)


@pytest.fixture(scope="session")
def dparams():
    return default_delay_params()


@pytest.fixture(scope="session")
def silicon_dp():
    return silicon_delay_params()


@pytest.fixture(scope="session")
def silicon_vp():
    return silicon_variation_params()


@pytest.fixture(scope="session")
def small_pop(silicon_dp, silicon_vp):
    return build_population(0, 4, silicon_dp, silicon_vp)
