from __future__ import annotations

import numpy as np
import pytest

from scaller.model import ContractError, ParameterError, ROConfig, ROInstance
from scaller.variation import (VariationParams, device_eps_batch,
                               dynamic_power, lle_instance_factor,
                               presilicon_variation_params, sample_chip,
                               sample_chips, sample_device_eps,
                               silicon_variation_params, toggling_weight)


def test_validation():
    with pytest.raises(ParameterError):
        VariationParams(sigma_die=-0.1)
    with pytest.raises(ParameterError):
        VariationParams(silicon_scale=0.0)
    with pytest.raises(ParameterError):
        VariationParams(leak_mean=2000.0)  # outside [leak_min, leak_max]
    with pytest.raises(ParameterError):
        VariationParams(leak_sigma=200.0)  # infeasible for the span


def test_round_trip_dict():
    vp = silicon_variation_params()
    assert VariationParams.from_dict(vp.to_dict()) == vp


def test_beta_shape_matches_moments():
    vp = silicon_variation_params()
    a, b = vp.leak_beta_shape()
    span = vp.leak_max - vp.leak_min
    mean = vp.leak_min + span * a / (a + b)
    var = span ** 2 * a * b / ((a + b) ** 2 * (a + b + 1.0))
    assert mean == pytest.approx(vp.leak_mean, rel=1e-12)
    assert np.sqrt(var) == pytest.approx(vp.leak_sigma, rel=1e-12)


def test_chip_sampling_deterministic_and_order_free():
    vp = silicon_variation_params()
    g1, l1 = sample_chips(3, [0, 1, 2, 3], vp)
    g2, l2 = sample_chips(3, [3, 1], vp)
    assert g1[3] == g2[0] and g1[1] == g2[1]
    assert l1[3] == l2[0] and l1[1] == l2[1]
    c = sample_chip(3, 2, vp)
    assert c.g_chip == g1[2] and c.leakage == l1[2]


def test_degenerate_chip_sampling():
    vp = VariationParams(leak_sigma=0.0)
    c = sample_chip(0, 5, vp)
    assert c.g_chip == 1.0
    assert c.leakage == vp.leak_mean


def test_presilicon_mode_is_nominal():
    vp = presilicon_variation_params()
    g, leak = sample_chips(1, np.arange(10), vp)
    np.testing.assert_array_equal(g, np.ones(10))
    keys = np.array([[0, 1, 2], [5, 6, 7]], dtype=np.uint64)
    np.testing.assert_array_equal(device_eps_batch(1, keys, vp), np.ones(2))


def test_leakage_bounds_and_moments():
    vp = silicon_variation_params()
    _, leak = sample_chips(11, np.arange(20000), vp)
    assert vp.leak_min <= leak.min() and leak.max() <= vp.leak_max
    assert np.mean(leak) == pytest.approx(vp.leak_mean, rel=0.02)
    assert np.std(leak, ddof=1) == pytest.approx(vp.leak_sigma, rel=0.1)


def test_leakage_speed_coupling():
    # smaller g_chip (faster chip) should leak more
    vp = silicon_variation_params()
    g, leak = sample_chips(13, np.arange(2000), vp)
    r = np.corrcoef(-np.log(g), leak)[0, 1]
    assert r > 0.3


def test_device_eps_scalar_matches_batch():
    vp = silicon_variation_params()
    keys = np.array([[2, 17, 4], [2, 17, 5], [3, 0, 0]], dtype=np.uint64)
    batch = device_eps_batch(42, keys, vp)
    for row, want in zip(keys, batch):
        got = sample_device_eps(42, *map(int, row), vp)
        assert got == pytest.approx(want, rel=1e-12)
    assert lle_instance_factor(42, 2, 17, vp) > 0.0


def test_dynamic_power_selection_independent():
    vp = silicon_variation_params()
    cfg = ROConfig(5, "fast", "lle")
    inst = ROInstance.nominal(cfg)
    assert toggling_weight(cfg) == cfg.n_devices
    p = dynamic_power(inst, 900.0, vp)
    assert p == pytest.approx(vp.k_dyn * 900.0 * cfg.n_devices)
    with pytest.raises(ContractError):
        dynamic_power(inst, 0.0, vp)
