from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scaller.model import (ContractError, DelayParams, InverterVariant,
                           ParameterError, ROConfig, ROInstance, Selection,
                           device_layout, frequency, half_period,
                           selection_components, stage_delay,
                           FAST, SLOW, REF, LLE)

SIMPLE = DelayParams(d_inv=10.0, d_mux0=50.0, d_mux1=49.0, d_nand=10.0,
                     d_del_fast=30.0, d_del_slow=150.0)

ALL_CONFIGS = [ROConfig(k, speed, flavor)
               for k in (5, 6, 7) for speed in (FAST, SLOW)
               for flavor in (REF, LLE)]


def random_instance(cfg, rng, sigma=0.02):
    eps = np.exp(sigma * rng.standard_normal(cfg.n_devices))
    g = float(np.exp(sigma * rng.standard_normal()))
    return ROInstance(cfg, eps, g)


def test_stage_delay_example():
    # bit 0 selects the shortened-well inverter in an LLE stage
    d = stage_delay(SIMPLE, InverterVariant.SHT, 0)
    assert d == pytest.approx(50.0 + 10.0 * 1.0286)
    assert stage_delay(SIMPLE, InverterVariant.BL, 1) == pytest.approx(59.0)


def test_stage_delay_validation():
    with pytest.raises(ContractError):
        stage_delay(SIMPLE, InverterVariant.BL, 2)
    with pytest.raises(ParameterError):
        stage_delay(SIMPLE, InverterVariant.BL, 0, eps_mux=-1.0)


def test_parity_nine_inverting_stages():
    for cfg in ALL_CONFIGS:
        assert cfg.inverting_stages == 9
        assert cfg.inverting_stages % 2 == 1


def test_device_counts_and_layout():
    for cfg in ALL_CONFIGS:
        lay = device_layout(cfg)
        n = cfg.n_devices
        assert n == 3 * cfg.k_mux + (8 - cfg.k_mux) + 1 + cfg.n_del
        assert lay["del"].stop == n
        covered = (np.arange(n) >= 0)
        assert covered.all()


def test_config_validation():
    with pytest.raises(ParameterError):
        ROConfig(4, FAST, REF)
    with pytest.raises(ParameterError):
        ROConfig(5, "medium", REF)
    with pytest.raises(ParameterError):
        ROConfig(5, FAST, "other")


def test_delay_params_validation():
    with pytest.raises(ParameterError):
        DelayParams(d_inv=-1, d_mux0=50, d_mux1=49, d_nand=10,
                    d_del_fast=30, d_del_slow=150)
    with pytest.raises(ParameterError):
        DelayParams(d_inv=10, d_mux0=49, d_mux1=50, d_nand=10,
                    d_del_fast=30, d_del_slow=150)
    with pytest.raises(ParameterError):
        DelayParams(d_inv=10, d_mux0=50, d_mux1=49, d_nand=10,
                    d_del_fast=30, d_del_slow=150, m_sht=0.9, m_ext=1.1)


def test_selection_round_trips():
    for k in (5, 6, 7):
        for v in (0, 1, 2 ** k - 1, 21 % 2 ** k):
            s = Selection.from_int(v, k)
            assert s.as_int() == v
            assert Selection.from_string(s.as_string()) == s
            assert len(s) == k
    assert Selection.from_string("101").bits == (1, 0, 1)
    assert Selection.from_string("100").as_int() == 1  # leftmost is stage 0
    with pytest.raises(ParameterError):
        Selection((0, 2))


def test_instance_validation():
    cfg = ROConfig(5, FAST, REF)
    with pytest.raises(ContractError):
        ROInstance(cfg, np.ones(cfg.n_devices - 1))
    with pytest.raises(ParameterError):
        ROInstance(cfg, np.zeros(cfg.n_devices))
    with pytest.raises(ContractError):
        half_period(ROInstance.nominal(cfg), Selection.all_zeros(6), SIMPLE)


def brute_force_half_period(inst, sel, p):
    """Independent oracle: explicit per-stage list, no layout slices."""
    cfg = inst.config
    k = cfg.k_mux
    eps = inst.eps
    stages = []
    for i, bit in enumerate(sel.bits):
        eps_mux = eps[i]
        eps_inv = eps[2 * k + i] if bit else eps[k + i]
        d_mux = p.d_mux1 if bit else p.d_mux0
        if cfg.flavor == LLE:
            m = p.m_ext if bit else p.m_sht
        else:
            m = 1.0
        stages.append(eps_mux * d_mux + eps_inv * p.d_inv * m)
    for j in range(8 - k):
        stages.append(eps[3 * k + j] * p.d_inv)
    stages.append(eps[3 * k + (8 - k)] * p.d_nand)
    d_del = p.d_del_fast if cfg.speed == FAST else p.d_del_slow
    for j in range(cfg.n_del):
        stages.append(eps[3 * k + (8 - k) + 1 + j] * d_del)
    return inst.g_chip * sum(stages)


def test_additivity_oracle_random_instances():
    rng = np.random.default_rng(123)
    for trial in range(100):
        cfg = ALL_CONFIGS[trial % len(ALL_CONFIGS)]
        inst = random_instance(cfg, rng)
        sel = Selection.from_int(int(rng.integers(2 ** cfg.k_mux)), cfg.k_mux)
        got = half_period(inst, sel, SIMPLE)
        want = brute_force_half_period(inst, sel, SIMPLE)
        assert got == pytest.approx(want, rel=1e-12)


def test_selection_components_match_half_period():
    rng = np.random.default_rng(5)
    for trial in range(50):
        cfg = ALL_CONFIGS[trial % len(ALL_CONFIGS)]
        inst = random_instance(cfg, rng)
        base, deltas = selection_components(inst, SIMPLE)
        for v in rng.integers(0, 2 ** cfg.k_mux, size=4):
            sel = Selection.from_int(int(v), cfg.k_mux)
            direct = half_period(inst, sel, SIMPLE)
            fast = base + np.asarray(sel.bits) @ deltas
            assert fast == pytest.approx(direct, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 7 - 1),
       st.integers(0, 6),
       st.lists(st.floats(0.98, 1.02), min_size=26, max_size=26))
def test_lle_monotonicity_property(value, bit_pos, eps_vals):
    """Flipping any 0 bit strictly raises frequency when eps stays within
    the band where the shortened/extended delay gap dominates."""
    cfg = ROConfig(7, FAST, LLE)
    inst = ROInstance(cfg, np.array(eps_vals[:cfg.n_devices]))
    bit_pos = bit_pos % cfg.k_mux
    sel = Selection.from_int(value & ~(1 << bit_pos), cfg.k_mux)
    flipped = Selection.from_int(sel.as_int() | (1 << bit_pos), cfg.k_mux)
    assert frequency(inst, flipped, SIMPLE) > frequency(inst, sel, SIMPLE)


def test_extremes_all_ones_fastest_all_zeros_slowest():
    rng = np.random.default_rng(9)
    for k in (5, 6, 7):
        cfg = ROConfig(k, FAST, LLE)
        inst = random_instance(cfg, rng, sigma=0.005)
        f = [frequency(inst, Selection.from_int(v, k), SIMPLE)
             for v in range(2 ** k)]
        assert int(np.argmax(f)) == 2 ** k - 1
        assert int(np.argmin(f)) == 0


def test_degenerate_equivalence_identical_eps():
    p = DelayParams(d_inv=10, d_mux0=50, d_mux1=50, d_nand=10,
                    d_del_fast=30, d_del_slow=150, m_sht=1.0, m_ext=1.0)
    rng = np.random.default_rng(2)
    cfg_r, cfg_l = ROConfig(6, SLOW, REF), ROConfig(6, SLOW, LLE)
    eps = np.exp(0.02 * rng.standard_normal(cfg_r.n_devices))
    for v in range(2 ** 6):
        sel = Selection.from_int(v, 6)
        assert (frequency(ROInstance(cfg_r, eps), sel, p)
                == frequency(ROInstance(cfg_l, eps), sel, p))


def test_scale_invariance():
    cfg = ROConfig(5, FAST, LLE)
    inst = ROInstance.nominal(cfg)
    sel = Selection.from_int(13, 5)
    f1 = frequency(inst, sel, SIMPLE)
    f2 = frequency(inst, sel, SIMPLE.scaled(2.0))
    assert f2 == pytest.approx(f1 / 2.0, rel=1e-12)
    g2 = ROInstance.nominal(cfg, g_chip=2.0)
    assert frequency(g2, sel, SIMPLE) == pytest.approx(f1 / 2.0, rel=1e-12)
