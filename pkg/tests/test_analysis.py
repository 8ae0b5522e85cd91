from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scaller import refdata
from scaller.analysis import (SchemaError, SweepTable, analyze_tables,
                              corner_stats, cross_chip_characterization,
                              diff_distribution, mean_freq_vs_selection,
                              normality_stat, read_sweep_csv, selection_order,
                              sweep, sweep_chip, tuning_range,
                              tuning_step_khz, write_figure_data,
                              write_sweep_csv)
from scaller.calibration import default_delay_params
from scaller.factory import build_population
from scaller.model import (ContractError, DelayParams, ROConfig, ROInstance,
                           Selection, frequency, FAST, SLOW, REF, LLE)
from scaller.variation import presilicon_variation_params


def test_selection_order_example():
    assert [s.as_string() for s in selection_order(2)] == \
        ["00", "10", "01", "11"]  # leftmost char is stage 0 (bit 0)
    assert [s.as_int() for s in selection_order(2)] == [0, 1, 2, 3]


@given(st.integers(1, 7))
def test_selection_order_properties(k):
    order = selection_order(k)
    assert len(order) == 2 ** k
    assert len({s.bits for s in order}) == 2 ** k
    counts = [s.ext_count for s in order]
    assert counts == sorted(counts)
    assert order[0].as_int() == 0 and order[-1].as_int() == 2 ** k - 1


def test_selection_order_rejects_bad_k():
    with pytest.raises(ContractError):
        selection_order(0)


def make_pair(k=5, speed=FAST, sigma=0.01, seed=0, g=1.0):
    from scaller.factory import ROPair
    rng = np.random.default_rng(seed)
    cfg_r, cfg_l = ROConfig(k, speed, REF), ROConfig(k, speed, LLE)
    ref = ROInstance(cfg_r, np.exp(sigma * rng.standard_normal(cfg_r.n_devices)), g)
    lle = ROInstance(cfg_l, np.exp(sigma * rng.standard_normal(cfg_l.n_devices)), g)
    return ROPair(0, k, speed, ref, lle)


def test_sweep_matches_direct_evaluation(dparams):
    pair = make_pair()
    table = sweep(pair, dparams)
    assert len(table.selections) == 32
    for sel, fr, fl in zip(table.selections, table.f_ref, table.f_lle):
        assert fr == pytest.approx(frequency(pair.ref, sel, dparams), rel=1e-12)
        assert fl == pytest.approx(frequency(pair.lle, sel, dparams), rel=1e-12)


def test_ref_corner_gap_comes_from_mux_asymmetry(dparams):
    # nominal Ref instance: All-1s vs All-0s differ only via the MUX paths
    pair = make_pair(sigma=0.0)
    table = sweep(pair, dparams)
    d0 = 1e6 / (2.0 * table.f_ref[0])
    d1 = 1e6 / (2.0 * table.f_ref[-1])
    assert d0 - d1 == pytest.approx(5 * (dparams.d_mux0 - dparams.d_mux1),
                                    rel=1e-9)


def test_tuning_range_and_diff_oracle(dparams):
    rng = np.random.default_rng(4)
    for seed in range(20):
        pair = make_pair(k=(5, 6, 7)[seed % 3], seed=seed)
        t = sweep(pair, dparams)
        assert tuning_range(t.f_lle) == pytest.approx(
            max(t.f_lle) - min(t.f_lle))
        np.testing.assert_allclose(diff_distribution(t), t.f_lle - t.f_ref)
    with pytest.raises(ContractError):
        tuning_range([])


def test_regression_recovers_injected_line():
    k = 5
    idx = np.arange(2 ** k, dtype=np.float64)
    sels = selection_order(k)
    tables = []
    for a, b in ((700.0, 0.25), (710.0, 0.25)):
        f_ref = a + 0.1 * idx
        f_lle = a - 2.0 + b * idx
        tables.append(SweepTable(0, len(tables), k, FAST, sels, f_ref, f_lle))
    curve = mean_freq_vs_selection(tables)
    assert curve.slope_ref == pytest.approx(0.1, abs=1e-9)
    assert curve.slope_lle == pytest.approx(0.25, abs=1e-9)
    np.testing.assert_allclose(curve.mean_ref, 705.0 + 0.1 * idx)
    assert tuning_step_khz(curve.mean_lle) == pytest.approx(250.0, abs=1e-6)


def test_mixed_types_rejected(dparams):
    t5 = sweep(make_pair(k=5), dparams)
    t6 = sweep(make_pair(k=6), dparams)
    with pytest.raises(ContractError):
        mean_freq_vs_selection([t5, t6])
    with pytest.raises(ContractError):
        mean_freq_vs_selection([])


def test_tuning_step_validation():
    with pytest.raises(ContractError):
        tuning_step_khz([1.0, 2.0, 3.0])


def test_normality_stat_flags_bimodal():
    x = np.concatenate([np.full(50, -1.0), np.full(50, 1.0)])
    x += 0.01 * np.sin(np.arange(100))  # break exact ties
    stat, p = normality_stat(x)
    assert p < 0.01


def test_zero_variance_population_stats(dparams):
    pop = build_population(1, 3, dparams, presilicon_variation_params())
    cs = corner_stats(pop, 5, FAST)
    for mean, std in cs.cells.values():
        # identical chips up to float rounding of identical inputs
        assert std <= 1e-9 * mean
    assert cs.n_samples == 3 * 36
    cc = cross_chip_characterization(pop, 7, FAST)
    vals = cc["per_chip_mhz"]
    assert max(vals) == min(vals)
    assert cc["summary"]["median"] == pytest.approx(vals[0])


def test_corner_stats_per_chip(small_pop):
    cs = corner_stats(small_pop, 6, FAST, per_chip=True)
    assert set(cs.per_chip) == {0, 1, 2, 3}
    d = cs.to_dict()
    assert d["k_mux"] == 6 and "cells" in d


def test_sweep_csv_round_trip(tmp_path, dparams):
    pair = make_pair(k=6, seed=3)
    table = sweep(pair, dparams)
    table.chip_id = 7
    path = tmp_path / "chip007_block000.csv"
    write_sweep_csv(table, path)
    header = path.read_text().splitlines()[0]
    assert header == ("chip_id,block_id,k_mux,speed,sel_bits,ext_count,"
                      "f_ref_mhz,f_lle_mhz")
    loaded = read_sweep_csv(path)
    assert loaded.chip_id == 7 and loaded.k_mux == 6
    np.testing.assert_array_equal(loaded.f_ref, table.f_ref)
    np.testing.assert_array_equal(loaded.f_lle, table.f_lle)


def test_sweep_csv_schema_errors(tmp_path, dparams):
    table = sweep(make_pair(), dparams)
    path = tmp_path / "ok.csv"
    write_sweep_csv(table, path)
    lines = path.read_text().splitlines()

    bad = tmp_path / "bad.csv"
    bad.write_text("nope\n")
    with pytest.raises(SchemaError):
        read_sweep_csv(bad)

    bad.write_text("\n".join(lines[:10]) + "\n")  # truncated
    with pytest.raises(SchemaError):
        read_sweep_csv(bad)

    swapped = lines[:1] + [lines[2], lines[1]] + lines[3:]
    bad.write_text("\n".join(swapped) + "\n")  # non-canonical order
    with pytest.raises(SchemaError):
        read_sweep_csv(bad)

    bad.write_text("")
    with pytest.raises(SchemaError):
        read_sweep_csv(bad)


def test_analyze_tables_report(small_pop, tmp_path):
    tables = []
    for chip in small_pop.chips:
        tables.extend(sweep_chip(chip, small_pop.dparams, speed=FAST))
    report = analyze_tables(tables, population=small_pop, fig_chip=2)
    assert set(report["types"]) == {"5mux-fast", "6mux-fast", "7mux-fast"}
    t5 = report["types"]["5mux-fast"]
    assert t5["n_blocks"] == 4 * 36
    assert t5["slopes"]["slope_lle_mhz"] > t5["slopes"]["slope_ref_mhz"] > 0
    assert t5["diff_normality"]["n_blocks"] == 36
    assert "cross_chip_7mux_fast" in report
    assert report["power"]["leakage_uw"]["n"] == 4
    assert len(report["power"]["dynamic_7mux"]["rows"]) == 2 * (36 + 32)
    import json
    json.dumps(report)  # must be serializable

    write_figure_data(tables, tmp_path / "figs", population=small_pop,
                      fig_chip=2)
    names = sorted(p.name for p in (tmp_path / "figs").iterdir())
    assert names == ["fig5_dynamic.csv", "fig5_leakage.csv", "fig6a.csv",
                     "fig6b.csv", "fig6c.csv", "fig6d.csv", "fig7.csv"]


def test_analyze_tables_empty():
    with pytest.raises(ContractError):
        analyze_tables([])


def test_cross_chip_gap_positive(small_pop):
    cc = cross_chip_characterization(small_pop)
    assert all(v > 0 for v in cc["per_chip_mhz"])
    assert cc["summary"]["min"] <= cc["summary"]["median"] \
        <= cc["summary"]["max"]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_sweep_always_positive_and_canonical(seed):
    dparams = default_delay_params()
    pair = make_pair(k=5, seed=seed, sigma=0.02)
    t = sweep(pair, dparams)
    assert np.all(t.f_ref > 0) and np.all(t.f_lle > 0)
    assert [s.bits for s in t.selections] == \
        [s.bits for s in selection_order(5)]
