"""Selection sweeps and population statistics.

Reproduces the measurement methodology: per-pair selection sweeps in a
canonical order, frequency-difference distributions, tuning ranges and
steps, mean-frequency slopes, corner statistics and cross-chip
characterization.  All statistics are pure folds over immutable data with
ordered summation, so results are bit-stable across runs.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sstats

from .model import (ContractError, DelayParams, Selection,
                    selection_components, FAST, SLOW)

SWEEP_COLUMNS = ("chip_id", "block_id", "k_mux", "speed", "sel_bits",
                 "ext_count", "f_ref_mhz", "f_lle_mhz")


class SchemaError(ValueError):
    """A data file violates its documented schema."""


def selection_order(k: int):
    """Canonical sweep order: ext_count ascending, then binary value
    ascending (bit 0 = stage 0 = least significant)."""
    if not 1 <= k <= 7:
        raise ContractError(f"k must be in 1..7, got {k}")
    sels = [Selection.from_int(v, k) for v in range(2 ** k)]
    sels.sort(key=lambda s: (s.ext_count, s.as_int()))
    return sels


@dataclass
class SweepTable:
    chip_id: int
    block_id: int
    k_mux: int
    speed: str
    selections: list
    f_ref: np.ndarray
    f_lle: np.ndarray

    def __post_init__(self):
        n = 2 ** self.k_mux
        if not (len(self.selections) == len(self.f_ref)
                == len(self.f_lle) == n):
            raise ContractError(f"sweep table must have {n} rows")
        if np.any(self.f_ref <= 0) or np.any(self.f_lle <= 0):
            raise ContractError("frequencies must be positive")

    @property
    def type_key(self):
        return (self.speed, self.k_mux)


def sweep(pair, dparams: DelayParams, order=None) -> SweepTable:
    """Evaluate both pair members at every selection (equal words in both)."""
    if order is None:
        order = selection_order(pair.k_mux)
    bits = np.array([s.bits for s in order], dtype=np.float64)
    freqs = []
    for inst in (pair.ref, pair.lle):
        base, deltas = selection_components(inst, dparams)
        freqs.append(1e6 / (2.0 * (base + bits @ deltas)))
    return SweepTable(chip_id=getattr(pair, "chip_id", -1),
                      block_id=pair.block_id, k_mux=pair.k_mux,
                      speed=pair.speed, selections=list(order),
                      f_ref=freqs[0], f_lle=freqs[1])


def sweep_chip(chip, dparams: DelayParams, k_mux=None, speed=None):
    """Sweep every (optionally filtered) pair of a chip."""
    tables = []
    orders = {k: selection_order(k) for k in (5, 6, 7)}
    for pair in chip.blocks:
        if k_mux is not None and pair.k_mux != k_mux:
            continue
        if speed is not None and pair.speed != speed:
            continue
        t = sweep(pair, dparams, orders[pair.k_mux])
        t.chip_id = chip.chip_id
        tables.append(t)
    return tables


def tuning_range(freqs) -> float:
    freqs = np.asarray(freqs, dtype=np.float64)
    if freqs.size == 0:
        raise ContractError("tuning_range needs a non-empty column")
    return float(np.max(freqs) - np.min(freqs))


def diff_distribution(table: SweepTable) -> np.ndarray:
    """Per-selection frequency difference f_lle - f_ref, canonical order."""
    return table.f_lle - table.f_ref


@dataclass
class MeanCurve:
    k_mux: int
    speed: str
    n_blocks: int
    mean_ref: np.ndarray
    mean_lle: np.ndarray
    slope_ref: float
    slope_lle: float


def mean_freq_vs_selection(tables) -> MeanCurve:
    """Per-selection-index mean over same-type blocks plus fitted slopes
    (least-squares line through (index, mean MHz), intercept free)."""
    tables = list(tables)
    if not tables:
        raise ContractError("need at least one sweep table")
    key = tables[0].type_key
    if any(t.type_key != key for t in tables):
        raise ContractError("mean_freq_vs_selection requires one config type")
    mean_ref = np.mean([t.f_ref for t in tables], axis=0)
    mean_lle = np.mean([t.f_lle for t in tables], axis=0)
    idx = np.arange(mean_ref.size, dtype=np.float64)
    slope_ref = float(np.polyfit(idx, mean_ref, 1)[0])
    slope_lle = float(np.polyfit(idx, mean_lle, 1)[0])
    return MeanCurve(k_mux=tables[0].k_mux, speed=tables[0].speed,
                     n_blocks=len(tables), mean_ref=mean_ref,
                     mean_lle=mean_lle, slope_ref=slope_ref,
                     slope_lle=slope_lle)


def tuning_step_khz(curve) -> float:
    """Endpoint tuning step in KHz: (last - first) / (2^k - 1)."""
    curve = np.asarray(curve, dtype=np.float64)
    n = curve.size
    if n < 2 or (n & (n - 1)) != 0:
        raise ContractError("curve length must be a power of two >= 2")
    return float((curve[-1] - curve[0]) / (n - 1) * 1000.0)


def normality_stat(samples):
    """Skewness/kurtosis omnibus statistic and p-value."""
    stat, p = sstats.normaltest(np.asarray(samples, dtype=np.float64))
    return float(stat), float(p)


# --------------------------------------------------------------------------
# Population-level statistics

def corner_frequencies(population, k_mux: int, speed: str,
                       dparams: DelayParams | None = None) -> dict:
    """All-0s / All-1s frequencies for every block of one type.

    Returns arrays of shape (n_chips, n_blocks_of_type) keyed by
    'ref_all0', 'ref_all1', 'lle_all0', 'lle_all1', plus 'chip_ids'.
    """
    if dparams is None:
        dparams = population.dparams
    out = {key: [] for key in ("ref_all0", "ref_all1", "lle_all0", "lle_all1")}
    chip_ids = []
    for chip in population.chips:
        rows = {key: [] for key in out}
        for pair in chip.pairs_of_type(k_mux, speed):
            for flavor, inst in (("ref", pair.ref), ("lle", pair.lle)):
                base, deltas = selection_components(inst, dparams)
                rows[f"{flavor}_all0"].append(1e6 / (2.0 * base))
                rows[f"{flavor}_all1"].append(
                    1e6 / (2.0 * (base + float(np.sum(deltas)))))
        for key in out:
            out[key].append(rows[key])
        chip_ids.append(chip.chip_id)
    result = {key: np.array(v) for key, v in out.items()}
    result["chip_ids"] = np.array(chip_ids)
    return result


@dataclass
class CornerStats:
    k_mux: int
    speed: str
    n_samples: int
    cells: dict                 # corner name -> (mean, std)
    ordering_ok: bool
    per_chip: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"k_mux": self.k_mux, "speed": self.speed,
                "n_samples": self.n_samples,
                "cells": {k: {"mean": m, "std": s}
                          for k, (m, s) in self.cells.items()},
                "ordering_ok": self.ordering_ok,
                "per_chip": self.per_chip}


_CORNER_KEYS = ("ref_all0", "ref_all1", "lle_all0", "lle_all1")


def _corner_cells(freqs_by_corner) -> dict:
    return {key: (float(np.mean(freqs_by_corner[key])),
                  float(np.std(freqs_by_corner[key], ddof=1)))
            for key in _CORNER_KEYS}


def _ordering_ok(cells) -> bool:
    # Measured relative order of corner means.
    return (cells["ref_all1"][0] > cells["lle_all1"][0]
            > cells["ref_all0"][0] > cells["lle_all0"][0])


def corner_stats(population, k_mux: int, speed: str,
                 dparams: DelayParams | None = None,
                 per_chip: bool = False) -> CornerStats:
    """Mean/std of the four corner selections over all blocks of a type."""
    if not population.chips:
        raise ContractError("population is empty")
    freqs = corner_frequencies(population, k_mux, speed, dparams)
    cells = _corner_cells(freqs)
    per = {}
    if per_chip:
        for i, cid in enumerate(freqs["chip_ids"]):
            sub = {key: freqs[key][i] for key in _CORNER_KEYS}
            per[int(cid)] = {k: {"mean": float(np.mean(v)),
                                 "std": float(np.std(v, ddof=1))}
                             for k, v in sub.items()}
    return CornerStats(k_mux=k_mux, speed=speed,
                       n_samples=int(freqs["ref_all0"].size), cells=cells,
                       ordering_ok=_ordering_ok(cells), per_chip=per)


def cross_chip_characterization(population, k_mux: int = 7,
                                speed: str = FAST,
                                dparams: DelayParams | None = None) -> dict:
    """Per-chip mean of f_ref(All-1s) - f_lle(All-0s) plus a five-number
    summary over chips."""
    if not population.chips:
        raise ContractError("population is empty")
    freqs = corner_frequencies(population, k_mux, speed, dparams)
    per_chip = np.mean(freqs["ref_all1"] - freqs["lle_all0"], axis=1)
    q = np.percentile(per_chip, [0, 25, 50, 75, 100])
    return {"chip_ids": freqs["chip_ids"].tolist(),
            "per_chip_mhz": per_chip.tolist(),
            "summary": {"min": float(q[0]), "q1": float(q[1]),
                        "median": float(q[2]), "q3": float(q[3]),
                        "max": float(q[4])},
            "n_blocks_per_chip": int(freqs["ref_all0"].shape[1])}


# --------------------------------------------------------------------------
# Sweep CSV files

def write_sweep_csv(table: SweepTable, path):
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for sel, fr, fl in zip(table.selections, table.f_ref, table.f_lle):
            w.writerow([table.chip_id, table.block_id, table.k_mux,
                        table.speed, sel.as_string(), sel.ext_count,
                        repr(float(fr)), repr(float(fl))])
    os.replace(tmp, path)


def read_sweep_csv(path) -> SweepTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty sweep file")
        if tuple(header) != SWEEP_COLUMNS:
            raise SchemaError(f"{path}: bad header {header}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    try:
        chip_id, block_id, k = int(rows[0][0]), int(rows[0][1]), int(rows[0][2])
        speed = rows[0][3]
        sels = [Selection.from_string(r[4]) for r in rows]
        f_ref = np.array([float(r[6]) for r in rows])
        f_lle = np.array([float(r[7]) for r in rows])
    except (IndexError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed row ({exc})")
    if speed not in (FAST, SLOW):
        raise SchemaError(f"{path}: bad speed {speed!r}")
    if len(rows) != 2 ** k:
        raise SchemaError(f"{path}: expected {2 ** k} rows, got {len(rows)}")
    expected = [s.bits for s in selection_order(k)]
    if [s.bits for s in sels] != expected:
        raise SchemaError(f"{path}: selections not in canonical order")
    try:
        return SweepTable(chip_id=chip_id, block_id=block_id, k_mux=k,
                          speed=speed, selections=sels,
                          f_ref=f_ref, f_lle=f_lle)
    except ContractError as exc:
        raise SchemaError(f"{path}: {exc}")


# --------------------------------------------------------------------------
# Aggregated report

def analyze_tables(tables, population=None, fig_chip: int | None = None) -> dict:
    """Build the full analysis report from sweep tables.

    ``population`` adds power sections and corner statistics recomputed
    directly from the population (cross-check of the sweep-derived ones).
    ``fig_chip`` selects the chip used for single-chip figures; defaults to
    chip 2 when present, else the smallest chip id.
    """
    tables = list(tables)
    if not tables:
        raise ContractError("no sweep tables to analyze")
    chip_ids = sorted({t.chip_id for t in tables})
    if fig_chip is None:
        fig_chip = 2 if 2 in chip_ids else chip_ids[0]

    by_type = {}
    for t in tables:
        by_type.setdefault(t.type_key, []).append(t)

    report = {"n_tables": len(tables), "chip_ids": chip_ids,
              "fig_chip": fig_chip, "types": {}}

    for (speed, k), group in sorted(by_type.items()):
        all0 = {"ref": np.array([t.f_ref[0] for t in group]),
                "lle": np.array([t.f_lle[0] for t in group])}
        all1 = {"ref": np.array([t.f_ref[-1] for t in group]),
                "lle": np.array([t.f_lle[-1] for t in group])}
        cells = {
            "ref_all0": (float(np.mean(all0["ref"])), float(np.std(all0["ref"], ddof=1))),
            "ref_all1": (float(np.mean(all1["ref"])), float(np.std(all1["ref"], ddof=1))),
            "lle_all0": (float(np.mean(all0["lle"])), float(np.std(all0["lle"], ddof=1))),
            "lle_all1": (float(np.mean(all1["lle"])), float(np.std(all1["lle"], ddof=1))),
        }
        ranges_ref = [tuning_range(t.f_ref) for t in group]
        ranges_lle = [tuning_range(t.f_lle) for t in group]

        fig_tables = [t for t in group if t.chip_id == fig_chip]
        slopes = step = None
        normality = None
        if fig_tables:
            curve = mean_freq_vs_selection(fig_tables)
            slopes = {"slope_ref_mhz": curve.slope_ref,
                      "slope_lle_mhz": curve.slope_lle,
                      "ratio": curve.slope_lle / curve.slope_ref
                      if curve.slope_ref != 0.0 else math.inf}
            step = {"endpoint_khz_ref": tuning_step_khz(curve.mean_ref),
                    "endpoint_khz_lle": tuning_step_khz(curve.mean_lle),
                    "slope_khz_ref": curve.slope_ref * 1000.0,
                    "slope_khz_lle": curve.slope_lle * 1000.0}
            stats_per_block = [normality_stat(diff_distribution(t))
                               for t in fig_tables]
            pooled = np.concatenate(
                [diff_distribution(t) for t in fig_tables])
            pooled_stat = normality_stat(pooled)
            rejected = sum(1 for _, p in stats_per_block if p < 0.05)
            normality = {
                "per_block_rejected_at_5pct": rejected,
                "n_blocks": len(fig_tables),
                "median_stat": float(np.median([s for s, _ in stats_per_block])),
                "pooled_stat": pooled_stat[0], "pooled_p": pooled_stat[1],
            }

        report["types"][f"{k}mux-{speed}"] = {
            "k_mux": k, "speed": speed, "n_blocks": len(group),
            "corner_cells": {key: {"mean": m, "std": s}
                             for key, (m, s) in cells.items()},
            "ordering_ok": _ordering_ok(cells),
            "sigma_lle_gt_ref": {
                "all0": cells["lle_all0"][1] > cells["ref_all0"][1],
                "all1": cells["lle_all1"][1] > cells["ref_all1"][1]},
            "tuning_range_mhz": {
                "ref": _five_number(ranges_ref),
                "lle": _five_number(ranges_lle)},
            "slopes": slopes, "tuning_step": step,
            "diff_normality": normality,
        }

    cross_tables = by_type.get((FAST, 7), [])
    if cross_tables:
        per_chip = {}
        for t in cross_tables:
            per_chip.setdefault(t.chip_id, []).append(
                float(t.f_ref[-1] - t.f_lle[0]))
        ids = sorted(per_chip)
        vals = np.array([np.mean(per_chip[c]) for c in ids])
        q = np.percentile(vals, [0, 25, 50, 75, 100])
        report["cross_chip_7mux_fast"] = {
            "chip_ids": ids, "per_chip_mhz": vals.tolist(),
            "summary": {"min": float(q[0]), "q1": float(q[1]),
                        "median": float(q[2]), "q3": float(q[3]),
                        "max": float(q[4])}}

    if population is not None:
        from .variation import dynamic_power
        leak = np.array([c.sample.leakage for c in population.chips])
        report["power"] = {
            "leakage_uw": {"n": int(leak.size), "mean": float(np.mean(leak)),
                           "std": float(np.std(leak, ddof=1)) if leak.size > 1 else 0.0,
                           "min": float(np.min(leak)), "max": float(np.max(leak)),
                           "p_tt": population.vp.p_tt, "p_ff": population.vp.p_ff},
        }
        chip = next((c for c in population.chips if c.chip_id == fig_chip),
                    population.chips[0])
        dyn = []
        for pair in chip.blocks:
            if pair.k_mux != 7:
                continue
            for flavor, inst in (("ref", pair.ref), ("lle", pair.lle)):
                base, _ = selection_components(inst, population.dparams)
                f = 1e6 / (2.0 * base)
                dyn.append({"block_id": pair.block_id, "speed": pair.speed,
                            "flavor": flavor, "f_mhz": float(f),
                            "p_dyn_uw": dynamic_power(inst, f, population.vp)})
        report["power"]["dynamic_7mux"] = {"chip_id": chip.chip_id,
                                           "rows": dyn}
        for key in ("ref_all0", "lle_all1"):
            pass  # corner cross-check is covered by corner_stats callers
    return report


def _five_number(values) -> dict:
    q = np.percentile(np.asarray(values, dtype=np.float64),
                      [0, 25, 50, 75, 100])
    return {"min": float(q[0]), "q1": float(q[1]), "median": float(q[2]),
            "q3": float(q[3]), "max": float(q[4]), "n": len(values)}


# --------------------------------------------------------------------------
# Figure data files (plot-ready CSVs; no rendering here)

def write_figure_data(tables, outdir, population=None,
                      fig_chip: int | None = None):
    """One CSV per reproduced figure; columns documented in the README."""
    os.makedirs(outdir, exist_ok=True)
    tables = list(tables)
    chip_ids = sorted({t.chip_id for t in tables})
    if fig_chip is None:
        fig_chip = 2 if 2 in chip_ids else chip_ids[0]
    f5 = [t for t in tables
          if t.type_key == (FAST, 5) and t.chip_id == fig_chip]

    def _write(name, header, rows):
        tmp = os.path.join(outdir, f"{name}.csv.tmp")
        with open(tmp, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)
        os.replace(tmp, os.path.join(outdir, f"{name}.csv"))

    if f5:
        t0 = min(f5, key=lambda t: t.block_id)
        _write("fig6a",
               ["index", "sel_bits", "ext_count", "f_ref_mhz", "f_lle_mhz"],
               [[i, s.as_string(), s.ext_count, repr(float(fr)), repr(float(fl))]
                for i, (s, fr, fl) in enumerate(
                    zip(t0.selections, t0.f_ref, t0.f_lle))])
        _write("fig6b", ["index", "diff_mhz"],
               [[i, repr(float(d))]
                for i, d in enumerate(diff_distribution(t0))])
        _write("fig6c", ["block_id", "range_ref_mhz", "range_lle_mhz"],
               [[t.block_id, repr(tuning_range(t.f_ref)),
                 repr(tuning_range(t.f_lle))] for t in f5])
        curve = mean_freq_vs_selection(f5)
        _write("fig6d", ["index", "mean_f_ref_mhz", "mean_f_lle_mhz"],
               [[i, repr(float(r)), repr(float(l))] for i, (r, l) in
                enumerate(zip(curve.mean_ref, curve.mean_lle))])

    f7 = [t for t in tables if t.type_key == (FAST, 7)]
    if f7:
        per_chip = {}
        for t in f7:
            per_chip.setdefault(t.chip_id, []).append(
                float(t.f_ref[-1] - t.f_lle[0]))
        _write("fig7", ["chip_id", "mean_gap_mhz"],
               [[c, repr(float(np.mean(per_chip[c])))]
                for c in sorted(per_chip)])

    if population is not None:
        from .variation import dynamic_power
        _write("fig5_leakage", ["chip_id", "leakage_uw", "p_tt_uw", "p_ff_uw"],
               [[c.chip_id, repr(c.sample.leakage),
                 repr(population.vp.p_tt), repr(population.vp.p_ff)]
                for c in population.chips])
        chip = next((c for c in population.chips if c.chip_id == fig_chip),
                    population.chips[0])
        rows = []
        for pair in chip.blocks:
            if pair.k_mux != 7:
                continue
            for flavor, inst in (("ref", pair.ref), ("lle", pair.lle)):
                base, _ = selection_components(inst, population.dparams)
                f = 1e6 / (2.0 * base)
                rows.append([pair.block_id, pair.speed, flavor,
                             repr(float(f)),
                             repr(dynamic_power(inst, f, population.vp))])
        _write("fig5_dynamic",
               ["block_id", "speed", "flavor", "f_mhz", "p_dyn_uw"], rows)
