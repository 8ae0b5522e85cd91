"""Virtual chip construction and structural netlist emission.

A chip carries 224 oscillator pairs in a fixed block order (Slow 5/6/7MUX,
then Fast 5/6/7MUX, dense block ids from 0).  Both members of a pair share
the chip's global delay factor; their device multipliers are independent.
Because all sampling is keyed, chips may be built concurrently and the
result is identical to sequential construction.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import refdata
from .kernels import keyed_normals
from .model import (ContractError, DelayParams, ROConfig, ROInstance,
                    device_layout, FAST, SLOW, REF, LLE)
from .variation import (ChipSample, VariationParams, STREAM_DEVICE,
                        STREAM_LLE_FACTOR, sample_chip, sample_chips)

# Device-index offset separating the LLE member's devices from the Ref
# member's within one block's key space (larger than any device count).
LLE_DEVICE_OFFSET = 64


def floorplan_blocks():
    """(block_id, speed, k_mux) for every pair position on a chip."""
    out = []
    bid = 0
    for speed, k, count in refdata.FLOORPLAN:
        for _ in range(count):
            out.append((bid, speed, k))
            bid += 1
    return out


_BLOCKS = floorplan_blocks()


def _device_key_template():
    """(N, 2) array of (block_id, device_index) covering a whole chip."""
    rows = []
    for bid, speed, k in _BLOCKS:
        n_dev = ROConfig(k, speed, REF).n_devices
        for role_offset in (0, LLE_DEVICE_OFFSET):
            for d in range(n_dev):
                rows.append((bid, role_offset + d))
    return np.array(rows, dtype=np.uint64)


_KEY_TEMPLATE = _device_key_template()


@dataclass
class ROPair:
    block_id: int
    k_mux: int
    speed: str
    ref: ROInstance
    lle: ROInstance

    def __post_init__(self):
        if self.ref.config.sibling(LLE) != self.lle.config:
            raise ContractError("pair members must differ only in flavor")
        if self.ref.g_chip != self.lle.g_chip:
            raise ContractError("pair members must share g_chip")


@dataclass
class Chip:
    chip_id: int
    sample: ChipSample
    blocks: list

    def pairs_of_type(self, k_mux: int, speed: str):
        return [b for b in self.blocks
                if b.k_mux == k_mux and b.speed == speed]


@dataclass
class Population:
    seed: int
    dparams: DelayParams
    vp: VariationParams
    chips: list

    @property
    def n_chips(self) -> int:
        return len(self.chips)

    def to_dict(self) -> dict:
        chips = []
        for chip in self.chips:
            blocks = []
            for b in chip.blocks:
                blocks.append({
                    "block_id": b.block_id, "k_mux": b.k_mux, "speed": b.speed,
                    "eps_ref": b.ref.eps.tolist(),
                    "eps_lle": b.lle.eps.tolist(),
                })
            chips.append({"chip_id": chip.chip_id,
                          "g_chip": chip.sample.g_chip,
                          "leakage": chip.sample.leakage,
                          "blocks": blocks})
        return {"seed": self.seed, "n_chips": self.n_chips,
                "dparams": self.dparams.to_dict(), "vp": self.vp.to_dict(),
                "chips": chips}

    @classmethod
    def from_dict(cls, d: dict) -> "Population":
        dparams = DelayParams.from_dict(d["dparams"])
        vp = VariationParams.from_dict(d["vp"])
        chips = []
        for cd in d["chips"]:
            sample = ChipSample(chip_id=int(cd["chip_id"]),
                                g_chip=float(cd["g_chip"]),
                                leakage=float(cd["leakage"]))
            blocks = []
            for bd in cd["blocks"]:
                k, speed = int(bd["k_mux"]), bd["speed"]
                ref = ROInstance(ROConfig(k, speed, REF),
                                 np.array(bd["eps_ref"]), sample.g_chip)
                lle = ROInstance(ROConfig(k, speed, LLE),
                                 np.array(bd["eps_lle"]), sample.g_chip)
                blocks.append(ROPair(int(bd["block_id"]), k, speed, ref, lle))
            chips.append(Chip(sample.chip_id, sample, blocks))
        return cls(seed=int(d["seed"]), dparams=dparams, vp=vp, chips=chips)

    def save(self, path):
        tmp = f"{path}.tmp"
        with open(tmp, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "Population":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def chip_eps_by_group(seed: int, chip_id: int, vp: VariationParams) -> dict:
    """All device multipliers of one chip, grouped by (speed, k_mux).

    Returns {(speed, k): eps array of shape (n_blocks, 2, n_devices)} with
    role axis 0 = Ref, 1 = LLE; the per-instance LLE factor is already
    folded into the LLE slice.
    """
    words = np.empty((_KEY_TEMPLATE.shape[0], 4), dtype=np.uint64)
    words[:, 0] = STREAM_DEVICE
    words[:, 1] = chip_id
    words[:, 2:] = _KEY_TEMPLATE
    eps = np.exp(vp.sigma_local * keyed_normals(seed, words))

    lle_words = np.empty((len(_BLOCKS), 3), dtype=np.uint64)
    lle_words[:, 0] = STREAM_LLE_FACTOR
    lle_words[:, 1] = chip_id
    lle_words[:, 2] = np.arange(len(_BLOCKS), dtype=np.uint64)
    lle_factor = np.exp(vp.sigma_lle * keyed_normals(seed, lle_words))

    groups = {}
    pos = 0
    for bid, speed, k in _BLOCKS:
        n_dev = ROConfig(k, speed, REF).n_devices
        block = eps[pos:pos + 2 * n_dev].reshape(2, n_dev).copy()
        block[1] *= lle_factor[bid]
        pos += 2 * n_dev
        groups.setdefault((speed, k), []).append(block)
    return {key: np.stack(v) for key, v in groups.items()}


def _group_index_map():
    """(speed, k) -> (block_ids, row indices into the chip key template
    shaped (n_blocks, 2, n_devices))."""
    groups = {}
    pos = 0
    for bid, speed, k in _BLOCKS:
        n_dev = ROConfig(k, speed, REF).n_devices
        rows = np.arange(pos, pos + 2 * n_dev).reshape(2, n_dev)
        groups.setdefault((speed, k), []).append((bid, rows))
        pos += 2 * n_dev
    return {key: (np.array([b for b, _ in v]),
                  np.stack([r for _, r in v]))
            for key, v in groups.items()}


_GROUP_INDEX = _group_index_map()


def population_corner_freqs(seed: int, n_chips: int, dparams: DelayParams,
                            vp: VariationParams, speed: str = FAST) -> dict:
    """Corner-selection frequencies for a whole population in one pass.

    Equivalent to building the population and evaluating every pair at the
    all-zeros and all-ones selections, but fully vectorized.  Returns
    {k_mux: {corner: array of shape (n_chips, n_blocks_of_type)}} with the
    corner keys ref_all0 / ref_all1 / lle_all0 / lle_all1.
    """
    if n_chips < 1:
        raise ContractError(f"n_chips must be >= 1, got {n_chips}")
    n_keys = _KEY_TEMPLATE.shape[0]
    words = np.empty((n_chips * n_keys, 4), dtype=np.uint64)
    words[:, 0] = STREAM_DEVICE
    words[:, 1] = np.repeat(np.arange(n_chips, dtype=np.uint64), n_keys)
    words[:, 2:] = np.tile(_KEY_TEMPLATE, (n_chips, 1))
    eps = np.exp(vp.sigma_local * keyed_normals(seed, words))
    eps = eps.reshape(n_chips, n_keys)

    lw = np.empty((n_chips * len(_BLOCKS), 3), dtype=np.uint64)
    lw[:, 0] = STREAM_LLE_FACTOR
    lw[:, 1] = np.repeat(np.arange(n_chips, dtype=np.uint64), len(_BLOCKS))
    lw[:, 2] = np.tile(np.arange(len(_BLOCKS), dtype=np.uint64), n_chips)
    lle_factor = np.exp(vp.sigma_lle * keyed_normals(seed, lw))
    lle_factor = lle_factor.reshape(n_chips, len(_BLOCKS))

    g, _ = sample_chips(seed, np.arange(n_chips), vp)
    g = g[:, None]

    out = {}
    for (sp, k), (block_ids, rows) in _GROUP_INDEX.items():
        if sp != speed:
            continue
        e = eps[:, rows].copy()                 # (n_chips, n_blocks, 2, n_dev)
        e[:, :, 1, :] *= lle_factor[:, block_ids, None]
        nn = 8 - k
        mux = e[..., 0:k].sum(axis=-1)
        inv0 = e[..., k:2 * k].sum(axis=-1)
        inv1 = e[..., 2 * k:3 * k].sum(axis=-1)
        nonts = e[..., 3 * k:3 * k + nn].sum(axis=-1)
        nand = e[..., 3 * k + nn]
        dele = e[..., 3 * k + nn + 1:].sum(axis=-1)
        d_del = dparams.d_del(sp)
        corners = {}
        for role, flavor, (m0, m1) in ((0, "ref", (1.0, 1.0)),
                                       (1, "lle", (dparams.m_sht,
                                                   dparams.m_ext))):
            base = g * (dparams.d_mux0 * mux[:, :, role]
                        + dparams.d_inv * m0 * inv0[:, :, role]
                        + dparams.d_inv * nonts[:, :, role]
                        + dparams.d_nand * nand[:, :, role]
                        + d_del * dele[:, :, role])
            dsum = g * ((dparams.d_mux1 - dparams.d_mux0) * mux[:, :, role]
                        + dparams.d_inv * (m1 * inv1[:, :, role]
                                           - m0 * inv0[:, :, role]))
            corners[f"{flavor}_all0"] = 1e6 / (2.0 * base)
            corners[f"{flavor}_all1"] = 1e6 / (2.0 * (base + dsum))
        out[k] = corners
    return out


def build_chip(seed: int, chip_id: int, dparams: DelayParams,
               vp: VariationParams) -> Chip:
    """Assemble one chip; fully determined by (seed, chip_id)."""
    sample = sample_chip(seed, chip_id, vp)
    groups = chip_eps_by_group(seed, chip_id, vp)
    cursor = {key: 0 for key in groups}
    blocks = []
    for bid, speed, k in _BLOCKS:
        i = cursor[(speed, k)]
        cursor[(speed, k)] += 1
        eps = groups[(speed, k)][i]
        ref = ROInstance(ROConfig(k, speed, REF), eps[0], sample.g_chip)
        lle = ROInstance(ROConfig(k, speed, LLE), eps[1], sample.g_chip)
        blocks.append(ROPair(bid, k, speed, ref, lle))
    return Chip(chip_id=chip_id, sample=sample, blocks=blocks)


def _max_workers():
    raw = os.environ.get("SCALLER_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"SCALLER_THREADS must be an integer, got {raw!r}")
    return None if n <= 0 else n


def build_population(seed: int, n_chips: int, dparams: DelayParams,
                     vp: VariationParams,
                     max_workers: int | None = None) -> Population:
    """Chips 0..n_chips-1; identical output for any worker count."""
    if n_chips < 1:
        raise ContractError(f"n_chips must be >= 1, got {n_chips}")
    workers = max_workers if max_workers is not None else _max_workers()
    if workers == 1:
        chips = [build_chip(seed, c, dparams, vp) for c in range(n_chips)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chips = list(pool.map(
                lambda c: build_chip(seed, c, dparams, vp), range(n_chips)))
    return Population(seed=seed, dparams=dparams, vp=vp, chips=chips)


# --------------------------------------------------------------------------
# Structural netlist emission

CELL_INV = {"bl": "INV_BL", "sht": "INV_SHT", "ext": "INV_EXT"}


@dataclass
class Netlist:
    name: str
    ports: dict
    instances: list = field(default_factory=list)
    nets: list = field(default_factory=list)

    def add(self, name: str, cell: str, pins: dict):
        self.instances.append({"name": name, "cell": cell, "pins": dict(pins)})

    def cell_counts(self) -> dict:
        counts = {}
        for inst in self.instances:
            counts[inst["cell"]] = counts.get(inst["cell"], 0) + 1
        return counts

    def to_dict(self) -> dict:
        return {"name": self.name, "ports": self.ports,
                "instances": self.instances, "nets": self.nets}

    def save(self, path):
        tmp = f"{path}.tmp"
        with open(tmp, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=1)
        os.replace(tmp, path)


def emit_netlist(config: ROConfig) -> Netlist:
    """Gate-level JSON netlist of one oscillator; deterministic naming.

    Loop order: NAND enable gate, tunable stages, plain inverters, delay
    buffers, closing back on the NAND.  Every tunable stage wires both
    inverter variants (baseline ones for the Ref flavor) to one MUX2.
    """
    k = config.k_mux
    n_loop = 1 + k + config.n_nonts + config.n_del
    ring = [f"r{j}" for j in range(n_loop)]
    sel_ports = [f"sel{i}" for i in range(k)]
    name = f"ro_{k}mux_{config.speed}_{config.flavor}"
    nl = Netlist(name=name, ports={"en": "input", "sel": sel_ports,
                                   "osc": "output", "osc_net": ring[1]})
    nets = set(ring) | {"en"} | set(sel_ports)

    nl.add("nand_en", "NAND2", {"a": ring[0], "b": "en", "y": ring[1]})
    pos = 1
    for i in range(k):
        net_in, net_out = ring[pos], ring[(pos + 1) % n_loop]
        if config.flavor == REF:
            cell0, cell1 = CELL_INV["bl"], CELL_INV["bl"]
        else:
            cell0, cell1 = CELL_INV["sht"], CELL_INV["ext"]
        a, b = f"ts{i}_s0", f"ts{i}_s1"
        nets |= {a, b}
        nl.add(f"ts{i}_inv0", cell0, {"a": net_in, "y": a})
        nl.add(f"ts{i}_inv1", cell1, {"a": net_in, "y": b})
        nl.add(f"ts{i}_mux", "MUX2",
               {"in0": a, "in1": b, "sel": sel_ports[i], "y": net_out})
        pos += 1
    for i in range(config.n_nonts):
        nl.add(f"inv{i}", "INV_BL",
               {"a": ring[pos], "y": ring[(pos + 1) % n_loop]})
        pos += 1
    del_cell = "DELBUF_FAST" if config.speed == FAST else "DELBUF_SLOW"
    for i in range(config.n_del):
        nl.add(f"del{i}", del_cell,
               {"a": ring[pos], "y": ring[(pos + 1) % n_loop]})
        pos += 1
    nl.nets = sorted(nets)
    return nl
