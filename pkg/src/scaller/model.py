"""Ring oscillator topology and the additive stage-delay model.

An oscillator is a 9-inverting-stage loop: ``k`` tunable stages (a 2-input
MUX fed by two inverters), ``8 - k`` plain inverters, one NAND enable gate,
plus 1 or 5 non-inverting delay buffers.  Delays compose additively; process
variation enters as multiplicative per-device factors and a per-chip global
factor.  All functions here are pure.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np


class ParameterError(ValueError):
    """A physical parameter violates its validity constraints."""


class ContractError(ValueError):
    """An argument violates an operation's contract (sizes, pairing, ...)."""


class InverterVariant(enum.Enum):
    BL = "bl"    # unmodified baseline well
    SHT = "sht"  # shortened well, slower than baseline
    EXT = "ext"  # extended well


# Well-manipulation delay ratios relative to the baseline inverter, from
# 50%-VDD transient deltas: baseline is 2.86% faster than the shortened
# variant and 2.02% slower than the extended one.
DEFAULT_M_SHT = 1.0286
DEFAULT_M_EXT = 1.0 / 1.0202

FAST, SLOW = "fast", "slow"
REF, LLE = "ref", "lle"


@dataclass(frozen=True)
class DelayParams:
    """Nominal per-cell delays (ps) and well-variant multipliers."""

    d_inv: float
    d_mux0: float
    d_mux1: float
    d_nand: float
    d_del_fast: float
    d_del_slow: float
    m_sht: float = DEFAULT_M_SHT
    m_ext: float = DEFAULT_M_EXT

    def __post_init__(self):
        for name in ("d_inv", "d_mux0", "d_mux1", "d_nand", "d_del_fast",
                     "d_del_slow", "m_sht", "m_ext"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0.0:
                raise ParameterError(f"{name} must be finite and > 0, got {v}")
        if self.m_sht < self.m_ext:
            raise ParameterError(
                f"m_sht ({self.m_sht}) must be >= m_ext ({self.m_ext})")
        if self.d_mux1 > self.d_mux0:
            raise ParameterError(
                f"d_mux1 ({self.d_mux1}) must be <= d_mux0 ({self.d_mux0})")

    def d_mux(self, bit: int) -> float:
        return self.d_mux1 if bit else self.d_mux0

    def d_del(self, speed: str) -> float:
        return self.d_del_fast if speed == FAST else self.d_del_slow

    def m(self, variant: InverterVariant) -> float:
        if variant is InverterVariant.SHT:
            return self.m_sht
        if variant is InverterVariant.EXT:
            return self.m_ext
        return 1.0

    def scaled(self, factor: float) -> "DelayParams":
        """All delays multiplied by ``factor`` (multipliers unchanged)."""
        return replace(self, d_inv=self.d_inv * factor,
                       d_mux0=self.d_mux0 * factor, d_mux1=self.d_mux1 * factor,
                       d_nand=self.d_nand * factor,
                       d_del_fast=self.d_del_fast * factor,
                       d_del_slow=self.d_del_slow * factor)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "d_inv", "d_mux0", "d_mux1", "d_nand", "d_del_fast", "d_del_slow",
            "m_sht", "m_ext")}

    @classmethod
    def from_dict(cls, d: dict) -> "DelayParams":
        return cls(**{k: float(d[k]) for k in (
            "d_inv", "d_mux0", "d_mux1", "d_nand", "d_del_fast", "d_del_slow",
            "m_sht", "m_ext")})


@dataclass(frozen=True)
class ROConfig:
    """Topology descriptor: number of tunable stages, speed grade, flavor."""

    k_mux: int
    speed: str
    flavor: str

    def __post_init__(self):
        if self.k_mux not in (5, 6, 7):
            raise ParameterError(f"k_mux must be 5, 6 or 7, got {self.k_mux}")
        if self.speed not in (FAST, SLOW):
            raise ParameterError(f"speed must be '{FAST}' or '{SLOW}'")
        if self.flavor not in (REF, LLE):
            raise ParameterError(f"flavor must be '{REF}' or '{LLE}'")

    @property
    def n_nonts(self) -> int:
        return 8 - self.k_mux

    @property
    def n_del(self) -> int:
        return 1 if self.speed == FAST else 5

    @property
    def inverting_stages(self) -> int:
        # k MUX-selected inverters + plain inverters + the NAND gate.
        return self.k_mux + self.n_nonts + 1

    @property
    def n_devices(self) -> int:
        """Delay-carrying devices: MUX + 2 inverters per TS, plain inverters,
        NAND, DEL buffers."""
        return 3 * self.k_mux + self.n_nonts + 1 + self.n_del

    def sibling(self, flavor: str) -> "ROConfig":
        return ROConfig(self.k_mux, self.speed, flavor)


# Device index layout within an instance's eps vector.  The two TS inverters
# are indexed by the MUX input they drive (input 0 / input 1).
def device_layout(config: ROConfig) -> dict:
    k = config.k_mux
    return {
        "mux": slice(0, k),
        "inv0": slice(k, 2 * k),
        "inv1": slice(2 * k, 3 * k),
        "nonts": slice(3 * k, 3 * k + config.n_nonts),
        "nand": 3 * k + config.n_nonts,
        "del": slice(3 * k + config.n_nonts + 1, config.n_devices),
    }


@dataclass(frozen=True)
class Selection:
    """A k-bit tuning word; bit i controls tunable stage i.

    Bit 1 picks the MUX select-1 path (the extended-well inverter in LLE
    oscillators); bit 0 picks the select-0 path (shortened well).
    """

    bits: tuple

    def __post_init__(self):
        if not all(b in (0, 1) for b in self.bits):
            raise ParameterError(f"selection bits must be 0/1, got {self.bits}")

    @classmethod
    def all_zeros(cls, k: int) -> "Selection":
        return cls((0,) * k)

    @classmethod
    def all_ones(cls, k: int) -> "Selection":
        return cls((1,) * k)

    @classmethod
    def from_int(cls, value: int, k: int) -> "Selection":
        # bit 0 = stage 0 = least significant
        return cls(tuple((value >> i) & 1 for i in range(k)))

    @classmethod
    def from_string(cls, s: str) -> "Selection":
        # leftmost character is stage 0
        return cls(tuple(int(c) for c in s))

    def __len__(self) -> int:
        return len(self.bits)

    @property
    def ext_count(self) -> int:
        return sum(self.bits)

    def as_int(self) -> int:
        return sum(b << i for i, b in enumerate(self.bits))

    def as_string(self) -> str:
        return "".join(str(b) for b in self.bits)


@dataclass(frozen=True)
class ROInstance:
    """A configured oscillator with sampled variation multipliers."""

    config: ROConfig
    eps: np.ndarray = field(repr=False)
    g_chip: float = 1.0

    def __post_init__(self):
        eps = np.asarray(self.eps, dtype=np.float64)
        object.__setattr__(self, "eps", eps)
        if eps.shape != (self.config.n_devices,):
            raise ContractError(
                f"eps must have {self.config.n_devices} entries for "
                f"{self.config}, got shape {eps.shape}")
        if not np.all(eps > 0.0) or not np.all(np.isfinite(eps)):
            raise ParameterError("all eps must be finite and > 0")
        if not np.isfinite(self.g_chip) or self.g_chip <= 0.0:
            raise ParameterError(f"g_chip must be > 0, got {self.g_chip}")

    @classmethod
    def nominal(cls, config: ROConfig, g_chip: float = 1.0) -> "ROInstance":
        return cls(config, np.ones(config.n_devices), g_chip)

    def ts_variant(self, bit: int) -> InverterVariant:
        if self.config.flavor == REF:
            return InverterVariant.BL
        return InverterVariant.EXT if bit else InverterVariant.SHT


def stage_delay(params: DelayParams, variant: InverterVariant, bit: int,
                eps_mux: float = 1.0, eps_inv: float = 1.0,
                g: float = 1.0) -> float:
    """Delay of one tunable stage (ps): MUX path plus the selected inverter."""
    if bit not in (0, 1):
        raise ContractError(f"bit must be 0 or 1, got {bit}")
    for name, v in (("eps_mux", eps_mux), ("eps_inv", eps_inv), ("g", g)):
        if not np.isfinite(v) or v <= 0.0:
            raise ParameterError(f"{name} must be finite and > 0, got {v}")
    return g * (eps_mux * params.d_mux(bit)
                + eps_inv * params.d_inv * params.m(variant))


def half_period(instance: ROInstance, sel: Selection,
                params: DelayParams) -> float:
    """Sum of all stage delays (ps) for one transition around the loop."""
    cfg = instance.config
    if len(sel) != cfg.k_mux:
        raise ContractError(
            f"selection has {len(sel)} bits, config needs {cfg.k_mux}")
    lay = device_layout(cfg)
    eps = instance.eps
    g = instance.g_chip
    total = 0.0
    for i, bit in enumerate(sel.bits):
        eps_inv = eps[lay["inv1"]][i] if bit else eps[lay["inv0"]][i]
        total += stage_delay(params, instance.ts_variant(bit), bit,
                             eps[lay["mux"]][i], eps_inv, g)
    total += g * params.d_inv * float(np.sum(eps[lay["nonts"]]))
    total += g * params.d_nand * eps[lay["nand"]]
    total += g * params.d_del(cfg.speed) * float(np.sum(eps[lay["del"]]))
    return total


def frequency(instance: ROInstance, sel: Selection,
              params: DelayParams) -> float:
    """Oscillation frequency in MHz: 1e6 / (2 * half-period in ps)."""
    return 1e6 / (2.0 * half_period(instance, sel, params))


def selection_components(instance: ROInstance, params: DelayParams):
    """(base, deltas): half-period at all-zeros and the per-bit 0->1 shifts.

    ``half_period(sel) == base + sel.bits @ deltas`` for every selection;
    the fast path used by sweeps and population statistics.
    """
    cfg = instance.config
    lay = device_layout(cfg)
    eps = instance.eps
    g = instance.g_chip
    m0, m1 = ((1.0, 1.0) if cfg.flavor == REF
              else (params.m_sht, params.m_ext))
    base = g * (params.d_mux0 * float(np.sum(eps[lay["mux"]]))
                + params.d_inv * m0 * float(np.sum(eps[lay["inv0"]]))
                + params.d_inv * float(np.sum(eps[lay["nonts"]]))
                + params.d_nand * eps[lay["nand"]]
                + params.d_del(cfg.speed) * float(np.sum(eps[lay["del"]])))
    deltas = g * (eps[lay["mux"]] * (params.d_mux1 - params.d_mux0)
                  + params.d_inv * (eps[lay["inv1"]] * m1
                                    - eps[lay["inv0"]] * m0))
    return base, deltas
