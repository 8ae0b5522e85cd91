"""Seeded process variation and power sampling.

Two-level variation: a per-chip global delay factor (die-to-die) and
independent per-device lognormal multipliers (intra-die).  LLE oscillators
additionally carry a small per-instance factor reflecting the extra
variability of well-manipulated inverters.  Every draw is keyed by its full
index tuple through the counter-based kernels, so populations are identical
no matter how or in what order they are sampled.

Chip leakage follows a bounded (scaled Beta) distribution matched to the
measured mean/std and min/max span, coupled to chip speed through a Gaussian
copula so fast chips leak more, as in the measured corner scatter.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import betaincinv, ndtr

from . import refdata
from .kernels import keyed_normal, keyed_normals
from .model import ContractError, ParameterError, ROConfig, ROInstance

STREAM_CHIP_SPEED = 1
STREAM_CHIP_LEAK = 2
STREAM_LLE_FACTOR = 3
STREAM_DEVICE = 4


@dataclass(frozen=True)
class VariationParams:
    sigma_die: float = 0.0       # std of ln(global chip delay factor)
    sigma_local: float = 0.0     # std of ln(per-device multiplier)
    sigma_lle: float = 0.0       # std of ln(per-LLE-instance extra factor)
    silicon_scale: float = 1.0   # mean global delay divisor (1.0 = pre-silicon)
    leak_mean: float = refdata.LEAK_MEAN_UW
    leak_sigma: float = refdata.LEAK_SIGMA_UW
    leak_min: float = refdata.LEAK_MIN_UW
    leak_max: float = refdata.LEAK_MAX_UW
    leak_slope: float = 6000.0   # uW per unit relative chip-speed deviation
    p_tt: float = 700.0          # corner reference lines, uW
    p_ff: float = 1100.0
    k_dyn: float = 0.02          # uW per MHz per toggling device

    def __post_init__(self):
        for name in ("sigma_die", "sigma_local", "sigma_lle"):
            if getattr(self, name) < 0.0:
                raise ParameterError(f"{name} must be >= 0")
        if self.silicon_scale <= 0.0:
            raise ParameterError("silicon_scale must be > 0")
        if self.leak_mean <= 0.0:
            raise ParameterError("leak_mean must be > 0")
        if self.leak_sigma < 0.0:
            raise ParameterError("leak_sigma must be >= 0")
        if self.leak_sigma > 0.0:
            if not (self.leak_min < self.leak_mean < self.leak_max):
                raise ParameterError("need leak_min < leak_mean < leak_max")
            m, v = self._leak_moments()
            if v >= m * (1.0 - m):
                raise ParameterError(
                    "leak_sigma too large for the [leak_min, leak_max] span")

    def _leak_moments(self):
        span = self.leak_max - self.leak_min
        return ((self.leak_mean - self.leak_min) / span,
                (self.leak_sigma / span) ** 2)

    def leak_beta_shape(self):
        """(alpha, beta) of the scaled-Beta leakage marginal."""
        m, v = self._leak_moments()
        nu = m * (1.0 - m) / v - 1.0
        return m * nu, (1.0 - m) * nu

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "sigma_die", "sigma_local", "sigma_lle", "silicon_scale",
            "leak_mean", "leak_sigma", "leak_min", "leak_max", "leak_slope",
            "p_tt", "p_ff", "k_dyn")}

    @classmethod
    def from_dict(cls, d: dict) -> "VariationParams":
        return cls(**{k: float(v) for k, v in d.items()})

    def with_overrides(self, **kwargs) -> "VariationParams":
        return replace(self, **kwargs)


# Defaults for the silicon scenario.  sigma_local was set by a one-time sweep
# so the intra-die std of the all-zeros frequency across one chip's blocks
# lands near 0.6% of the mean; sigma_die so pooled corner stds and the
# chip-to-chip leakage/speed scatter resemble the measured population;
# sigma_lle so LLE corner distributions come out slightly wider than the
# reference ones, as measured.
SILICON_SIGMA_DIE = 0.005
SILICON_SIGMA_LOCAL = 0.0141
SILICON_SIGMA_LLE = 0.003


def presilicon_variation_params() -> VariationParams:
    return VariationParams()


def silicon_variation_params(silicon_scale: float | None = None) -> VariationParams:
    if silicon_scale is None:
        from .calibration import derive_silicon_scenario
        silicon_scale = derive_silicon_scenario().silicon_scale
    return VariationParams(sigma_die=SILICON_SIGMA_DIE,
                           sigma_local=SILICON_SIGMA_LOCAL,
                           sigma_lle=SILICON_SIGMA_LLE,
                           silicon_scale=silicon_scale)


@dataclass(frozen=True)
class ChipSample:
    chip_id: int
    g_chip: float
    leakage: float


def sample_chips(seed: int, chip_ids, vp: VariationParams):
    """Vectorized chip sampling: (g_chip array, leakage array in uW)."""
    ids = np.asarray(chip_ids, dtype=np.uint64)
    z_g = keyed_normals(seed, np.stack(
        [np.full_like(ids, STREAM_CHIP_SPEED), ids], axis=1))
    g = np.exp(vp.sigma_die * z_g) / vp.silicon_scale
    if vp.leak_sigma == 0.0:
        leak = np.full(ids.shape, vp.leak_mean)
    else:
        z_r = keyed_normals(seed, np.stack(
            [np.full_like(ids, STREAM_CHIP_LEAK), ids], axis=1))
        rho = 0.0
        if vp.sigma_die > 0.0:
            rho = np.clip(vp.leak_slope * vp.sigma_die / vp.leak_sigma,
                          -0.99, 0.99)
        z = -rho * z_g + np.sqrt(1.0 - rho * rho) * z_r
        alpha, beta = vp.leak_beta_shape()
        u = ndtr(z)
        leak = vp.leak_min + (vp.leak_max - vp.leak_min) * betaincinv(
            alpha, beta, u)
    return g, leak


def sample_chip(seed: int, chip_id: int, vp: VariationParams) -> ChipSample:
    """Global delay factor and leakage for one chip; pure in (seed, chip_id)."""
    g, leak = sample_chips(seed, [chip_id], vp)
    return ChipSample(chip_id=int(chip_id), g_chip=float(g[0]),
                      leakage=float(leak[0]))


def sample_device_eps(seed: int, chip_id: int, block_id: int,
                      device_index: int, vp: VariationParams) -> float:
    """Local delay multiplier for one device; pure in the full key tuple."""
    z = keyed_normal(seed, STREAM_DEVICE, chip_id, block_id, device_index)
    return float(np.exp(vp.sigma_local * z))


def device_eps_batch(seed: int, keys: np.ndarray,
                     vp: VariationParams) -> np.ndarray:
    """Batch of local multipliers; keys rows are (chip, block, device)."""
    words = np.empty((keys.shape[0], 4), dtype=np.uint64)
    words[:, 0] = STREAM_DEVICE
    words[:, 1:] = keys
    return np.exp(vp.sigma_local * keyed_normals(seed, words))


def lle_instance_factor(seed: int, chip_id: int, block_id: int,
                        vp: VariationParams) -> float:
    """Extra whole-instance multiplier for the LLE member of a pair."""
    z = keyed_normal(seed, STREAM_LLE_FACTOR, chip_id, block_id)
    return float(np.exp(vp.sigma_lle * z))


def toggling_weight(config: ROConfig) -> int:
    """Number of switching devices per transition.

    Both tunable-stage inverters always toggle (the MUX selects an output,
    the stage input drives both), so the weight does not depend on the
    selection word.
    """
    return config.n_devices


def dynamic_power(instance: ROInstance, f_mhz: float,
                  vp: VariationParams) -> float:
    """Dynamic power in uW at oscillation frequency ``f_mhz``."""
    if f_mhz <= 0.0:
        raise ContractError(f"frequency must be > 0, got {f_mhz}")
    return vp.k_dyn * f_mhz * toggling_weight(instance.config)
