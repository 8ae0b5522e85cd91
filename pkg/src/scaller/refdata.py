"""Reference characterization data for the oscillator family.

Pre-silicon per-configuration frequencies (electrical simulation of the
nominal corner) anchor the delay calibration; the measured silicon corner
statistics anchor the silicon-mode scenario.  Frequencies in MHz, powers
in microwatts.
"""

from __future__ import annotations

from .model import FAST, SLOW

# (k_mux, speed) -> (ref RO MHz, lle RO MHz), nominal pre-silicon values.
PRESILICON_MHZ = {
    (5, FAST): (720.3, 718.5),
    (6, FAST): (668.7, 666.0),
    (7, FAST): (624.5, 621.1),
    (5, SLOW): (65.29, 65.24),
    (6, SLOW): (64.84, 64.81),
    (7, SLOW): (64.41, 64.39),
}

# Measured silicon population statistics for the Fast types, pooled over all
# blocks of the packaged chips: (mean MHz, std MHz) per flavor and corner
# selection word.
SILICON_CORNERS_MHZ = {
    5: {"ref_all0": (897.37, 6.09), "ref_all1": (903.37, 5.34),
        "lle_all0": (894.85, 5.87), "lle_all1": (902.20, 5.90)},
    6: {"ref_all0": (835.60, 3.75), "ref_all1": (844.08, 3.84),
        "lle_all0": (833.84, 4.15), "lle_all1": (843.46, 4.51)},
    7: {"ref_all0": (786.27, 3.66), "ref_all1": (793.24, 3.96),
        "lle_all0": (782.83, 3.67), "lle_all1": (790.72, 4.07)},
}

# Measured chip leakage population (all packaged chips).
LEAK_MEAN_UW = 849.0
LEAK_SIGMA_UW = 77.0
LEAK_MIN_UW = 745.0
LEAK_MAX_UW = 1072.0

# Mean-frequency-vs-selection-index slopes measured on 5MUX Fast blocks of
# one chip (MHz per selection index).
SLOPE_LLE_MHZ = 0.090
SLOPE_REF_MHZ = 0.062

# Per-chip pair composition: (speed, k_mux, count), in floorplan order.
FLOORPLAN = (
    (SLOW, 5, 40), (SLOW, 6, 40), (SLOW, 7, 36),
    (FAST, 5, 36), (FAST, 6, 40), (FAST, 7, 32),
)
PAIRS_PER_CHIP = sum(n for _, _, n in FLOORPLAN)  # 224
DEFAULT_N_CHIPS = 20


def half_period_ps(f_mhz: float) -> float:
    return 1e6 / (2.0 * f_mhz)
