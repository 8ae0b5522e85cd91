"""Deterministic simulator for well-proximity-tunable ring oscillators."""

__version__ = "0.1.0"

from .model import (ContractError, DelayParams, InverterVariant,
                    ParameterError, ROConfig, ROInstance, Selection,
                    frequency, half_period, selection_components, stage_delay,
                    FAST, SLOW, REF, LLE)
from .calibration import (CalibrationResult, CalibrationTarget,
                          IdentifiabilityError, SiliconScenario,
                          builtin_targets, default_delay_params,
                          derive_silicon_scenario, fit_delay_params,
                          silicon_delay_params)
from .variation import (ChipSample, VariationParams, dynamic_power,
                        presilicon_variation_params, sample_chip,
                        sample_chips, sample_device_eps,
                        silicon_variation_params)
from .factory import (Chip, Netlist, Population, ROPair, build_chip,
                      build_population, emit_netlist, floorplan_blocks)
from .analysis import (MeanCurve, SchemaError, SweepTable, analyze_tables,
                       corner_stats, cross_chip_characterization,
                       diff_distribution, mean_freq_vs_selection,
                       read_sweep_csv, selection_order, sweep, sweep_chip,
                       tuning_range, tuning_step_khz, write_figure_data,
                       write_sweep_csv)

__all__ = [
    "ContractError", "DelayParams", "InverterVariant", "ParameterError",
    "ROConfig", "ROInstance", "Selection", "frequency", "half_period",
    "selection_components", "stage_delay", "FAST", "SLOW", "REF", "LLE",
    "CalibrationResult", "CalibrationTarget", "IdentifiabilityError",
    "SiliconScenario", "builtin_targets", "default_delay_params",
    "derive_silicon_scenario", "fit_delay_params", "silicon_delay_params",
    "ChipSample", "VariationParams", "dynamic_power",
    "presilicon_variation_params", "sample_chip", "sample_chips",
    "sample_device_eps", "silicon_variation_params",
    "Chip", "Netlist", "Population", "ROPair", "build_chip",
    "build_population", "emit_netlist", "floorplan_blocks",
    "MeanCurve", "SchemaError", "SweepTable", "analyze_tables",
    "corner_stats", "cross_chip_characterization", "diff_distribution",
    "mean_freq_vs_selection", "read_sweep_csv", "selection_order", "sweep",
    "sweep_chip", "tuning_range", "tuning_step_khz", "write_figure_data",
    "write_sweep_csv",
]
