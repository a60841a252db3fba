"""Approximate top-k similarity search over dense vectors.

A fused scoring + per-bin reduction kernel keeps the best score and index in
each contiguous bin of 2**w database rows, the bin count is planned
analytically from a birthday-problem recall model, and an exact rescoring
pass selects the final top-k from the surviving candidates. Roofline helpers
bound kernel performance by compute, memory, and coefficient-wise-instruction
throughput.
"""

from ._core import (
    BinPlan,
    HardwareSpec,
    RooflineReport,
    approx_min_bins,
    attainable,
    blas3_intensity,
    brute_force,
    cop_budget,
    cop_intensity,
    count_cops,
    expected_recall,
    gen_synthetic,
    load_hardware_spec,
    measure_recall,
    min_bins,
    partial_reduce,
    plan_bins,
    read_fvecs,
    read_ivecs,
    search,
    simulate_recall,
    write_fvecs,
    write_ivecs,
)

__all__ = [
    "BinPlan",
    "HardwareSpec",
    "RooflineReport",
    "approx_min_bins",
    "attainable",
    "blas3_intensity",
    "brute_force",
    "cop_budget",
    "cop_intensity",
    "count_cops",
    "expected_recall",
    "gen_synthetic",
    "load_hardware_spec",
    "measure_recall",
    "min_bins",
    "partial_reduce",
    "plan_bins",
    "read_fvecs",
    "read_ivecs",
    "search",
    "simulate_recall",
    "write_fvecs",
    "write_ivecs",
]
