# Copyright 2026 The SQWA Lab Authors
# Licensed under the Apache License, Version 2.0

"""Python bindings for the SQWA lab."""

from ._sqwa import (
    SqwaError,
    capture_epochs,
    cyclical_learning_rates,
    derive_cycle_bounds,
    effective_bits,
    evaluate_checkpoint,
    finetune_learning_rates,
    levels_count,
    load_config,
    quantize,
    quantize_levels,
    run_pipeline,
    select_step_size,
)

__all__ = [
    "SqwaError",
    "capture_epochs",
    "cyclical_learning_rates",
    "derive_cycle_bounds",
    "effective_bits",
    "evaluate_checkpoint",
    "finetune_learning_rates",
    "levels_count",
    "load_config",
    "quantize",
    "quantize_levels",
    "run_pipeline",
    "select_step_size",
]
