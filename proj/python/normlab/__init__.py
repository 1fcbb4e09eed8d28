# Copyright 2026 The normlab Authors
# SPDX-License-Identifier: Apache-2.0
"""Python bindings for the normlab normalization engine."""

from normlab._core import (
    ConfigError,
    DimensionError,
    DomainError,
    Error,
    InputError,
    Mode,
    MovingMoments,
    NormParams,
    NormScheme,
    NumericError,
    SamplingError,
    TrainingError,
    decay_step,
    finite_diff_check,
    forward_backward,
    forward_infer,
    forward_train,
    group_assignment,
    output_bound,
    run_command,
    tightness_value,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "DomainError",
    "Error",
    "InputError",
    "Mode",
    "MovingMoments",
    "NormParams",
    "NormScheme",
    "NumericError",
    "SamplingError",
    "TrainingError",
    "decay_step",
    "finite_diff_check",
    "forward_backward",
    "forward_infer",
    "forward_train",
    "group_assignment",
    "output_bound",
    "run_command",
    "tightness_value",
]
