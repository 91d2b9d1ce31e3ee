"""Python bindings for the siv solver and reconstruction library."""

from ._siv import (
    Error,
    ExperimentConfig,
    FlowState,
    SegmentConfig,
    generate_truth,
    gradient_check,
    grid,
    initial_truth,
    load_run_config,
    pi,
    propagate,
    reconstruct_run,
    run_forward,
    twin_experiment,
    verify,
)

__all__ = [
    "Error",
    "ExperimentConfig",
    "FlowState",
    "SegmentConfig",
    "generate_truth",
    "gradient_check",
    "grid",
    "initial_truth",
    "load_run_config",
    "pi",
    "propagate",
    "reconstruct_run",
    "run_forward",
    "twin_experiment",
    "verify",
]
