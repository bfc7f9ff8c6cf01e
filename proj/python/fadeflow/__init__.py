"""Nonautonomous (neutral) functional differential equations with infinite delay."""

from ._core import (
    BlowUpError,
    Config,
    ConfigError,
    Overrides,
    audit,
    construct_h,
    invert,
    leq_A,
    metric_d,
    run_cli,
    simulate,
)

__all__ = [
    "BlowUpError",
    "Config",
    "ConfigError",
    "Overrides",
    "audit",
    "construct_h",
    "invert",
    "leq_A",
    "metric_d",
    "run_cli",
    "simulate",
]
