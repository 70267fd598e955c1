"""Service layer: command handlers plus the HTTP app that exposes them."""

from .handlers import (
    HandlerResult,
    handle_false_alarm,
    handle_monitor,
    handle_montecarlo,
    handle_optimal_kernel,
    handle_oracle,
    handle_select_kernel,
    handle_solve_delay,
)

__all__ = [
    "HandlerResult",
    "handle_solve_delay",
    "handle_optimal_kernel",
    "handle_monitor",
    "handle_montecarlo",
    "handle_false_alarm",
    "handle_select_kernel",
    "handle_oracle",
]
