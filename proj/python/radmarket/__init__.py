"""Python bindings for the radmarket distribution-market simulator."""

from ._radmarket import (
    BanditState,
    ClearingError,
    ConfigError,
    DlmpError,
    Environment,
    NetworkError,
    Network,
    arm_grid,
    clear,
    load_config,
    negotiate,
    run,
    solve_dlmp,
    ucb_index,
    ucb_select,
    ucb_update,
)

__all__ = [
    "BanditState",
    "ClearingError",
    "ConfigError",
    "DlmpError",
    "Environment",
    "NetworkError",
    "Network",
    "arm_grid",
    "clear",
    "load_config",
    "negotiate",
    "run",
    "solve_dlmp",
    "ucb_index",
    "ucb_select",
    "ucb_update",
]
