"""Driver layer: priority buffers and the driver extraction point."""

from elastack.driver.buffer import (
    Driver,
    DriverBuffer,
    DriverCallback,
    DriverExtraction,
    DriverPoll,
    tx_cost_ns,
)

__all__ = [
    "Driver",
    "DriverBuffer",
    "DriverCallback",
    "DriverExtraction",
    "DriverPoll",
    "tx_cost_ns",
]
