"""elastack: deterministic simulator of an elastic, priority-aware user-space network stack.

Packets flow from simulated NIC rings through a driver and a TCP layer
to application coroutines on a discrete virtual clock. Fastcalldown
checkpoints keep the stack serviced while application work runs,
fastcallup callbacks label packets by priority, and a resource manager
grows and shrinks the coroutine plan with the offered load.
"""

from elastack.constants import APP_NAME, APP_VERSION

__version__ = APP_VERSION
__all__ = ["APP_NAME", "APP_VERSION", "__version__"]
