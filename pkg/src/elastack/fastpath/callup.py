"""Fastcallup: application callbacks that label packets inside the stack."""

import logging
from collections.abc import Sequence
from typing import Optional, Union

from elastack.constants import CallupLayer
from elastack.driver import Driver, DriverCallback
from elastack.errors import UnsupportedLayerError
from elastack.tcp import TcpCallback, TcpLayer

logger = logging.getLogger(__name__)

Callback = Union[DriverCallback, TcpCallback]


def register_callup(
    layer: CallupLayer,
    callback: Optional[Callback],
    drivers: Sequence[Driver] = (),
    tcp: Optional[TcpLayer] = None,
    flow_id: Optional[int] = None,
) -> None:
    """Bind an extraction callback to a stack layer.

    Driver callbacks are stateless and global: every driver instance runs
    them on every received packet. TCP callbacks see the flow's private
    field and are bound to one flow, or to every flow when ``flow_id`` is
    None.

    Args:
        layer: DRIVER or TCP.
        callback: Classifier, None to remove.
        drivers: Driver instances of all stack coroutines.
        tcp: The shared TCP layer.
        flow_id: Flow for a TCP callback, None for all flows.

    Raises:
        UnsupportedLayerError: If the layer has no extraction hook.
        ValueError: If a driver callback names a flow or the target layer
            instance is missing.
        UnknownFlowError: If a TCP callback names an unknown flow.
    """
    if layer is CallupLayer.DRIVER:
        if flow_id is not None:
            raise ValueError("Driver-layer callbacks are global; flow_id must be None")
        if not drivers:
            raise ValueError("No driver to register the callback with")
        for driver in drivers:
            driver.set_extraction(callback)
    elif layer is CallupLayer.TCP:
        if tcp is None:
            raise ValueError("No TCP layer to register the callback with")
        tcp.register_extraction(flow_id, callback)
    else:
        raise UnsupportedLayerError(f"No extraction point at the {layer.value} layer")
    logger.debug("Registered %s callup (flow=%s)", layer.value, flow_id)
