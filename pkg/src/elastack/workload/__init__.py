"""Open-loop workload generation, classifiers and the built-in server."""

from elastack.workload.classifiers import keyword_classifier, message_boundary_classifier
from elastack.workload.generator import (
    Arrival,
    ArrivalSchedule,
    BurstSpec,
    RateStep,
    RequestClass,
    RequestRecord,
    WorkloadSpec,
    assign_classes,
    compress,
    generate,
    packet_sizes,
    request_times,
    wire_time_ns,
)
from elastack.workload.server import IoTServer, ServeJob, SocketApi

__all__ = [
    "Arrival",
    "ArrivalSchedule",
    "BurstSpec",
    "IoTServer",
    "RateStep",
    "RequestClass",
    "RequestRecord",
    "ServeJob",
    "SocketApi",
    "WorkloadSpec",
    "assign_classes",
    "compress",
    "generate",
    "keyword_classifier",
    "message_boundary_classifier",
    "packet_sizes",
    "request_times",
    "wire_time_ns",
]
