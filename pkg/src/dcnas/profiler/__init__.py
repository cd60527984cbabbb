from .flops import COUNTED_KINDS, DEFAULT_CONVENTION, FlopsConvention, FlopsReport, count_flops
from .latency import LatencyMeasurement, LatencyProtocol, measure_latency
from .lut import LatencyTable, build_latency_lut, composition_diagnostic, estimate_latency

__all__ = [
    "COUNTED_KINDS",
    "DEFAULT_CONVENTION",
    "FlopsConvention",
    "FlopsReport",
    "count_flops",
    "LatencyMeasurement",
    "LatencyProtocol",
    "measure_latency",
    "LatencyTable",
    "build_latency_lut",
    "composition_diagnostic",
    "estimate_latency",
]
