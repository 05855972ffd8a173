"""Analytic solution of the BMAP/G^(a,b)_n/1 bulk-service queue with
batch-size-dependent service, plus a simulation oracle."""
from .analysis import Solution, solve
from .bmap import BmapModel, stationary_summary, validate_bmap
from .config import ModelSpec, example, load_spec
from .errors import (InvalidModelError, NumericalError, QueueModelError,
                     UnstableSystemError)
from .measures import PerformanceReport, stability_check
from .service import (ServiceLaw, ServicePolicy, make_deterministic,
                      make_exponential, make_phase_type)
from .simulation import SimConfig, SimEstimate, simulate

__all__ = [
    "BmapModel", "InvalidModelError", "ModelSpec", "NumericalError",
    "PerformanceReport", "QueueModelError", "ServiceLaw", "ServicePolicy",
    "SimConfig", "SimEstimate", "Solution", "UnstableSystemError", "example",
    "load_spec", "make_deterministic", "make_exponential", "make_phase_type",
    "simulate", "solve", "stability_check", "stationary_summary", "validate_bmap",
]
