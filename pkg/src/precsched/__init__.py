"""Unit-job scheduling with precedences on identical machines.

Exact optimum, list scheduling, the time-indexed LP and its Sherali-Adams
lifts, and a recursive rounding procedure built on conditioning.
"""

from .instance import Instance, generate, parse_instance, serialize_instance
from .oracle import Schedule, exact_makespan, validate

__version__ = "0.1.0"

__all__ = ["Instance", "Schedule", "generate", "parse_instance", "serialize_instance", "exact_makespan", "validate"]
