"""Wavefront simulation of open single-server tandem queues."""

from .model import BlockingMode, Scenario, ValidationError, validate, EpochTrace, RunReport, StepCounters
from .variates import ExplicitList, Constant, Exponential, Uniform, Erlang, ServiceTimes, materialize

__version__ = "0.1.0"
