"""Figure rendering for fockloop simulation outputs."""

from .io import SchemaError, read_aggregates, read_trajectory
from .render import FigureRequest, build, render

__version__ = "0.1.0"
