"""Palette templates for edge-coloured graphs.

Entropy extremal numbers, forbidden-pattern speeds, container families for
colouring properties, and step-graphon limits of colour distributions.
"""

__version__ = "0.1.0"

from .templates import Template
from .properties import get_property, list_properties
from .graphons import StepGraphon

__all__ = ["Template", "StepGraphon", "get_property", "list_properties", "__version__"]
