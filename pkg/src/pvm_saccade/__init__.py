"""Predictive vision hierarchy with an error-driven saccade controller."""

from .backend import BACKEND_NAME

__version__ = "0.1.0"
__all__ = ["BACKEND_NAME", "__version__"]
