"""Figure rendering for mug2 CSV outputs.

This package computes no physics: every number drawn originates in an
input CSV or fit report produced by the mug2 command line tool.
"""

__version__ = "0.1.0"

from .render import ComparisonRow, render_fig1, render_wiggle

__all__ = ["ComparisonRow", "render_fig1", "render_wiggle", "__version__"]
