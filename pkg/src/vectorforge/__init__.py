"""Raster-to-vector conversion with Optimize & Reduce."""

from .geometry import CubicSegment, Point, Scene, Shape
from .raster import GradientSet, RasterImage, render, render_with_gradients, render_without
from .config import MetricsRecord, RunConfig
from .pipeline import interpolate, run_oandr
from .fileio import load_raster, read_svg, write_svg

__all__ = [
    "CubicSegment", "Point", "Scene", "Shape",
    "GradientSet", "RasterImage", "render", "render_with_gradients", "render_without",
    "MetricsRecord", "RunConfig", "interpolate", "run_oandr",
    "load_raster", "read_svg", "write_svg",
]
__version__ = "0.1.0"
