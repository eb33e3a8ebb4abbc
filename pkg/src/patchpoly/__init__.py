"""Patch-wise polygon segmentation with a differentiable rasterizer."""

from ._kernels import BACKEND
from .field import PolygonField, decode, forward
from .fit import FitConfig, FitReport, binarize, fit, init_field
from .geometry import Triangulation, regular_polygon_triangulation
from .loss import LossBreakdown, loss_gradients, total_loss
from .metrics import MetricReport, evaluate
from .raster import SoftRasterConfig, render_patch_exact, render_patch_soft

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "FitConfig", "FitReport", "LossBreakdown", "MetricReport", "PolygonField",
    "SoftRasterConfig", "Triangulation", "binarize", "decode", "evaluate", "fit", "forward",
    "init_field", "loss_gradients", "regular_polygon_triangulation", "render_patch_exact",
    "render_patch_soft", "total_loss",
]
