"""Central finite-difference checks of :func:`patchpoly.loss.loss_gradients`."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import PolygonField
from .geometry import regular_polygon_triangulation
from .loss import field_loss, loss_gradients
from .raster import SoftRasterConfig


def random_convex_polygon(rng: np.random.Generator, k: int, center_span=0.25,
                          radius=(0.4, 0.7), jitter: float | None = None) -> np.ndarray:
    """Random polygon inscribed in a circle, hence convex.

    With ``jitter=None`` the angles are i.i.d. uniform (vertices may nearly
    coincide).  Otherwise vertex j sits at ``2*pi*(j + u_j)/k`` plus a common
    offset, ``u_j ~ U(-jitter/2, jitter/2)``, which keeps neighbouring angles
    at least ``2*pi*(1 - jitter)/k`` apart.
    """
    c = rng.uniform(-center_span, center_span, 2)
    r = rng.uniform(*radius)
    if jitter is None:
        theta = np.sort(rng.uniform(0.0, 2.0 * np.pi, k))
    else:
        u = rng.uniform(-0.5 * jitter, 0.5 * jitter, k)
        theta = rng.uniform(0.0, 2.0 * np.pi) + 2.0 * np.pi * (np.arange(k) + u) / k
    return c + r * np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def random_instance(seed: int, k: int | None = None, size: int = 16, s: int = 8):
    """Random field and binary disk target on a ``size x size`` image."""
    rng = np.random.default_rng(seed)
    k = (4, 5)[seed % 2] if k is None else k
    g = size // s
    verts = np.stack([random_convex_polygon(rng, k, jitter=0.5) for _ in range(g * g)])
    params = np.arctanh(verts).reshape(g, g, k, 2)
    logits = rng.normal(0.0, 1.0, (g, g))
    field = PolygonField(g, g, k, s, params, logits)

    cy, cx = rng.uniform(0.25 * size, 0.75 * size, 2)
    radius = rng.uniform(0.2 * size, 0.45 * size)
    rows, cols = np.mgrid[:size, :size] + 0.5
    y = ((rows - cy) ** 2 + (cols - cx) ** 2 <= radius ** 2).astype(float)
    return field, y


def finite_difference(field: PolygonField, tri, cfg, y, h: float = 1e-4) -> np.ndarray:
    """Flat central-difference gradient over ``[vertex_params, gate_logits]``."""
    x0 = np.concatenate([field.vertex_params.ravel(), field.gate_logits.ravel()])
    n_v = field.vertex_params.size
    probe = field.copy()

    def loss_at(x):
        probe.vertex_params[...] = x[:n_v].reshape(probe.vertex_params.shape)
        probe.gate_logits[...] = x[n_v:].reshape(probe.gate_logits.shape)
        return field_loss(probe, tri, cfg, y).total

    grad = np.empty_like(x0)
    x = x0.copy()
    for j in range(x0.size):
        x[j] = x0[j] + h
        f_plus = loss_at(x)
        x[j] = x0[j] - h
        f_minus = loss_at(x)
        x[j] = x0[j]
        grad[j] = (f_plus - f_minus) / (2.0 * h)
    return grad


@dataclass
class GradCheckResult:
    seed: int
    worst_rel_error: float
    worst_index: int
    n_checked: int

    def passed(self, tol: float) -> bool:
        return self.worst_rel_error <= tol


def relative_errors(analytic, numeric, floor: float = 1e-8) -> np.ndarray:
    """``|a - n| / |a|`` per coordinate; NaN where ``|a| < floor`` (skipped)."""
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    err = np.full(analytic.shape, np.nan)
    ok = np.abs(analytic) >= floor
    err[ok] = np.abs(analytic[ok] - numeric[ok]) / np.abs(analytic[ok])
    return err


def check_seed(seed: int, cfg: SoftRasterConfig | None = None, h: float = 1e-4,
               floor: float = 1e-8) -> GradCheckResult:
    cfg = cfg or SoftRasterConfig()
    field, y = random_instance(seed)
    tri = regular_polygon_triangulation(field.k)
    _, grads = loss_gradients(field, tri, cfg, y)
    analytic = np.concatenate([grads.vertex_params.ravel(), grads.gate_logits.ravel()])
    numeric = finite_difference(field, tri, cfg, y, h)
    err = relative_errors(analytic, numeric, floor)
    if np.all(np.isnan(err)):
        return GradCheckResult(seed, 0.0, -1, 0)
    worst = int(np.nanargmax(err))
    return GradCheckResult(seed, float(err[worst]), worst, int(np.sum(~np.isnan(err))))
