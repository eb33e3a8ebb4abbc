"""Soft dice, binary cross-entropy, their sum, and analytic gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import PolygonField, block_sum, decode, forward, split
from .geometry import Triangulation
from .raster import SoftRasterConfig, render_patches_grad

BCE_EPS = 1e-7


@dataclass(frozen=True)
class LossBreakdown:
    bce: float
    dice: float

    @property
    def total(self) -> float:
        return self.bce + self.dice


@dataclass
class FieldGradients:
    vertex_params: np.ndarray
    gate_logits: np.ndarray

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.vertex_params ** 2) + np.sum(self.gate_logits ** 2)))


def _pair(y, y_hat):
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise ValueError(f"shape mismatch: target {y.shape} vs prediction {y_hat.shape}")
    return y, y_hat


def dice_loss(y, y_hat) -> float:
    """``1 - (2TP + 1) / (2TP + FN + FP + 1)`` with soft counts."""
    y, y_hat = _pair(y, y_hat)
    tp = np.sum(y * y_hat)
    fp = np.sum((1.0 - y) * y_hat)
    fn = np.sum(y * (1.0 - y_hat))
    return float(1.0 - (2.0 * tp + 1.0) / (2.0 * tp + fn + fp + 1.0))


def dice_loss_grad(y, y_hat) -> np.ndarray:
    y, y_hat = _pair(y, y_hat)
    # denominator simplifies to sum(y) + sum(y_hat) + 1
    num = 2.0 * np.sum(y * y_hat) + 1.0
    den = np.sum(y) + np.sum(y_hat) + 1.0
    return -(2.0 * y * den - num) / (den * den)


def bce_loss(y, y_hat) -> float:
    """Mean binary cross-entropy with ``y_hat`` clamped to [eps, 1 - eps]."""
    y, y_hat = _pair(y, y_hat)
    p = np.clip(y_hat, BCE_EPS, 1.0 - BCE_EPS)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def bce_loss_grad(y, y_hat) -> np.ndarray:
    y, y_hat = _pair(y, y_hat)
    p = np.clip(y_hat, BCE_EPS, 1.0 - BCE_EPS)
    g = (p - y) / (p * (1.0 - p)) / y.size
    return np.where((y_hat > BCE_EPS) & (y_hat < 1.0 - BCE_EPS), g, 0.0)


def total_loss(up_m, m_o, y) -> LossBreakdown:
    """Unweighted sum of BCE on the upsampled gates and dice on the output."""
    return LossBreakdown(bce=bce_loss(y, up_m), dice=dice_loss(y, m_o))


def field_loss(field: PolygonField, tri: Triangulation, cfg: SoftRasterConfig, y) -> LossBreakdown:
    m_o, up_m, _ = forward(field, tri, cfg)
    return total_loss(up_m, m_o, y)


def loss_gradients(field: PolygonField, tri: Triangulation, cfg: SoftRasterConfig, y,
                   outputs=None) -> tuple[LossBreakdown, FieldGradients]:
    """Loss and its gradient w.r.t. the raw field parameters.

    ``outputs`` may carry an already computed ``forward`` result.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != field.shape:
        raise ValueError(f"target shape {y.shape} does not match field {field.shape}")
    m_o, up_m, r_p = forward(field, tri, cfg) if outputs is None else outputs
    breakdown = total_loss(up_m, m_o, y)

    g_mo = dice_loss_grad(y, m_o)
    g_up = bce_loss_grad(y, up_m) + g_mo * r_p
    g_rp = g_mo * up_m

    verts, gates = decode(field)
    s = field.s
    g_gates = block_sum(g_up, s)
    g_logits = g_gates * gates * (1.0 - gates)

    gh, gw = field.grid_h, field.grid_w
    upstream = split(g_rp, s).reshape(gh * gw, s, s)
    g_verts = render_patches_grad(verts.reshape(gh * gw, field.k, 2), tri, cfg, upstream, s)
    g_params = g_verts.reshape(verts.shape) * (1.0 - verts * verts)
    return breakdown, FieldGradients(g_params, g_logits)
