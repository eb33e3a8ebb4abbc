"""Patch grid of polygons plus the low-resolution gating map.

A :class:`PolygonField` stores raw, unconstrained parameters.  Decoding maps
vertex parameters through ``tanh`` into the open patch square and gate
logits through a sigmoid into (0, 1).  :func:`forward` composes rendering,
aggregation, nearest-neighbour upsampling and gating.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Triangulation
from .raster import SoftRasterConfig, render_patches_soft


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


@dataclass
class PolygonField:
    grid_h: int
    grid_w: int
    k: int
    s: int
    vertex_params: np.ndarray   # (grid_h, grid_w, k, 2), pre-tanh
    gate_logits: np.ndarray     # (grid_h, grid_w), pre-sigmoid

    def __post_init__(self):
        if min(self.grid_h, self.grid_w) < 1 or self.s < 1 or self.k < 3:
            raise ValueError(f"invalid field dims grid={self.grid_h}x{self.grid_w} "
                             f"s={self.s} k={self.k}")
        self.vertex_params = np.asarray(self.vertex_params, dtype=np.float64)
        self.gate_logits = np.asarray(self.gate_logits, dtype=np.float64)
        if self.vertex_params.shape != (self.grid_h, self.grid_w, self.k, 2):
            raise ValueError(f"vertex_params shape {self.vertex_params.shape} != "
                             f"{(self.grid_h, self.grid_w, self.k, 2)}")
        if self.gate_logits.shape != (self.grid_h, self.grid_w):
            raise ValueError(f"gate_logits shape {self.gate_logits.shape} != "
                             f"{(self.grid_h, self.grid_w)}")

    @property
    def shape(self) -> tuple[int, int]:
        """Full-resolution image size ``(H, W)``."""
        return self.grid_h * self.s, self.grid_w * self.s

    def copy(self) -> PolygonField:
        return PolygonField(self.grid_h, self.grid_w, self.k, self.s,
                            self.vertex_params.copy(), self.gate_logits.copy())

    def records(self) -> np.ndarray:
        """Decoded ``(grid_h, grid_w, 2k + 1)`` records: gate, x0, y0, x1, ..."""
        verts, gates = decode(self)
        flat = verts.reshape(self.grid_h, self.grid_w, 2 * self.k)
        return np.concatenate([gates[..., None], flat], axis=-1)


def decode(field: PolygonField) -> tuple[np.ndarray, np.ndarray]:
    """Return decoded vertices ``(gh, gw, k, 2)`` and gates ``(gh, gw)``."""
    return np.tanh(field.vertex_params), sigmoid(field.gate_logits)


def aggregate(patches) -> np.ndarray:
    """Place a ``(gh, gw, s, s)`` patch grid into an ``(gh*s, gw*s)`` mask."""
    patches = np.asarray(patches, dtype=float)
    if patches.ndim != 4 or patches.shape[2] != patches.shape[3]:
        raise ValueError(f"expected (gh, gw, s, s) patches, got {patches.shape}")
    gh, gw, s, _ = patches.shape
    return patches.transpose(0, 2, 1, 3).reshape(gh * s, gw * s)


def split(mask, s: int) -> np.ndarray:
    """Inverse of :func:`aggregate`."""
    mask = np.asarray(mask, dtype=float)
    h, w = mask.shape
    if h % s or w % s:
        raise ValueError(f"mask {h}x{w} is not a multiple of patch side {s}")
    return mask.reshape(h // s, s, w // s, s).transpose(0, 2, 1, 3)


def upsample_nearest(m, s: int) -> np.ndarray:
    if s < 1:
        raise ValueError(f"upsampling factor must be >= 1, got {s}")
    m = np.asarray(m, dtype=float)
    return np.repeat(np.repeat(m, s, axis=0), s, axis=1)


def block_sum(mask, s: int) -> np.ndarray:
    """Adjoint of :func:`upsample_nearest`: sum of each ``s x s`` block."""
    return split(mask, s).sum(axis=(2, 3))


def gate(up_m, r_p) -> np.ndarray:
    up_m = np.asarray(up_m, dtype=float)
    r_p = np.asarray(r_p, dtype=float)
    if up_m.shape != r_p.shape:
        raise ValueError(f"gate shape mismatch: {up_m.shape} vs {r_p.shape}")
    return up_m * r_p


def render_decoded(verts, gates, tri: Triangulation, cfg: SoftRasterConfig,
                   out_side: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Render decoded polygons/gates with ``out_side`` pixels per patch.

    Returns ``(m_o, up_m, r_p)``.
    """
    verts = np.asarray(verts, dtype=float)
    gh, gw = verts.shape[:2]
    flat = verts.reshape(gh * gw, verts.shape[2], 2)
    patches = render_patches_soft(flat, tri, cfg, out_side)
    r_p = aggregate(patches.reshape(gh, gw, out_side, out_side))
    up_m = upsample_nearest(gates, out_side)
    return gate(up_m, r_p), up_m, r_p


def forward(field: PolygonField, tri: Triangulation, cfg: SoftRasterConfig):
    """Decode, render, aggregate, upsample and gate.

    Patches are rendered at the field's own side ``field.s``; ``cfg.side``
    is not consulted.  Returns ``(m_o, up_m, r_p)``.
    """
    if tri.k != field.k:
        raise ValueError(f"triangulation k={tri.k} does not match field k={field.k}")
    verts, gates = decode(field)
    return render_decoded(verts, gates, tri, cfg, field.s)
