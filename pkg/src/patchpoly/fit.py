"""Direct fit of a polygon field to a binary mask with Adam."""

from __future__ import annotations

import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .field import PolygonField, forward
from .geometry import Triangulation, regular_polygon, regular_polygon_triangulation
from .loss import loss_gradients, total_loss
from .raster import SoftRasterConfig

# keeps atanh finite when an initial vertex touches the patch border
_EDGE = 1.0 - 1e-6


@dataclass(frozen=True)
class FitConfig:
    iters: int = 400
    lr: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    gamma_start: float = 10.0
    gamma_end: float = 40.0
    seed: int = 0
    init_radius: float = 0.9
    init_jitter: float = 0.05
    supersample: int = 4
    softmin_power: float = 2.0

    def __post_init__(self):
        if self.iters < 0:
            raise ValueError(f"iters must be >= 0, got {self.iters}")
        if not self.lr > 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        for name in ("beta1", "beta2"):
            b = getattr(self, name)
            if not 0.0 <= b < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {b}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if not 0.0 < self.gamma_start <= self.gamma_end:
            raise ValueError(f"need 0 < gamma_start <= gamma_end, got "
                             f"{self.gamma_start}, {self.gamma_end}")
        if not 0.0 < self.init_radius <= 1.0:
            raise ValueError(f"init_radius must be in (0, 1], got {self.init_radius}")
        if self.init_jitter < 0:
            raise ValueError(f"init_jitter must be >= 0, got {self.init_jitter}")

    def gamma_at(self, t: int) -> float:
        """Sharpness at iteration ``t``: linear from start (t=0) to end (t=iters)."""
        if self.iters == 0:
            return self.gamma_end
        return self.gamma_start + (self.gamma_end - self.gamma_start) * t / self.iters

    def raster(self, t: int, side: int) -> SoftRasterConfig:
        return SoftRasterConfig(gamma=self.gamma_at(t), side=side,
                                supersample=self.supersample, softmin_power=self.softmin_power)


@dataclass(frozen=True)
class FitRecord:
    iteration: int
    bce: float
    dice: float
    total: float
    iou: float


@dataclass
class FitReport:
    records: list[FitRecord]
    field: PolygonField
    seconds: float
    config: FitConfig = dc_field(default_factory=FitConfig)

    @property
    def final(self) -> FitRecord:
        return self.records[-1]


class Adam:
    """Adam over a fixed list of arrays, updated in place."""

    def __init__(self, params, lr=0.05, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in self.params]
        self.v = [np.zeros_like(p) for p in self.params]
        self.t = 0

    def step(self, grads):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def binarize(m, threshold: float = 0.5) -> np.ndarray:
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")
    return (np.asarray(m, dtype=float) >= threshold).astype(np.uint8)


def _iou(y, p) -> float:
    union = np.count_nonzero(y | p)
    return 1.0 if union == 0 else np.count_nonzero(y & p) / union


def init_field(grid_h: int, grid_w: int, k: int, s: int, cfg: FitConfig | None = None) -> PolygonField:
    """Regular k-gon of radius ``init_radius`` in every patch, jittered, gates at 0.5."""
    cfg = cfg or FitConfig()
    if min(grid_h, grid_w) < 1 or k < 3 or s < 1:
        raise ValueError(f"invalid field dims grid={grid_h}x{grid_w} k={k} s={s}")
    rng = np.random.default_rng(cfg.seed)
    base = regular_polygon(k, cfg.init_radius)
    jitter = rng.uniform(-cfg.init_jitter, cfg.init_jitter, (grid_h, grid_w, k, 2))
    verts = np.clip(base + jitter, -_EDGE, _EDGE)
    return PolygonField(grid_h, grid_w, k, s, np.arctanh(verts), np.zeros((grid_h, grid_w)))


def fit(y, k: int, s: int, tri: Triangulation | None = None,
        cfg: FitConfig | None = None, callback=None) -> FitReport:
    """Optimize a fresh field against the binary mask ``y``.

    Record ``t`` holds the loss of the parameters before update ``t`` at
    sharpness ``gamma_at(t)``; the last record (``t = iters``) is taken
    after the final update.  ``callback(record)`` is called per record.
    """
    cfg = cfg or FitConfig()
    y = np.asarray(y, dtype=float)
    if y.ndim != 2 or y.shape[0] % s or y.shape[1] % s or y.size == 0:
        raise ValueError(f"mask shape {y.shape} is not a non-empty multiple of s={s}")
    tri = tri or regular_polygon_triangulation(k)
    if tri.k != k:
        raise ValueError(f"triangulation k={tri.k} does not match k={k}")
    yb = y >= 0.5

    start = time.perf_counter()
    field = init_field(y.shape[0] // s, y.shape[1] // s, k, s, cfg)
    opt = Adam([field.vertex_params, field.gate_logits], cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    records = []
    for t in range(cfg.iters + 1):
        rcfg = cfg.raster(t, s)
        outputs = forward(field, tri, rcfg)
        last = t == cfg.iters
        if last:
            loss = total_loss(outputs[1], outputs[0], y)
        else:
            loss, grads = loss_gradients(field, tri, rcfg, y, outputs)
        if not np.isfinite(loss.total):
            raise FloatingPointError(f"non-finite loss at iteration {t}")
        rec = FitRecord(t, loss.bce, loss.dice, loss.total, _iou(yb, outputs[0] >= 0.5))
        records.append(rec)
        if callback is not None:
            callback(rec)
        if not last:
            opt.step([grads.vertex_params, grads.gate_logits])
    return FitReport(records, field, time.perf_counter() - start, cfg)
