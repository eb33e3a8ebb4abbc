"""Segmentation metrics: IoU, Dice/F1, weighted coverage, boundary F-score,
contours and the occlusion distance between them.

All masks are 2-D arrays interpreted as binary (non-zero is foreground).
Components are 8-connected; a component's boundary pixels are those with a
4-neighbour outside the component or on the image border.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

import numpy as np
from scipy import ndimage

_EIGHT = np.ones((3, 3), dtype=bool)
_FOUR = ndimage.generate_binary_structure(2, 1)
FBOUND_THRESHOLDS = (1, 2, 3, 4, 5)


def _binary(m) -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D mask, got shape {m.shape}")
    return m != 0


def _pair(y, p):
    y, p = _binary(y), _binary(p)
    if y.shape != p.shape:
        raise ValueError(f"shape mismatch: ground truth {y.shape} vs prediction {p.shape}")
    return y, p


def iou(y, p) -> float:
    y, p = _pair(y, p)
    union = np.count_nonzero(y | p)
    if union == 0:
        return 1.0
    return np.count_nonzero(y & p) / union


def dice_f1(y, p) -> float:
    y, p = _pair(y, p)
    total = np.count_nonzero(y) + np.count_nonzero(p)
    if total == 0:
        return 1.0
    return 2.0 * np.count_nonzero(y & p) / total


def label_components(m) -> tuple[np.ndarray, int]:
    """8-connected labelling (labels 1..n, background 0)."""
    return ndimage.label(_binary(m), structure=_EIGHT)


def boundary_mask(m) -> np.ndarray:
    """Foreground pixels with a 4-neighbour outside the mask or off the image.

    A 4-neighbour of a pixel is never in a different 8-connected component,
    so this equals the per-component boundary test.
    """
    m = _binary(m)
    return m & ~ndimage.binary_erosion(m, structure=_FOUR, border_value=0)


def _trace(pixels: set) -> list[tuple[int, int]]:
    """Order a pixel set by a greedy 8-neighbour walk.

    Starts at the top-left pixel; at each step moves to the unvisited
    neighbour first met clockwise from the previous direction, or jumps to
    the nearest unvisited pixel when stuck (thin or branching boundaries).
    """
    steps = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)]
    left = set(pixels)
    cur = min(left)
    left.discard(cur)
    order = [cur]
    heading = 0
    while left:
        for turn in range(8):
            d = (heading + 6 + turn) % 8
            nxt = (cur[0] + steps[d][0], cur[1] + steps[d][1])
            if nxt in left:
                heading = d
                break
        else:
            nxt = min(left, key=lambda q: ((q[0] - cur[0]) ** 2 + (q[1] - cur[1]) ** 2, q))
        left.discard(nxt)
        order.append(nxt)
        cur = nxt
    return order


def extract_contours(y) -> list[np.ndarray]:
    """One ``(n, 2)`` array of (row, col) boundary pixels per component."""
    labels, n = label_components(y)
    edge = boundary_mask(y)
    contours = []
    for lab in range(1, n + 1):
        rows, cols = np.nonzero(edge & (labels == lab))
        ring = _trace(set(zip(rows.tolist(), cols.tolist())))
        contours.append(np.asarray(ring, dtype=np.int64).reshape(-1, 2))
    return contours


def _min_distance(a: np.ndarray, b: np.ndarray) -> float:
    diff = a[:, None, :].astype(float) - b[None, :, :].astype(float)
    return float(np.sqrt(np.min(np.sum(diff * diff, axis=-1))))


def occlusion_distance(y) -> float:
    """Largest of the pairwise minimum distances between contours (0 if < 2)."""
    contours = extract_contours(y)
    best = 0.0
    for i in range(len(contours)):
        for j in range(i + 1, len(contours)):
            best = max(best, _min_distance(contours[i], contours[j]))
    return best


def wcov(y, p) -> float:
    """Size-weighted IoU of each ground-truth component with its best match.

    The match is the predicted component overlapping it most (ties go to
    the lowest label); a component with no overlap scores 0.
    """
    y, p = _pair(y, p)
    y_lab, n_y = label_components(y)
    if n_y == 0:
        raise ValueError("weighted coverage is undefined for an empty ground truth")
    p_lab, _ = label_components(p)
    total = np.count_nonzero(y)
    score = 0.0
    for lab in range(1, n_y + 1):
        obj = y_lab == lab
        hits = np.bincount(p_lab[obj], minlength=1)
        hits[0] = 0
        if hits.max() == 0:
            continue
        match = p_lab == int(np.argmax(hits))
        score += np.count_nonzero(obj) / total * iou(obj, match)
    return score


def boundary_f1(y, p, thresholds=FBOUND_THRESHOLDS) -> np.ndarray:
    """Boundary F1 at each distance threshold (pixels, inclusive)."""
    y, p = _pair(y, p)
    by, bp = boundary_mask(y), boundary_mask(p)
    ny, np_ = np.count_nonzero(by), np.count_nonzero(bp)
    out = np.zeros(len(thresholds))
    if ny == 0 or np_ == 0:
        if ny == 0 and np_ == 0:
            out[:] = 1.0
        return out
    # exact Euclidean distance from every pixel to the nearest boundary pixel
    dist_to_y = ndimage.distance_transform_edt(~by)
    dist_to_p = ndimage.distance_transform_edt(~bp)
    for i, theta in enumerate(thresholds):
        precision = np.count_nonzero(dist_to_y[bp] <= theta) / np_
        recall = np.count_nonzero(dist_to_p[by] <= theta) / ny
        if precision + recall > 0:
            out[i] = 2.0 * precision * recall / (precision + recall)
    return out


def fbound(y, p, thresholds=FBOUND_THRESHOLDS) -> float:
    return float(np.mean(boundary_f1(y, p, thresholds)))


@dataclass(frozen=True)
class MetricReport:
    iou: float
    dice: float
    f1: float
    wcov: float
    fbound: float
    occlusion_d: float

    def as_dict(self) -> dict:
        return asdict(self)


def evaluate(y, p) -> MetricReport:
    """All metrics for one pair; ``wcov`` is NaN when ``y`` is empty."""
    y, p = _pair(y, p)
    d = dice_f1(y, p)
    cov = wcov(y, p) if y.any() else float("nan")
    return MetricReport(iou(y, p), d, d, cov, fbound(y, p), occlusion_distance(y))


@dataclass(frozen=True)
class Stratum:
    name: str
    lo: float
    hi: float
    count: int
    mean_iou: float


def stratify_by_occlusion(cases, threshold: float = 1.0) -> list[Stratum]:
    """Group ``(y, p)`` pairs by occlusion distance of ``y``.

    Bins are ``d == 0``, ``0 < d <= threshold`` and ``d > threshold``;
    empty bins are omitted and an empty input gives an empty list.
    """
    bins = [("d=0", 0.0, 0.0), (f"0<d<={threshold:g}", 0.0, threshold),
            (f"d>{threshold:g}", threshold, float("inf"))]
    members = [[] for _ in bins]
    for y, p in cases:
        d = occlusion_distance(y)
        idx = 0 if d == 0 else (1 if d <= threshold else 2)
        members[idx].append(iou(y, p))
    return [Stratum(name, lo, hi, len(vals), float(np.mean(vals)))
            for (name, lo, hi), vals in zip(bins, members) if vals]
