"""Hot loops: signed distance of sample points to triangle-union polygons.

Two interchangeable implementations are provided:

* ``*_numba``: ``@njit(parallel=True)`` kernels, one polygon per worker.
* ``*_numpy``: vectorized numpy, chunked over polygons to bound memory.

The module-level ``signed_distance`` / ``signed_distance_vjp`` point at the
numba versions unless numba is missing or ``PATCHPOLY_DISABLE_NUMBA`` is set
to a non-empty value other than ``0`` at import time.

Array conventions (all float64 / int64, C-contiguous):

    verts     (N, k, 2)  polygon vertices
    pts       (M, 2)     sample points, shared by every polygon
    tris      (T, 3)     triangle vertex indices
    edges     (E, 2)     unique triangle edges
    opposite  (E, 2)     vertices opposite each edge (-1 when unshared)
"""

import os
import warnings

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None

_DISABLED = os.environ.get("PATCHPOLY_DISABLE_NUMBA", "") not in ("", "0")
HAVE_NUMBA = numba is not None
BACKEND = "numba" if HAVE_NUMBA and not _DISABLED else "numpy"

# exponent of the p-norm soft minimum over edge distances
DEFAULT_POWER = 2.0

# polygons * edges * points per numpy chunk
_CHUNK_ELEMS = 1 << 21


def _prep(verts, pts, tris, edges, opposite):
    return (np.ascontiguousarray(verts, dtype=np.float64),
            np.ascontiguousarray(pts, dtype=np.float64),
            np.ascontiguousarray(tris, dtype=np.int64),
            np.ascontiguousarray(edges, dtype=np.int64),
            np.ascontiguousarray(opposite, dtype=np.int64))


# ---------------------------------------------------------------------------
# numpy path
# ---------------------------------------------------------------------------

def _cross_np(ox, oy, ax, ay, bx, by):
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def _active_edges_np(v, edges, opposite):
    """(n, E) mask of edges that bound the union of triangles."""
    a = v[:, edges[:, 0]]
    b = v[:, edges[:, 1]]
    o1 = v[:, np.maximum(opposite[:, 0], 0)]
    o2 = v[:, np.maximum(opposite[:, 1], 0)]
    s1 = _cross_np(a[..., 0], a[..., 1], b[..., 0], b[..., 1], o1[..., 0], o1[..., 1])
    s2 = _cross_np(a[..., 0], a[..., 1], b[..., 0], b[..., 1], o2[..., 0], o2[..., 1])
    interior = (s1 * s2 < 0.0) & (opposite[:, 1] >= 0)
    return ~interior


def _inside_np(v, pts, tris):
    """(n, M) closed union-of-triangles membership; zero-area triangles are empty."""
    px = pts[None, None, :, 0]
    py = pts[None, None, :, 1]
    a = v[:, tris[:, 0], None]
    b = v[:, tris[:, 1], None]
    c = v[:, tris[:, 2], None]
    d1 = _cross_np(a[..., 0], a[..., 1], b[..., 0], b[..., 1], px, py)
    d2 = _cross_np(b[..., 0], b[..., 1], c[..., 0], c[..., 1], px, py)
    d3 = _cross_np(c[..., 0], c[..., 1], a[..., 0], a[..., 1], px, py)
    area = _cross_np(a[..., 0], a[..., 1], b[..., 0], b[..., 1], c[..., 0], c[..., 1])
    has_neg = (d1 < 0.0) | (d2 < 0.0) | (d3 < 0.0)
    has_pos = (d1 > 0.0) | (d2 > 0.0) | (d3 > 0.0)
    return (~(has_neg & has_pos) & (area != 0.0)).any(axis=1)


def _edge_distances_np(v, pts, edges, opposite):
    """Per-edge distances ``(n, E, M)`` (inf for inactive edges), ``t`` and ``p - q``."""
    a = v[:, edges[:, 0], None, :]                       # (n, E, 1, 2)
    ab = v[:, edges[:, 1], None, :] - a
    ap = pts[None, None, :, :] - a                       # (n, E, M, 2)
    length2 = ab[..., 0] * ab[..., 0] + ab[..., 1] * ab[..., 1]
    safe = np.where(length2 > 0.0, length2, 1.0)
    t = (ap[..., 0] * ab[..., 0] + ap[..., 1] * ab[..., 1]) / safe
    t = np.where(length2 > 0.0, np.clip(t, 0.0, 1.0), 0.0)
    dx = ap[..., 0] - t * ab[..., 0]
    dy = ap[..., 1] - t * ab[..., 1]
    dist = np.sqrt(dx * dx + dy * dy)
    active = _active_edges_np(v, edges, opposite)
    dist = np.where(active[:, :, None], dist, np.inf)
    return dist, t, dx, dy


def _softmin_np(dist, power):
    """p-norm soft minimum over axis 1 and its partials ``dU/d dist``.

    ``U = dmin * sum_e (dmin/d_e)**p) ** (-1/p)``; ``U`` is 0 on an edge,
    where the nearest edge takes the whole (unit) partial.
    """
    dmin = dist.min(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(dmin > 0.0, dmin / dist, 0.0)   # 0 for inactive edges
    first = np.argmin(dist, axis=1)[:, None, :]
    np.put_along_axis(ratio, first, 1.0, axis=1)
    scale = np.sum(ratio ** power, axis=1, keepdims=True) ** (-1.0 / power)
    soft = np.where(np.isfinite(dmin), dmin * scale, 0.0)[:, 0, :]
    partial = (ratio * scale) ** (power + 1.0)
    return soft, partial


def _chunks(n, per_item):
    step = max(1, _CHUNK_ELEMS // max(1, per_item))
    for lo in range(0, n, step):
        yield slice(lo, min(n, lo + step))


def signed_distance_numpy(verts, pts, tris, edges, opposite, power=DEFAULT_POWER):
    verts, pts, tris, edges, opposite = _prep(verts, pts, tris, edges, opposite)
    out = np.empty((verts.shape[0], pts.shape[0]))
    for sl in _chunks(verts.shape[0], edges.shape[0] * pts.shape[0]):
        v = verts[sl]
        dist = _softmin_np(_edge_distances_np(v, pts, edges, opposite)[0], power)[0]
        out[sl] = np.where(_inside_np(v, pts, tris), dist, -dist)
    return out


def signed_distance_vjp_numpy(verts, pts, tris, edges, opposite, weights, power=DEFAULT_POWER):
    verts, pts, tris, edges, opposite = _prep(verts, pts, tris, edges, opposite)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    n_poly, k = verts.shape[:2]
    grad = np.zeros((n_poly, k, 2))
    for sl in _chunks(n_poly, edges.shape[0] * pts.shape[0]):
        v = verts[sl]
        dist, t, dx, dy = _edge_distances_np(v, pts, edges, opposite)
        partial = _softmin_np(dist, power)[1]
        sign = np.where(_inside_np(v, pts, tris), 1.0, -1.0)
        # d dist_e / d q_e = (q - p) / dist_e = -(dx, dy) / dist_e
        ok = np.isfinite(dist) & (dist > 0.0)
        scale = np.where(ok, (weights[sl] * sign)[:, None, :] * partial
                         / np.where(ok, dist, 1.0), 0.0)
        gx = -dx * scale
        gy = -dy * scale
        for end, w in ((0, 1.0 - t), (1, t)):
            # sum over sample points, then scatter edge endpoints (fixed order)
            ex = np.sum(gx * w, axis=2)                  # (n, E)
            ey = np.sum(gy * w, axis=2)
            for e, vid in enumerate(edges[:, end]):
                grad[sl, vid, 0] += ex[:, e]
                grad[sl, vid, 1] += ey[:, e]
    return grad


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

if HAVE_NUMBA:
    # an outdated system TBB only makes numba pick another threading layer
    warnings.filterwarnings("ignore", message="The TBB threading layer requires TBB",
                            category=numba.NumbaWarning)
    _njit = numba.njit(cache=True, nogil=True)
    _njit_par = numba.njit(cache=True, nogil=True, parallel=True)
    prange = numba.prange
else:  # pragma: no cover
    def _njit(f):
        return f
    _njit_par = _njit
    prange = range


@_njit
def _cross_nb(ox, oy, ax, ay, bx, by):
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


@_njit
def _active_edges_nb(v, edges, opposite):
    n_edges = edges.shape[0]
    active = np.ones(n_edges, dtype=np.bool_)
    for e in range(n_edges):
        o2 = opposite[e, 1]
        if o2 < 0:
            continue
        u = edges[e, 0]
        w = edges[e, 1]
        o1 = opposite[e, 0]
        s1 = _cross_nb(v[u, 0], v[u, 1], v[w, 0], v[w, 1], v[o1, 0], v[o1, 1])
        s2 = _cross_nb(v[u, 0], v[u, 1], v[w, 0], v[w, 1], v[o2, 0], v[o2, 1])
        if s1 * s2 < 0.0:
            active[e] = False
    return active


@_njit
def _inside_nb(v, tris, px, py):
    for r in range(tris.shape[0]):
        a = tris[r, 0]
        b = tris[r, 1]
        c = tris[r, 2]
        area = _cross_nb(v[a, 0], v[a, 1], v[b, 0], v[b, 1], v[c, 0], v[c, 1])
        if area == 0.0:
            continue
        d1 = _cross_nb(v[a, 0], v[a, 1], v[b, 0], v[b, 1], px, py)
        d2 = _cross_nb(v[b, 0], v[b, 1], v[c, 0], v[c, 1], px, py)
        d3 = _cross_nb(v[c, 0], v[c, 1], v[a, 0], v[a, 1], px, py)
        has_neg = d1 < 0.0 or d2 < 0.0 or d3 < 0.0
        has_pos = d1 > 0.0 or d2 > 0.0 or d3 > 0.0
        if not (has_neg and has_pos):
            return True
    return False


@_njit
def _segment_nb(v, a, b, px, py):
    ax = v[a, 0]
    ay = v[a, 1]
    abx = v[b, 0] - ax
    aby = v[b, 1] - ay
    apx = px - ax
    apy = py - ay
    length2 = abx * abx + aby * aby
    t = 0.0
    if length2 > 0.0:
        t = (apx * abx + apy * aby) / length2
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    dx = apx - t * abx
    dy = apy - t * aby
    return np.sqrt(dx * dx + dy * dy), t, dx, dy


@_njit
def _pow(x, power):
    if power == 2.0:
        return x * x
    return x ** power


@_njit
def _nearest_nb(v, edges, active, px, py, dist, tt, ddx, ddy):
    """Fill per-edge distances (inf when inactive); return (dmin, argmin)."""
    dmin = np.inf
    first = 0
    for e in range(edges.shape[0]):
        if active[e]:
            d, t, dx, dy = _segment_nb(v, edges[e, 0], edges[e, 1], px, py)
            tt[e] = t
            ddx[e] = dx
            ddy[e] = dy
        else:
            d = np.inf
        dist[e] = d
        if d < dmin:
            dmin = d
            first = e
    return dmin, first


@_njit
def _softmin_scale_nb(dist, dmin, first, power):
    """``(sum_e (dmin/d_e)**p) ** (-1/p)``; 1 when ``dmin`` is 0 or inf."""
    if not (dmin > 0.0 and np.isfinite(dmin)):
        return 1.0
    total = 1.0
    for e in range(dist.shape[0]):
        if e != first:
            total += _pow(dmin / dist[e], power)
    if power == 2.0:
        return 1.0 / np.sqrt(total)
    return total ** (-1.0 / power)


@_njit_par
def _signed_distance_nb(verts, pts, tris, edges, opposite, power):
    n_poly = verts.shape[0]
    n_pts = pts.shape[0]
    n_edges = edges.shape[0]
    out = np.empty((n_poly, n_pts))
    for n in prange(n_poly):
        v = verts[n]
        active = _active_edges_nb(v, edges, opposite)
        dist = np.empty(n_edges)
        tt = np.empty(n_edges)
        ddx = np.empty(n_edges)
        ddy = np.empty(n_edges)
        for m in range(n_pts):
            px = pts[m, 0]
            py = pts[m, 1]
            dmin, first = _nearest_nb(v, edges, active, px, py, dist, tt, ddx, ddy)
            if not np.isfinite(dmin):
                out[n, m] = 0.0
                continue
            d = dmin * _softmin_scale_nb(dist, dmin, first, power)
            out[n, m] = d if _inside_nb(v, tris, px, py) else -d
    return out


@_njit_par
def _signed_distance_vjp_nb(verts, pts, tris, edges, opposite, weights, power):
    n_poly, k = verts.shape[0], verts.shape[1]
    n_pts = pts.shape[0]
    n_edges = edges.shape[0]
    grad = np.zeros((n_poly, k, 2))
    for n in prange(n_poly):
        v = verts[n]
        active = _active_edges_nb(v, edges, opposite)
        dist = np.empty(n_edges)
        tt = np.empty(n_edges)
        ddx = np.empty(n_edges)
        ddy = np.empty(n_edges)
        # per-edge endpoint accumulators keep the reduction order fixed
        acc = np.zeros((n_edges, 2, 2))
        for m in range(n_pts):
            w = weights[n, m]
            if w == 0.0:
                continue
            px = pts[m, 0]
            py = pts[m, 1]
            dmin, first = _nearest_nb(v, edges, active, px, py, dist, tt, ddx, ddy)
            if not (dmin > 0.0 and np.isfinite(dmin)):
                continue
            scale = _softmin_scale_nb(dist, dmin, first, power)
            if not _inside_nb(v, tris, px, py):
                w = -w
            for e in range(n_edges):
                if not active[e]:
                    continue
                # dU/dd_e = (U/d_e)**(p+1); chain through d_e = |p - q_e|
                r = dmin * scale / dist[e]
                s = w * _pow(r, power) * r / dist[e]
                gx = -ddx[e] * s
                gy = -ddy[e] * s
                t = tt[e]
                acc[e, 0, 0] += (1.0 - t) * gx
                acc[e, 0, 1] += (1.0 - t) * gy
                acc[e, 1, 0] += t * gx
                acc[e, 1, 1] += t * gy
        for end in range(2):
            for e in range(n_edges):
                vid = edges[e, end]
                grad[n, vid, 0] += acc[e, end, 0]
                grad[n, vid, 1] += acc[e, end, 1]
    return grad


def signed_distance_numba(verts, pts, tris, edges, opposite, power=DEFAULT_POWER):
    return _signed_distance_nb(*_prep(verts, pts, tris, edges, opposite), float(power))


def signed_distance_vjp_numba(verts, pts, tris, edges, opposite, weights, power=DEFAULT_POWER):
    args = _prep(verts, pts, tris, edges, opposite)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    return _signed_distance_vjp_nb(*args, weights, float(power))


if BACKEND == "numba":
    signed_distance = signed_distance_numba
    signed_distance_vjp = signed_distance_vjp_numba
else:
    signed_distance = signed_distance_numpy
    signed_distance_vjp = signed_distance_vjp_numpy
