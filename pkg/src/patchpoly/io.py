"""File formats (PGM masks, PPF1 polygon fields, CSV) and synthetic shapes."""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .field import PolygonField, decode

MAXVAL = 255
# refuse headers that would need more than this many pixels
MAX_PIXELS = 1 << 28


class FormatError(ValueError):
    """Malformed file content; the message names the byte offset."""


# ---------------------------------------------------------------------------
# PGM
# ---------------------------------------------------------------------------

_WS = b" \t\r\n\v\f"


class _Header:
    """Tokenizer over a PGM header, tracking byte offsets and comments."""

    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path
        self.token_start = 0

    def fail(self, msg, pos=None):
        raise FormatError(f"{self.path}: {msg} at byte offset {self.pos if pos is None else pos}")

    def skip(self):
        data = self.data
        while self.pos < len(data):
            c = data[self.pos:self.pos + 1]
            if c == b"#":
                end = data.find(b"\n", self.pos)
                self.pos = len(data) if end < 0 else end + 1
            elif c in _WS:
                self.pos += 1
            else:
                break

    def integer(self, what: str) -> int:
        self.skip()
        start = self.token_start = self.pos
        while self.pos < len(self.data) and self.data[self.pos:self.pos + 1].isdigit():
            self.pos += 1
        if self.pos == start:
            if start >= len(self.data):
                self.fail(f"unexpected end of file while reading {what}")
            self.fail(f"expected {what}, found {self.data[start:start + 1]!r}")
        return int(self.data[start:self.pos])


def read_pgm(path) -> np.ndarray:
    """Raw 0..255 values of a P5 or P2 file with maxval 255, as uint8."""
    path = Path(path)
    data = path.read_bytes()
    hdr = _Header(data, path)
    magic = data[:2]
    if magic not in (b"P5", b"P2"):
        hdr.fail(f"bad magic {magic!r} (expected P5 or P2)", 0)
    hdr.pos = 2
    if hdr.pos < len(data) and data[2:3] not in _WS and data[2:3] != b"#":
        hdr.fail("missing whitespace after magic")
    width = hdr.integer("width")
    dims_pos = hdr.token_start
    height = hdr.integer("height")
    if width < 1 or height < 1:
        hdr.fail(f"invalid dimensions {width}x{height}", dims_pos)
    if width * height > MAX_PIXELS:
        hdr.fail(f"dimensions {width}x{height} exceed {MAX_PIXELS} pixels", dims_pos)
    maxval = hdr.integer("maxval")
    if maxval != MAXVAL:
        hdr.fail(f"unsupported maxval {maxval} (expected {MAXVAL})", hdr.token_start)
    n = width * height

    if magic == b"P5":
        if hdr.pos >= len(data) or data[hdr.pos:hdr.pos + 1] not in _WS:
            hdr.fail("missing single whitespace before raster")
        start = hdr.pos + 1
        if len(data) - start < n:
            hdr.fail(f"truncated raster: expected {n} bytes, found {len(data) - start}", len(data))
        return np.frombuffer(data, dtype=np.uint8, count=n, offset=start).reshape(height, width).copy()

    values = np.empty(n, dtype=np.uint8)
    for i in range(n):
        v = hdr.integer(f"pixel {i}")
        if v > MAXVAL:
            hdr.fail(f"pixel value {v} exceeds maxval {MAXVAL}", hdr.token_start)
        values[i] = v
    return values.reshape(height, width)


def read_mask(path, soft: bool = False) -> np.ndarray:
    """Float mask from a PGM file.

    Binary (default): values above 127 become 1, the rest 0.  Soft: value/255.
    """
    raw = read_pgm(path)
    if soft:
        return raw.astype(np.float64) / MAXVAL
    return (raw > 127).astype(np.float64)


def write_mask(path, m) -> None:
    """Write a P5 file, storing ``round(255 * v)`` per pixel."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise ValueError(f"expected a non-empty 2-D mask, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("mask contains non-finite values")
    raw = np.rint(np.clip(m, 0.0, 1.0) * MAXVAL).astype(np.uint8)
    h, w = raw.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n{MAXVAL}\n".encode("ascii") + raw.tobytes())


# ---------------------------------------------------------------------------
# PPF1 field files
# ---------------------------------------------------------------------------

@dataclass
class FieldFile:
    """Decoded field: gate probabilities ``(gh, gw)`` and vertices ``(gh, gw, k, 2)``."""
    height: int
    width: int
    s: int
    k: int
    gates: np.ndarray
    verts: np.ndarray

    @classmethod
    def from_field(cls, field: PolygonField) -> FieldFile:
        verts, gates = decode(field)
        h, w = field.shape
        return cls(h, w, field.s, field.k, gates, verts)

    @property
    def grid(self) -> tuple[int, int]:
        return self.height // self.s, self.width // self.s


def write_field(path, ff: FieldFile) -> None:
    gh, gw = ff.grid
    flat = np.concatenate([ff.gates.reshape(gh * gw, 1), ff.verts.reshape(gh * gw, 2 * ff.k)], axis=1)
    lines = [f"PPF1 {ff.height} {ff.width} {ff.s} {ff.k}"]
    lines += [" ".join(format(float(x), ".9g") for x in row) for row in flat]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii", newline="\n")


def read_field(path) -> FieldFile:
    path = Path(path)
    data = path.read_bytes()
    offsets = [0]
    for m in re.finditer(b"\n", data):
        offsets.append(m.end())
    lines = data.split(b"\n")

    def fail(line_no, msg):
        raise FormatError(f"{path}: {msg} at byte offset {offsets[min(line_no, len(offsets) - 1)]}")

    head = lines[0].split()
    if len(head) != 5 or head[0] != b"PPF1":
        fail(0, "expected header 'PPF1 H W s k'")
    try:
        h, w, s, k = (int(x) for x in head[1:])
    except ValueError:
        fail(0, "non-integer header field")
    if s < 1 or k < 3 or h < 1 or w < 1 or h % s or w % s:
        fail(0, f"invalid header dims H={h} W={w} s={s} k={k}")
    gh, gw = h // s, w // s
    if gh * gw > MAX_PIXELS:
        fail(0, "too many records")
    rows = []
    for i in range(1, len(lines)):
        if not lines[i].strip():
            continue
        try:
            vals = [float(x) for x in lines[i].split()]
        except ValueError:
            fail(i, f"non-numeric value in record {len(rows)}")
        if len(vals) != 2 * k + 1:
            fail(i, f"record {len(rows)} has {len(vals)} values, expected {2 * k + 1}")
        if not all(math.isfinite(v) for v in vals):
            fail(i, f"non-finite value in record {len(rows)}")
        if not 0.0 <= vals[0] <= 1.0:
            fail(i, f"gate {vals[0]} outside [0, 1] in record {len(rows)}")
        if any(abs(v) > 1.0 for v in vals[1:]):
            fail(i, f"vertex coordinate outside [-1, 1] in record {len(rows)}")
        rows.append(vals)
    if len(rows) != gh * gw:
        fail(len(lines) - 1, f"found {len(rows)} records, expected {gh * gw}")
    arr = np.asarray(rows, dtype=np.float64)
    return FieldFile(h, w, s, k, arr[:, 0].reshape(gh, gw), arr[:, 1:].reshape(gh, gw, k, 2))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def format_value(x) -> str:
    """Locale-independent text for a CSV cell (shortest round-trip floats)."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def write_csv(path, header, rows, comments=()) -> None:
    with open(path, "w", encoding="ascii", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(x) for x in row])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Header and rows, skipping ``#`` comment lines."""
    with open(path, encoding="ascii", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


# ---------------------------------------------------------------------------
# synthetic shapes
# ---------------------------------------------------------------------------

SHAPES = ("disk", "rect", "ring", "crescent", "two_blobs")


def _grid(h, w):
    rows, cols = np.mgrid[:h, :w]
    return rows + 0.5, cols + 0.5


def _disk(h, w, cy, cx, r):
    rows, cols = _grid(h, w)
    return (rows - cy) ** 2 + (cols - cx) ** 2 <= r * r


def _inside_box(h, w, top, left, bottom, right, what):
    if top < 0 or left < 0 or bottom > h or right > w:
        raise ValueError(f"{what} extends outside the {h}x{w} image")


def _positive(**kw):
    for name, v in kw.items():
        if not (math.isfinite(v) and v > 0):
            raise ValueError(f"{name} must be positive, got {v}")


def synth_defaults(shape: str, h: int, w: int) -> dict:
    """Default parameters, proportional to the shorter side ``m``.

    On 64x64: disk r=24; ring 12..24; rect the central 32x32; crescent a
    r=24 disk minus the same disk shifted 12 px right; two_blobs r=10 disks
    whose centres are 40 px apart.
    """
    m = min(h, w)
    cy, cx = h / 2, w / 2
    table = {
        "disk": dict(cy=cy, cx=cx, r=0.375 * m),
        "rect": dict(top=h / 4, left=w / 4, height=h / 2, width=w / 2),
        "ring": dict(cy=cy, cx=cx, r_in=0.1875 * m, r_out=0.375 * m),
        "crescent": dict(cy=cy, cx=cx, r=0.375 * m, shift=0.1875 * m),
        "two_blobs": dict(cy=cy, cx=cx, r=0.15625 * m, separation=0.625 * m),
    }
    if shape not in table:
        raise ValueError(f"unknown shape {shape!r}; expected one of {', '.join(SHAPES)}")
    return table[shape]


def synth(shape: str, h: int = 64, w: int = 64, **params) -> np.ndarray:
    """Binary ``h x w`` mask of an analytic shape (pixel centres at i + 0.5).

    Shapes and parameters (pixels; unspecified ones take
    :func:`synth_defaults`):

    * ``disk``: ``cy, cx, r``
    * ``rect``: ``top, left, height, width``
    * ``ring``: ``cy, cx, r_in, r_out`` (``r_in <= dist <= r_out``)
    * ``crescent``: ``cy, cx, r, shift``; the disk minus a copy moved right
    * ``two_blobs``: ``cy, cx, r, separation``; disks at ``cx -/+ separation/2``

    Every shape must fit inside the image.
    """
    if h < 1 or w < 1:
        raise ValueError(f"image size must be positive, got {h}x{w}")
    p = synth_defaults(shape, h, w)
    unknown = set(params) - set(p)
    if unknown:
        raise ValueError(f"unknown parameter(s) for {shape}: {', '.join(sorted(unknown))}")
    p.update({k: float(v) for k, v in params.items()})

    if shape == "rect":
        _positive(height=p["height"], width=p["width"])
        top, left = p["top"], p["left"]
        _inside_box(h, w, top, left, top + p["height"], left + p["width"], "rect")
        rows, cols = _grid(h, w)
        m = (rows >= top) & (rows < top + p["height"]) & (cols >= left) & (cols < left + p["width"])
        return m.astype(np.float64)

    cy, cx = p["cy"], p["cx"]
    if shape == "disk":
        r = p["r"]
        _positive(r=r)
        _inside_box(h, w, cy - r, cx - r, cy + r, cx + r, "disk")
        return _disk(h, w, cy, cx, r).astype(np.float64)
    if shape == "ring":
        r_in, r_out = p["r_in"], p["r_out"]
        _positive(r_out=r_out)
        if not 0 <= r_in < r_out:
            raise ValueError(f"need 0 <= r_in < r_out, got {r_in}, {r_out}")
        _inside_box(h, w, cy - r_out, cx - r_out, cy + r_out, cx + r_out, "ring")
        rows, cols = _grid(h, w)
        d2 = (rows - cy) ** 2 + (cols - cx) ** 2
        return ((d2 >= r_in * r_in) & (d2 <= r_out * r_out)).astype(np.float64)
    if shape == "crescent":
        r, shift = p["r"], p["shift"]
        _positive(r=r, shift=shift)
        _inside_box(h, w, cy - r, cx - r, cy + r, cx + r, "crescent")
        m = _disk(h, w, cy, cx, r) & ~_disk(h, w, cy, cx + shift, r)
        return m.astype(np.float64)
    # two_blobs
    r, sep = p["r"], p["separation"]
    _positive(r=r, separation=sep)
    if sep <= 2 * r:
        raise ValueError(f"blobs overlap: separation {sep} <= 2*r = {2 * r}")
    x1, x2 = cx - sep / 2, cx + sep / 2
    _inside_box(h, w, cy - r, x1 - r, cy + r, x2 + r, "two_blobs")
    return (_disk(h, w, cy, x1, r) | _disk(h, w, cy, x2, r)).astype(np.float64)


def pad_to_multiple(m, s: int) -> np.ndarray:
    """Pad with background at the bottom/right up to multiples of ``s``."""
    m = np.asarray(m, dtype=np.float64)
    h, w = m.shape
    return np.pad(m, ((0, -h % s), (0, -w % s)))
