import math
import os
import tempfile

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from patchpoly import io as pio
from patchpoly.field import PolygonField
from patchpoly.metrics import iou, label_components, occlusion_distance


class TestPGM:
    def test_binary_roundtrip(self, tmp_path):
        for m in (np.ones((8, 8)), (np.random.default_rng(0).uniform(size=(5, 7)) > 0.5) * 1.0):
            pio.write_mask(tmp_path / "m.pgm", m)
            np.testing.assert_array_equal(pio.read_mask(tmp_path / "m.pgm"), m)

    def test_header_and_rounding(self, tmp_path):
        pio.write_mask(tmp_path / "m.pgm", [[0.0, 0.5, 1.0, 2.0, -1.0, 0.3]])
        data = (tmp_path / "m.pgm").read_bytes()
        assert data == b"P5\n6 1\n255\n" + bytes([0, 128, 255, 255, 0, 76])
        np.testing.assert_allclose(pio.read_mask(tmp_path / "m.pgm", soft=True),
                                   [[0, 128 / 255, 1, 1, 0, 76 / 255]])

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9))))
    def test_soft_roundtrip_exact(self, raw):
        # tmp_path is function-scoped, so each example gets its own directory
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, "m.pgm")
            pio.write_mask(path, raw / 255.0)
            np.testing.assert_array_equal(pio.read_pgm(path), raw)

    def test_ascii_p2(self, tmp_path):
        (tmp_path / "a.pgm").write_bytes(b"P2\n# comment\n3 2\n255\n0 255 0\n255 # mid\n 200 10\n")
        np.testing.assert_array_equal(pio.read_mask(tmp_path / "a.pgm"), [[0, 1, 0], [1, 1, 0]])

    def test_comment_in_p5_header(self, tmp_path):
        (tmp_path / "c.pgm").write_bytes(b"P5 # hi\n2 # w\n1\n255\n\x00\xff")
        np.testing.assert_array_equal(pio.read_pgm(tmp_path / "c.pgm"), [[0, 255]])

    @pytest.mark.parametrize("data, offset", [
        (b"P5\n4 4\n255\n" + b"\x00" * 10, 21),      # truncated raster
        (b"P6\n1 1\n255\n\x00", 0),                  # wrong magic
        (b"P5\n1 1\n65535\n\x00\x00", 7),            # unsupported maxval
        (b"P5\n1 x\n255\n\x00", 5),                  # non-numeric height
        (b"P5\n0 1\n255\n", 3),                      # zero width
        (b"P5\n3", 4),                               # header ends early
        (b"P2\n2 1\n255\n3 300\n", 13),              # value above maxval
        (b"P2\n2 1\n255\n3", 12),                    # missing pixel
        (b"P5\n100000 100000\n255\n", 3),            # overflow guard
    ])
    def test_malformed(self, tmp_path, data, offset):
        (tmp_path / "bad.pgm").write_bytes(data)
        with pytest.raises(pio.FormatError, match=f"byte offset {offset}$"):
            pio.read_mask(tmp_path / "bad.pgm")

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            pio.read_mask(tmp_path / "nope.pgm")

    def test_write_rejects_bad_masks(self, tmp_path):
        with pytest.raises(ValueError):
            pio.write_mask(tmp_path / "x.pgm", np.zeros(4))
        with pytest.raises(ValueError):
            pio.write_mask(tmp_path / "x.pgm", [[np.nan]])


def sample_field_file(seed=0, gh=2, gw=3, k=5, s=8):
    rng = np.random.default_rng(seed)
    f = PolygonField(gh, gw, k, s, rng.normal(size=(gh, gw, k, 2)) * 3, rng.normal(size=(gh, gw)) * 5)
    return pio.FieldFile.from_field(f)


class TestFieldFile:
    def test_roundtrip_nine_digits(self, tmp_path):
        ff = sample_field_file()
        pio.write_field(tmp_path / "f.ppf", ff)
        back = pio.read_field(tmp_path / "f.ppf")
        assert (back.height, back.width, back.s, back.k) == (16, 24, 8, 5)
        np.testing.assert_allclose(back.gates, ff.gates, rtol=5e-9, atol=0)
        np.testing.assert_allclose(back.verts, ff.verts, rtol=5e-9, atol=0)

    def test_layout(self, tmp_path):
        ff = sample_field_file(gh=1, gw=2, k=3)
        pio.write_field(tmp_path / "f.ppf", ff)
        lines = (tmp_path / "f.ppf").read_text().splitlines()
        assert lines[0] == "PPF1 8 16 8 3"
        assert len(lines) == 3 and all(len(ln.split()) == 7 for ln in lines[1:])
        first = [float(x) for x in lines[1].split()]
        assert first[0] == pytest.approx(ff.gates[0, 0])
        assert first[1:3] == pytest.approx(ff.verts[0, 0, 0].tolist())

    @pytest.mark.parametrize("text, fragment", [
        ("PPF2 8 8 8 3\n0.5 0 0 0 0 0 0\n", "header"),
        ("PPF1 8 8 8\n", "header"),
        ("PPF1 8 8 x 3\n", "non-integer"),
        ("PPF1 9 8 8 3\n", "invalid header"),
        ("PPF1 8 8 8 3\n0.5 0 0 0 0 0\n", "6 values"),
        ("PPF1 8 8 8 3\n1.5 0 0 0 0 0 0\n", "gate"),
        ("PPF1 8 8 8 3\n0.5 0 0 0 2 0 0\n", "vertex"),
        ("PPF1 8 8 8 3\n0.5 0 nan 0 0 0 0\n", "non-finite"),
        ("PPF1 8 8 8 3\n0.5 0 a 0 0 0 0\n", "non-numeric"),
        ("PPF1 8 16 8 3\n0.5 0 0 0 0 0 0\n", "expected 2"),
    ])
    def test_malformed(self, tmp_path, text, fragment):
        (tmp_path / "f.ppf").write_text(text)
        with pytest.raises(pio.FormatError, match=fragment) as exc:
            pio.read_field(tmp_path / "f.ppf")
        assert "byte offset" in str(exc.value)

    def test_error_offset_points_at_bad_line(self, tmp_path):
        text = "PPF1 8 16 8 3\n0.5 0 0 0 0 0 0\n0.5 0 0 0 0 0 9\n"
        (tmp_path / "f.ppf").write_text(text)
        with pytest.raises(pio.FormatError, match=f"byte offset {text.index('0.5 0 0 0 0 0 9')}$"):
            pio.read_field(tmp_path / "f.ppf")


class TestCSV:
    def test_format_value(self):
        assert pio.format_value(3) == "3"
        assert pio.format_value(np.int64(4)) == "4"
        assert pio.format_value(0.1) == "0.1"
        assert pio.format_value(float("nan")) == "nan"
        assert float(pio.format_value(1 / 3)) == 1 / 3

    def test_roundtrip_and_line_endings(self, tmp_path):
        path = tmp_path / "t.csv"
        pio.write_csv(path, ["a", "b"], [(1, 0.5), (2, float("nan"))], comments=["note"])
        raw = path.read_bytes()
        assert b"\r" not in raw and raw.startswith(b"# note\na,b\n")
        header, rows = pio.read_csv(path)
        assert header == ["a", "b"] and rows == [["1", "0.5"], ["2", "nan"]]


class TestSynth:
    def test_disk_area(self):
        m = pio.synth("disk", 64, 64)
        assert abs(m.sum() - math.pi * 24 ** 2) / (math.pi * 24 ** 2) < 0.02

    def test_two_blobs(self):
        m = pio.synth("two_blobs", 64, 64, r=10, separation=40)
        np.testing.assert_array_equal(m, pio.synth("two_blobs", 64, 64))
        assert label_components(m)[1] == 2
        assert occlusion_distance(m) == pytest.approx(20, abs=1.5)

    def test_ring_without_hole_is_disk(self):
        np.testing.assert_array_equal(pio.synth("ring", 64, 64, r_in=0, r_out=24), pio.synth("disk", 64, 64))

    def test_rect_default(self):
        m = pio.synth("rect", 64, 64)
        assert m.sum() == 32 * 32 and m[16:48, 16:48].all()

    def test_crescent(self):
        m = pio.synth("crescent", 64, 64)
        disk = pio.synth("disk", 64, 64)
        assert np.all(m <= disk) and 0 < m.sum() < disk.sum()
        assert label_components(m)[1] == 1

    @pytest.mark.parametrize("shape", pio.SHAPES)
    def test_binary_and_deterministic(self, shape):
        a, b = pio.synth(shape, 48, 80), pio.synth(shape, 48, 80)
        np.testing.assert_array_equal(a, b)
        assert set(np.unique(a)) <= {0.0, 1.0} and a.any()

    @pytest.mark.parametrize("shape, params", [
        ("disk", dict(r=40)), ("disk", dict(r=-1)), ("rect", dict(top=50)),
        ("ring", dict(r_in=30, r_out=20)), ("two_blobs", dict(separation=10)),
        ("crescent", dict(shift=0)), ("disk", dict(radius=3)),
    ])
    def test_invalid_params(self, shape, params):
        with pytest.raises(ValueError):
            pio.synth(shape, 64, 64, **params)

    def test_unknown_shape(self):
        with pytest.raises(ValueError):
            pio.synth("star")


class TestPad:
    def test_pads_bottom_right(self):
        m = np.ones((64, 64))
        p = pio.pad_to_multiple(m, 7)
        assert p.shape == (70, 70) and p.sum() == 64 * 64 and p[:64, :64].all()

    def test_multiple_unchanged(self):
        m = np.random.default_rng(0).uniform(size=(16, 24))
        np.testing.assert_array_equal(pio.pad_to_multiple(m, 8), m)

    def test_metrics_unchanged_by_padding(self):
        rng = np.random.default_rng(1)
        y = (rng.uniform(size=(13, 11)) > 0.5).astype(float)
        p = (rng.uniform(size=(13, 11)) > 0.5).astype(float)
        assert iou(pio.pad_to_multiple(y, 4), pio.pad_to_multiple(p, 4)) == iou(y, p)
