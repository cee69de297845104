import math

import numpy as np
import pytest
import torch

from anchorhdr import frameio
from anchorhdr.imaging import CameraResponse, LdrFrame, LinearHdrFrame


class TestPng:
    @pytest.mark.parametrize("bit_depth,tol", [(8, 1 / 255 / 2 + 1e-6), (16, 1 / 65535 / 2 + 1e-7)])
    def test_round_trip_rgb(self, bit_depth, tol, rng, tmp_path):
        img = rng.uniform(0, 1, (9, 7, 3)).astype(np.float32)
        path = tmp_path / "t.png"
        frameio.write_png(path, img, bit_depth=bit_depth)
        back = frameio.read_png(path)
        assert back.shape == (9, 7, 3)
        assert np.abs(back - img).max() <= tol

    def test_round_trip_gray(self, rng, tmp_path):
        img = rng.uniform(0, 1, (5, 6)).astype(np.float32)
        path = tmp_path / "g.png"
        frameio.write_png(path, img, bit_depth=16)
        back = frameio.read_png(path)
        assert back.shape == (5, 6)
        assert np.abs(back - img).max() <= 1e-4

    def test_deterministic_bytes(self, rng, tmp_path):
        img = rng.uniform(0, 1, (4, 4, 3))
        frameio.write_png(tmp_path / "a.png", img)
        frameio.write_png(tmp_path / "b.png", img)
        assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()

    def test_rejects_non_png(self, tmp_path):
        p = tmp_path / "x.png"
        p.write_bytes(b"not a png at all")
        with pytest.raises(ValueError):
            frameio.read_png(p)

    def test_reads_matplotlib_output(self, tmp_path):
        # matplotlib PNGs are RGBA with assorted filter types
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        fig, ax = plt.subplots(figsize=(2, 2))
        ax.plot([0, 1], [0, 1])
        fig.savefig(tmp_path / "fig.png", dpi=50)
        plt.close(fig)
        img = frameio.read_png(tmp_path / "fig.png")
        assert img.ndim == 3 and img.shape[2] == 3
        assert img.max() <= 1.0 and img.min() >= 0.0


class TestHdr:
    def test_round_trip(self, rng, tmp_path):
        img = (rng.uniform(0, 1, (6, 5, 3)) * np.exp(rng.uniform(-4, 4, (6, 5, 1)))).astype(np.float32)
        path = tmp_path / "t.hdr"
        frameio.write_hdr(path, img)
        back = frameio.read_hdr(path)
        assert back.shape == img.shape
        # RGBE stores 8-bit mantissas: ~0.4% relative accuracy
        scale = np.maximum(img.max(axis=2, keepdims=True), 1e-9)
        assert np.abs(back - img).max() / scale.max() < 0.01
        assert np.abs((back - img) / scale).max() < 0.01

    def test_zero_pixels(self, tmp_path):
        img = np.zeros((3, 3, 3), dtype=np.float32)
        frameio.write_hdr(tmp_path / "z.hdr", img)
        assert np.array_equal(frameio.read_hdr(tmp_path / "z.hdr"), img)

    def test_rle_scanlines_decoded(self, tmp_path):
        # hand-build a 1x8 RLE-compressed file: run of 8 per component
        header = b"#?RADIANCE\nFORMAT=32-bit_rle_rgbe\n\n-Y 1 +X 8\n"
        rle = bytes([2, 2, 0, 8]) + bytes([136, 100, 136, 50, 136, 25, 136, 130])
        (tmp_path / "r.hdr").write_bytes(header + rle)
        img = frameio.read_hdr(tmp_path / "r.hdr")
        assert img.shape == (1, 8, 3)
        expected = np.array([100, 50, 25]) * math.ldexp(1.0, 130 - 136)
        assert np.allclose(img[0, 0], expected)
        assert np.allclose(img[0], np.tile(expected, (8, 1)))


class TestRaw:
    def test_round_trip_exact(self, rng, tmp_path):
        img = rng.normal(0, 10, (7, 4, 3)).astype(np.float32)
        frameio.write_raw(tmp_path / "t.raw", img)
        assert np.array_equal(frameio.read_raw(tmp_path / "t.raw"), img)

    def test_header_layout(self, tmp_path):
        img = np.zeros((2, 3, 4), dtype=np.float32)
        frameio.write_raw(tmp_path / "t.raw", img)
        data = (tmp_path / "t.raw").read_bytes()
        assert data[:4] == b"LCAT"
        assert len(data) == 16 + 2 * 3 * 4 * 4
        assert int.from_bytes(data[4:8], "little") == 2
        assert int.from_bytes(data[8:12], "little") == 3
        assert int.from_bytes(data[12:16], "little") == 4

    def test_bad_magic(self, tmp_path):
        (tmp_path / "bad.raw").write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(ValueError):
            frameio.read_raw(tmp_path / "bad.raw")


class TestFrameHelpers:
    def test_hdr_frame_round_trip_raw(self, rng, tmp_path):
        frame = LinearHdrFrame(pixels=torch.tensor(rng.uniform(0, 9, (3, 4, 4)), dtype=torch.float32))
        frameio.save_hdr_frame(frame, tmp_path / "f.raw")
        back = frameio.load_hdr_frame(tmp_path / "f.raw")
        assert torch.equal(back.pixels, frame.pixels)

    def test_ldr_frame_round_trip(self, rng, tmp_path):
        frame = LdrFrame(pixels=torch.tensor(rng.uniform(0, 1, (3, 4, 4)), dtype=torch.float32))
        frameio.save_ldr_frame(frame, tmp_path / "f.png", bit_depth=16)
        back = frameio.load_ldr_frame(tmp_path / "f.png")
        assert float((back.pixels - frame.pixels).abs().max()) < 1e-4

    def test_png_loads_linearized(self, tmp_path):
        # oracle: encoded value 128/255 decodes to (128/255)**2.2
        img = np.full((2, 2, 3), 128 / 255.0)
        frameio.write_png(tmp_path / "p.png", img)
        frame = frameio.load_linear_frame(tmp_path / "p.png", CameraResponse(2.2))
        expected = (128 / 255.0) ** 2.2
        assert abs(expected - 0.2199) < 5e-4
        assert torch.allclose(frame.pixels, torch.full((3, 2, 2), expected), atol=1e-6)
