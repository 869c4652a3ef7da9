import colorsys

import numpy as np
import pytest

from lofkit.errors import CodecError, ValidationError
from lofkit.preprocess import (
    RgbImage,
    edge_map,
    export_channel_stack,
    hsv_to_rgb,
    load_channel_stack,
    read_rgb,
    rgb_to_hsv,
    stack_channels,
    write_rgb,
)

SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=float)
SOBEL_Y = SOBEL_X.T
SOBEL_NORM = np.sqrt(20.0)


def rgb(*rows):
    return RgbImage(np.array(rows, dtype=np.uint8))


def random_image(rng, h=8, w=8):
    return RgbImage(rng.integers(0, 256, size=(h, w, 3)).astype(np.uint8))


class TestHsv:
    def test_primary_colors(self):
        img = rgb([[255, 0, 0], [128, 128, 128], [0, 255, 255]])
        h, s, v = rgb_to_hsv(img)
        assert (h[0, 0], s[0, 0], v[0, 0]) == (0.0, 1.0, 1.0)
        assert (s[0, 1], v[0, 1]) == (0.0, 128 / 255)
        assert h[0, 1] == 0.0  # achromatic pixels pin hue to 0
        assert (h[0, 2], s[0, 2], v[0, 2]) == (0.5, 1.0, 1.0)

    def test_matches_colorsys(self):
        values = list(range(0, 256, 32)) + [255]
        pixels = np.array(
            [[(r, g, b) for g in values for b in values] for r in values], dtype=np.uint8
        ).reshape(len(values), -1, 3)
        h, s, v = rgb_to_hsv(RgbImage(pixels))
        flat = pixels.reshape(-1, 3)
        hf, sf, vf = h.ravel(), s.ravel(), v.ravel()
        for i, (r, g, b) in enumerate(flat):
            eh, es, ev = colorsys.rgb_to_hsv(r / 255, g / 255, b / 255)
            circular = min(abs(hf[i] - eh), 1 - abs(hf[i] - eh))
            assert circular < 1e-9
            assert sf[i] == pytest.approx(es, abs=1e-9)
            assert vf[i] == pytest.approx(ev, abs=1e-9)

    def test_value_plane_is_exact_channel_max(self):
        rng = np.random.default_rng(5)
        img = random_image(rng)
        _, _, v = rgb_to_hsv(img)
        assert (v == img.pixels.max(axis=2) / 255.0).all()

    def test_round_trip_within_one_level(self):
        rng = np.random.default_rng(9)
        img = random_image(rng, 16, 16)
        h, s, v = rgb_to_hsv(img)
        back = hsv_to_rgb(h, s, v)
        err = np.abs(back - img.pixels / 255.0)
        assert err.max() <= 1 / 255


class TestEdgeMap:
    def test_constant_image_is_zero(self):
        img = RgbImage(np.full((6, 6, 3), 77, dtype=np.uint8))
        assert (edge_map(img, "sobel") == 0).all()
        assert (edge_map(img, "laplacian") == 0).all()

    def test_step_edge_is_localized(self):
        pixels = np.zeros((8, 8, 3), dtype=np.uint8)
        pixels[:, 4:] = 255
        plane = edge_map(RgbImage(pixels), "sobel")
        # maximal response hugs the step, zero response far from it
        assert plane[:, 3:5].min() > 0.5
        assert (plane[:, 0:2] == 0).all()
        assert (plane[:, 6:8] == 0).all()
        assert plane.max() == plane[0, 3]

    def test_matches_direct_convolution(self):
        pixels = np.zeros((3, 3, 3), dtype=np.uint8)
        pixels[1, 1] = 255
        img = RgbImage(pixels)
        luma = 0.299 * pixels[..., 0] / 255 + 0.587 * pixels[..., 1] / 255 + 0.114 * pixels[..., 2] / 255
        padded = np.pad(luma, 1, mode="edge")
        expected = np.zeros((3, 3))
        for y in range(3):
            for x in range(3):
                window = padded[y : y + 3, x : x + 3]
                gx = (window * SOBEL_X).sum()
                gy = (window * SOBEL_Y).sum()
                expected[y, x] = np.sqrt(gx * gx + gy * gy) / SOBEL_NORM
        assert np.abs(edge_map(img, "sobel") - expected).max() < 1e-12

    def test_sobel_invariant_under_luma_inversion(self):
        rng = np.random.default_rng(13)
        img = random_image(rng)
        inverted = RgbImage((255 - img.pixels).astype(np.uint8))
        assert np.abs(edge_map(img) - edge_map(inverted)).max() < 1e-12

    def test_output_range(self):
        rng = np.random.default_rng(21)
        for op in ("sobel", "laplacian"):
            plane = edge_map(random_image(rng), op)
            assert plane.min() >= 0.0 and plane.max() <= 1.0

    def test_too_small_image(self):
        img = RgbImage(np.zeros((2, 5, 3), dtype=np.uint8))
        with pytest.raises(ValidationError, match="smaller than"):
            edge_map(img)

    def test_unknown_operator(self):
        img = RgbImage(np.zeros((4, 4, 3), dtype=np.uint8))
        with pytest.raises(ValidationError, match="unknown edge operator"):
            edge_map(img, "canny")


class TestStack:
    def test_rgb_stack_is_normalized_input(self):
        rng = np.random.default_rng(2)
        img = random_image(rng)
        stack = stack_channels(img, ("R", "G", "B"))
        assert stack.names == ("R", "G", "B")
        assert (stack.data == img.pixels.transpose(2, 0, 1) / 255.0).all()

    def test_full_seven_channel_stack(self):
        rng = np.random.default_rng(4)
        img = random_image(rng)
        stack = stack_channels(img)
        assert stack.names == ("R", "G", "B", "H", "S", "V", "E")
        assert stack.data.shape == (7, 8, 8)
        h, s, v = rgb_to_hsv(img)
        assert (stack.data[3] == h).all()
        assert (stack.data[6] == edge_map(img)).all()

    def test_order_stability(self):
        rng = np.random.default_rng(6)
        img = random_image(rng)
        stack = stack_channels(img, ("V", "E", "R"))
        _, _, v = rgb_to_hsv(img)
        assert (stack.data[0] == v).all()
        assert (stack.data[2] == img.pixels[..., 0] / 255.0).all()

    def test_unknown_channel(self):
        img = RgbImage(np.zeros((4, 4, 3), dtype=np.uint8))
        with pytest.raises(ValidationError, match="unknown channel"):
            stack_channels(img, ("Q",))
        with pytest.raises(ValidationError, match="empty"):
            stack_channels(img, ())

    def test_export_and_load_round_trip(self, tmp_path):
        rng = np.random.default_rng(8)
        img = random_image(rng)
        stack = stack_channels(img, ("R", "H", "E"))
        sidecar = export_channel_stack(stack, tmp_path / "img0")
        assert sidecar.name == "channels.json"
        loaded = load_channel_stack(tmp_path / "img0")
        assert loaded.names == stack.names
        assert np.abs(loaded.data - stack.data).max() <= 1 / 65535
        files = sorted(p.name for p in (tmp_path / "img0").glob("plane_*.png"))
        assert files == ["plane_00_R.png", "plane_01_H.png", "plane_02_E.png"]

    def test_load_requires_sidecar(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(CodecError, match="sidecar"):
            load_channel_stack(tmp_path / "empty")


def test_rgb_png_round_trip(tmp_path):
    rng = np.random.default_rng(10)
    img = random_image(rng)
    write_rgb(img, tmp_path / "img.png")
    assert (read_rgb(tmp_path / "img.png").pixels == img.pixels).all()
