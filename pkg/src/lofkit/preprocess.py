"""Auxiliary input channels: HSV planes and edge maps stacked onto RGB.

All planes are normalized to [0, 1] at export time so 8-bit color and
derived float channels can be mixed without silently biasing training.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import CodecError, ValidationError

CHANNEL_NAMES = ("R", "G", "B", "H", "S", "V", "E")

#: The full stack: original color plus hue/saturation/value and edges.
FULL_STACK = CHANNEL_NAMES

# ITU-R BT.601 luma weights, used before edge filtering.
_LUMA_WEIGHTS = (0.299, 0.587, 0.114)

# Largest gradient magnitude a Sobel pair can produce on [0,1] input
# (attained by the extremal corner pattern); keeps the plane in [0,1].
_SOBEL_MAX = float(np.sqrt(20.0))

_LAPLACIAN_MAX = 4.0


@dataclass(frozen=True, eq=False)
class RgbImage:
    """8-bit RGB pixels, shape (height, width, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 3 or pixels.size == 0:
            raise ValidationError(f"rgb image must have shape (h, w, 3), got {pixels.shape}")
        if pixels.dtype != np.uint8:
            raise ValidationError(f"rgb image must be uint8, got dtype {pixels.dtype}")
        object.__setattr__(self, "pixels", pixels)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def read_rgb(path: str | Path) -> RgbImage:
    with Image.open(path) as img:
        return RgbImage(np.asarray(img.convert("RGB"), dtype=np.uint8))


def write_rgb(image: RgbImage, path: str | Path) -> None:
    Image.fromarray(image.pixels, mode="RGB").save(path, format="PNG")


def rgb_to_hsv(img: RgbImage) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Hexcone RGB -> HSV conversion.

    H is degrees/360 in [0, 1) and defined as 0 for achromatic pixels;
    S and V lie in [0, 1] with V = max(R, G, B)/255 exactly.
    """
    rgb = img.pixels.astype(np.float64) / 255.0
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = np.max(rgb, axis=2)
    minc = np.min(rgb, axis=2)
    chroma = v - minc

    s = np.zeros_like(v)
    nonzero_v = v > 0
    s[nonzero_v] = chroma[nonzero_v] / v[nonzero_v]

    h = np.zeros_like(v)
    chromatic = chroma > 0
    safe_chroma = np.where(chromatic, chroma, 1.0)
    # branch priority matches colorsys: R wins ties, then G, then B
    is_r = chromatic & (r == v)
    is_g = chromatic & ~is_r & (g == v)
    is_b = chromatic & ~is_r & ~is_g
    h = np.where(is_r, np.mod((g - b) / safe_chroma, 6.0), h)
    h = np.where(is_g, (b - r) / safe_chroma + 2.0, h)
    h = np.where(is_b, (r - g) / safe_chroma + 4.0, h)
    h = np.mod(h / 6.0, 1.0)
    return h, s, v


def hsv_to_rgb(h: np.ndarray, s: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Inverse hexcone conversion; returns float planes stacked (h, w, 3) in [0, 1]."""
    h = np.asarray(h, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    sector = np.floor(h * 6.0)
    frac = h * 6.0 - sector
    p = v * (1.0 - s)
    q = v * (1.0 - s * frac)
    t = v * (1.0 - s * (1.0 - frac))
    sector = sector.astype(np.int64) % 6

    r = np.choose(sector, [v, q, p, p, t, v])
    g = np.choose(sector, [t, v, v, q, p, p])
    b = np.choose(sector, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=2)


def _luma(img: RgbImage) -> np.ndarray:
    rgb = img.pixels.astype(np.float64) / 255.0
    wr, wg, wb = _LUMA_WEIGHTS
    return wr * rgb[..., 0] + wg * rgb[..., 1] + wb * rgb[..., 2]


def _neighborhood(plane: np.ndarray) -> dict[tuple[int, int], np.ndarray]:
    """The nine shifted views of a replicate-padded plane, keyed by offset."""
    padded = np.pad(plane, 1, mode="edge")
    h, w = plane.shape
    return {
        (di, dj): padded[di : di + h, dj : dj + w] for di in range(3) for dj in range(3)
    }


def edge_map(img: RgbImage, operator: str = "sobel") -> np.ndarray:
    """Edge plane from the image's luma, normalized to [0, 1].

    `sobel` is the gradient magnitude; `laplacian` the absolute response.
    Either is divided by the operator's maximum attainable response on
    unit-range input so the plane stays in [0, 1]. Positive and negative
    kernel halves are evaluated with identical operation order, so a
    constant image yields an exactly zero plane.
    """
    if img.height < 3 or img.width < 3:
        raise ValidationError(
            f"image {img.width}x{img.height} is smaller than the 3x3 filter kernel"
        )
    n = _neighborhood(_luma(img))
    if operator == "sobel":
        gx = (n[0, 2] + 2.0 * n[1, 2] + n[2, 2]) - (n[0, 0] + 2.0 * n[1, 0] + n[2, 0])
        gy = (n[2, 0] + 2.0 * n[2, 1] + n[2, 2]) - (n[0, 0] + 2.0 * n[0, 1] + n[0, 2])
        return np.sqrt(gx * gx + gy * gy) / _SOBEL_MAX
    if operator == "laplacian":
        ring = (n[0, 1] + n[2, 1]) + (n[1, 0] + n[1, 2])
        return np.abs(ring - 4.0 * n[1, 1]) / _LAPLACIAN_MAX
    raise ValidationError(f"unknown edge operator {operator!r} (use 'sobel' or 'laplacian')")


@dataclass(frozen=True, eq=False)
class ChannelStack:
    """Named float planes in [0, 1], data shape (channels, height, width)."""

    names: tuple[str, ...]
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[0] != len(self.names):
            raise ValidationError(
                f"stack data shape {data.shape} does not match {len(self.names)} channel names"
            )
        if len(set(self.names)) != len(self.names):
            raise ValidationError(f"duplicate channel names in {self.names}")
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


def stack_channels(
    img: RgbImage,
    spec: tuple[str, ...] | list[str] = FULL_STACK,
    edge_operator: str = "sobel",
) -> ChannelStack:
    """Compute the requested planes and stack them in spec order."""
    if not spec:
        raise ValidationError("channel spec must not be empty")
    unknown = [name for name in spec if name not in CHANNEL_NAMES]
    if unknown:
        raise ValidationError(
            f"unknown channel name(s) {unknown} (supported: {', '.join(CHANNEL_NAMES)})"
        )
    if len(set(spec)) != len(spec):
        raise ValidationError(f"duplicate channel names in spec {tuple(spec)}")

    rgb = None
    hsv = None
    planes = []
    for name in spec:
        if name in ("R", "G", "B"):
            if rgb is None:
                rgb = img.pixels.astype(np.float64) / 255.0
            planes.append(rgb[..., "RGB".index(name)])
        elif name in ("H", "S", "V"):
            if hsv is None:
                hsv = rgb_to_hsv(img)
            planes.append(hsv["HSV".index(name)])
        else:
            planes.append(edge_map(img, operator=edge_operator))
    return ChannelStack(names=tuple(spec), data=np.stack(planes, axis=0))


# ---------------------------------------------------------------------------
# Export format: one 16-bit grayscale PNG per plane plus a sidecar naming the
# channels in order. Plane files carry a zero-padded index so a directory
# listing matches the requested channel order bit for bit.
# ---------------------------------------------------------------------------

SIDECAR_NAME = "channels.json"
_PLANE_SCALE = 65535


def write_plane_png16(plane: np.ndarray, path: str | Path) -> None:
    """Quantize a [0, 1] plane to 16 bits and write it as a grayscale PNG."""
    quantized = np.round(np.clip(plane, 0.0, 1.0) * _PLANE_SCALE).astype(np.uint16)
    Image.fromarray(quantized).save(path, format="PNG")


def read_plane_png16(path: str | Path) -> np.ndarray:
    with Image.open(path) as img:
        arr = np.asarray(img)
    if arr.ndim != 2:
        raise CodecError(f"{path}: expected a single-plane grayscale PNG, got shape {arr.shape}")
    return arr.astype(np.float64) / _PLANE_SCALE


def export_channel_stack(stack: ChannelStack, out_dir: str | Path) -> Path:
    """Write one PNG16 per plane plus the channel-order sidecar; returns the sidecar path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, name in enumerate(stack.names):
        write_plane_png16(stack.data[i], out_dir / f"plane_{i:02d}_{name}.png")
    sidecar = out_dir / SIDECAR_NAME
    meta = {
        "channels": list(stack.names),
        "width": stack.width,
        "height": stack.height,
        "bit_depth": 16,
        "scale": _PLANE_SCALE,
    }
    sidecar.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return sidecar


def load_channel_stack(in_dir: str | Path) -> ChannelStack:
    in_dir = Path(in_dir)
    sidecar = in_dir / SIDECAR_NAME
    if not sidecar.exists():
        raise CodecError(f"{in_dir}: missing {SIDECAR_NAME} sidecar")
    meta = json.loads(sidecar.read_text())
    names = tuple(meta["channels"])
    planes = [read_plane_png16(in_dir / f"plane_{i:02d}_{name}.png") for i, name in enumerate(names)]
    return ChannelStack(names=names, data=np.stack(planes, axis=0))
