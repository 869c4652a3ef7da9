"""Base64 image ingestion for provider-agnostic chat requests."""

from __future__ import annotations

import base64
from pathlib import Path

from ..errors import ValidationError

_MEDIA_TYPES = {
    ".png": "image/png",
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
}


def encode_bytes(data: bytes) -> str:
    """Standard padded base64; output length is 4 * ceil(len(data) / 3)."""
    return base64.b64encode(data).decode("ascii")


def encode_image(path: str | Path) -> tuple[str, str]:
    """Read a PNG or JPEG file and return (base64 payload, media type)."""
    path = Path(path)
    media_type = _MEDIA_TYPES.get(path.suffix.lower())
    if media_type is None:
        raise ValidationError(
            f"unsupported image format {path.suffix!r} for {path} (expected .png/.jpg/.jpeg)"
        )
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ValidationError(f"unreadable image file {path}: {exc}") from None
    return encode_bytes(data), media_type
