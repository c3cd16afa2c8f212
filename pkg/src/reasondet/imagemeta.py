"""Minimal image-dimension sniffing from file headers.

Covers PNG, JPEG and GIF without decoding pixels; anything else yields
``None`` and the caller proceeds without dimensions.
"""

from __future__ import annotations

import struct


def sniff_dimensions(data: bytes) -> tuple[int, int] | None:
    """Return (width, height) if the header is recognized."""
    if len(data) >= 24 and data[:8] == b"\x89PNG\r\n\x1a\n" and data[12:16] == b"IHDR":
        w, h = struct.unpack(">II", data[16:24])
        return (w, h) if w > 0 and h > 0 else None
    if len(data) >= 10 and data[:6] in (b"GIF87a", b"GIF89a"):
        w, h = struct.unpack("<HH", data[6:10])
        return (w, h) if w > 0 and h > 0 else None
    if len(data) >= 4 and data[:2] == b"\xff\xd8":
        i = 2
        while i + 9 < len(data):
            if data[i] != 0xFF:
                i += 1
                continue
            marker = data[i + 1]
            # Start-of-frame markers carry the dimensions.
            if 0xC0 <= marker <= 0xCF and marker not in (0xC4, 0xC8, 0xCC):
                h, w = struct.unpack(">HH", data[i + 5 : i + 9])
                return (w, h) if w > 0 and h > 0 else None
            length = struct.unpack(">H", data[i + 2 : i + 4])[0]
            i += 2 + length
        return None
    return None
