"""Image grids, mirror padding, channel handling, and PGM/PPM/PNG I/O.

Images are plain numpy arrays of float64 gray levels in [0, 255]:
shape (H, W) for grayscale, (H, W, 3) for RGB. Quantization to 8 bits
happens only when a file is written; everything in between stays
continuous so iterative schemes are not corrupted by repeated rounding.
"""

from __future__ import annotations

import re
from pathlib import Path

import numpy as np

# Nominal intensity range. The floor keeps fidelity terms that divide by
# the image bounded; 1.0 is 1/255 of full range, visually negligible.
INTENSITY_MAX = 255.0
INTENSITY_FLOOR = 1.0


class ImageFormatError(ValueError):
    """Raised for unreadable, corrupt, or unsupported image files."""


def as_grid(data) -> np.ndarray:
    """Coerce to a 2-D float64 grid and check finiteness."""
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D grid, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("empty grid")
    if not np.isfinite(arr).all():
        raise ValueError("grid contains non-finite values")
    return arr


def is_rgb(img: np.ndarray) -> bool:
    return img.ndim == 3 and img.shape[2] == 3


def clamp_intensity(img: np.ndarray, floor: float = INTENSITY_FLOOR) -> np.ndarray:
    """Clip gray levels to [floor, INTENSITY_MAX]."""
    return np.clip(img, floor, INTENSITY_MAX)


def pad_mirror(img: np.ndarray, margin: int) -> np.ndarray:
    """Extend a grid by mirror reflection about its edges.

    The edge pixel is not duplicated: index -1 maps to 1, -2 to 2, and so
    on, which realizes a zero normal derivative at the border. margin must
    be smaller than both dimensions (the single reflection is undefined
    otherwise).
    """
    arr = as_grid(img)
    if margin < 0:
        raise ValueError("margin must be >= 0")
    if margin == 0:
        return arr.copy()
    if margin >= min(arr.shape):
        raise ValueError(
            f"margin {margin} >= min dimension {min(arr.shape)}: reflection undefined"
        )
    return np.pad(arr, margin, mode="reflect")


def split_channels(img: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Split an (H, W, 3) image into three independent channel grids."""
    if not is_rgb(img):
        raise ValueError(f"expected an (H, W, 3) image, got shape {np.shape(img)}")
    arr = np.asarray(img, dtype=np.float64)
    return arr[:, :, 0].copy(), arr[:, :, 1].copy(), arr[:, :, 2].copy()


def merge_channels(r: np.ndarray, g: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Stack three equal-sized grids into an (H, W, 3) image."""
    r, g, b = as_grid(r), as_grid(g), as_grid(b)
    if r.shape != g.shape or r.shape != b.shape:
        raise ValueError(
            f"channel dimensions differ: {r.shape}, {g.shape}, {b.shape}"
        )
    return np.stack([r, g, b], axis=2)


def quantize(img: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255] and round half away from zero to uint8."""
    clipped = np.clip(np.asarray(img, dtype=np.float64), 0.0, INTENSITY_MAX)
    return np.floor(clipped + 0.5).astype(np.uint8)


# ---------------------------------------------------------------------------
# Netpbm (PGM/PPM) codec. ASCII variants (P2/P3) are handy as hand-editable
# test fixtures; the binary ones (P5/P6) are what the toolkit writes.
# ---------------------------------------------------------------------------

_NETPBM_MAGICS = {b"P2": ("pgm", False), b"P3": ("ppm", False),
                  b"P5": ("pgm", True), b"P6": ("ppm", True)}


def _tokenize_header(data: bytes, count: int) -> tuple[list[int], int]:
    """Read `count` whitespace-separated integer tokens, skipping comments.

    Returns the tokens and the offset just past the single whitespace byte
    that terminates the last one.
    """
    tokens: list[int] = []
    pos = 0
    while len(tokens) < count:
        if pos >= len(data):
            raise ImageFormatError("truncated image header")
        ch = data[pos:pos + 1]
        if ch == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise ImageFormatError("truncated image header")
            pos = nl + 1
        elif ch.isspace():
            pos += 1
        else:
            m = re.match(rb"\d+", data[pos:])
            if not m:
                raise ImageFormatError("malformed image header")
            tokens.append(int(m.group(0)))
            pos += len(m.group(0))
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise ImageFormatError("malformed image header")
    return tokens, pos + 1


def _read_netpbm(data: bytes) -> np.ndarray:
    kind, binary = _NETPBM_MAGICS[data[:2]]
    channels = 3 if kind == "ppm" else 1
    (width, height, maxval), offset = _tokenize_header(data[2:], 3)
    offset += 2
    if width < 1 or height < 1:
        raise ImageFormatError("bad image dimensions")
    if maxval not in (255, 65535):
        raise ImageFormatError(f"unsupported bit depth (maxval {maxval})")
    n_values = width * height * channels
    if binary:
        bytes_per = 1 if maxval == 255 else 2
        payload = data[offset:offset + n_values * bytes_per]
        if len(payload) < n_values * bytes_per:
            raise ImageFormatError("corrupt image payload")
        dtype = np.uint8 if maxval == 255 else ">u2"
        values = np.frombuffer(payload, dtype=dtype, count=n_values).astype(np.float64)
    else:
        tokens = data[offset:].split()
        if len(tokens) < n_values:
            raise ImageFormatError("corrupt image payload")
        try:
            values = np.array([int(t) for t in tokens[:n_values]], dtype=np.float64)
        except ValueError as exc:
            raise ImageFormatError("corrupt image payload") from exc
    if values.size and values.max() > maxval:
        raise ImageFormatError("sample exceeds declared maxval")
    if maxval == 65535:
        values *= INTENSITY_MAX / 65535.0
    if channels == 1:
        return values.reshape(height, width)
    return values.reshape(height, width, 3)


def _write_netpbm(img8: np.ndarray, path: Path, ascii_format: bool) -> None:
    if img8.ndim == 2:
        magic = b"P2" if ascii_format else b"P5"
        height, width = img8.shape
    else:
        magic = b"P3" if ascii_format else b"P6"
        height, width = img8.shape[:2]
    header = b"%s\n%d %d\n255\n" % (magic, width, height)
    if ascii_format:
        flat = img8.reshape(height, -1)
        body = b"\n".join(b" ".join(b"%d" % v for v in row) for row in flat) + b"\n"
    else:
        body = img8.tobytes()
    path.write_bytes(header + body)


def load_image(path, expect: str = "any") -> np.ndarray:
    """Load a PGM/PPM/PNG file as a float64 array in [0, 255].

    Args:
        path: image file; format is sniffed from its magic bytes.
        expect: 'gray', 'rgb', or 'any'. A mismatch raises ImageFormatError.

    Returns:
        (H, W) array for grayscale input, (H, W, 3) for RGB.
    """
    if expect not in ("gray", "rgb", "any"):
        raise ValueError(f"expect must be gray|rgb|any, got {expect!r}")
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc}") from exc
    if data[:2] in _NETPBM_MAGICS:
        img = _read_netpbm(data)
    elif data[:8] == b"\x89PNG\r\n\x1a\n":
        img = _read_png(path)
    else:
        raise ImageFormatError(f"{path}: not a PGM/PPM/PNG file")
    if expect == "gray" and img.ndim != 2:
        raise ImageFormatError(f"{path}: expected grayscale, got RGB")
    if expect == "rgb" and img.ndim != 3:
        raise ImageFormatError(f"{path}: expected RGB, got grayscale")
    return img


def _read_png(path: Path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode == "L":
            return np.asarray(im, dtype=np.float64)
        if im.mode == "RGB":
            return np.asarray(im, dtype=np.float64)
        if im.mode in ("I", "I;16"):
            arr = np.asarray(im, dtype=np.float64)
            return arr * (INTENSITY_MAX / 65535.0)
        raise ImageFormatError(f"{path}: unsupported PNG mode {im.mode!r}")


def save_image(img: np.ndarray, path, format: str | None = None,
               ascii_format: bool = False) -> None:
    """Write an image, quantizing to 8 bits.

    Values are clamped to [0, 255] and rounded half away from zero, so a
    save/load round trip reproduces the quantized grid exactly. format
    defaults to the file extension (pgm, ppm, or png).
    """
    path = Path(path)
    if format is None:
        format = path.suffix.lstrip(".").lower()
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        pass
    elif is_rgb(arr):
        pass
    else:
        raise ValueError(f"cannot save image of shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError("cannot save non-finite image")
    img8 = quantize(arr)
    if format == "pgm":
        if img8.ndim != 2:
            raise ValueError("pgm stores grayscale; use ppm or png for RGB")
        _write_netpbm(img8, path, ascii_format)
    elif format == "ppm":
        if img8.ndim != 3:
            raise ValueError("ppm stores RGB; use pgm or png for grayscale")
        _write_netpbm(img8, path, ascii_format)
    elif format == "png":
        from PIL import Image

        Image.fromarray(img8).save(path, format="PNG")
    else:
        raise ValueError(f"unsupported format {format!r} (use pgm, ppm, or png)")
