"""PNG raster I/O (8- and 16-bit, grey/RGB/RGBA in, RGB out)."""

from pathlib import Path

import numpy as np
import png


class UnsupportedFormatError(ValueError):
    pass


_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def load_image(path) -> np.ndarray:
    """Read a PNG into an (H, W, 3) float64 array in [0, 1]."""
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(8) != _PNG_SIGNATURE:
            raise UnsupportedFormatError(f"{path} is not a PNG file")
    try:
        width, height, rows, info = png.Reader(filename=str(path)).asDirect()
        data = np.vstack([np.asarray(r, dtype=np.float64) for r in rows])
    except png.Error as exc:
        raise UnsupportedFormatError(f"{path}: {exc}") from exc
    planes = info["planes"]
    maxval = float(2 ** info["bitdepth"] - 1)
    data = data.reshape(height, width, planes) / maxval
    if info.get("greyscale"):
        data = np.repeat(data[..., :1], 3, axis=2)
    return np.ascontiguousarray(data[..., :3])


def save_image(img, path, bitdepth: int = 8) -> None:
    """Write an (H, W, 3) [0, 1] array as an RGB PNG, rounding to nearest."""
    if bitdepth not in (8, 16):
        raise UnsupportedFormatError(f"bit depth {bitdepth} not supported")
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got {img.shape}")
    maxval = 2 ** bitdepth - 1
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval).astype(np.uint16 if bitdepth == 16 else np.uint8)
    h, w, _ = q.shape
    writer = png.Writer(width=w, height=h, greyscale=False, bitdepth=bitdepth)
    with open(path, "wb") as fh:
        writer.write(fh, q.reshape(h, w * 3).tolist())
