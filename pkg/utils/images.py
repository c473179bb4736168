"""Reading and writing 8-bit RGB images with Pillow."""
from __future__ import annotations

import pathlib

import numpy as np
from PIL import Image


def quantize_image(image: np.ndarray) -> np.ndarray:
    """Snap an image in [0, 1] to the 8-bit grid it will be stored on."""
    levels = np.round(np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)
    return levels.astype(np.float32) / np.float32(255.0)


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.round(np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def save_image(path: pathlib.Path | str, image: np.ndarray) -> pathlib.Path:
    """Write an H x W x 3 float image; the suffix picks PNG or PPM."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fmt = "PPM" if path.suffix.lower() == ".ppm" else "PNG"
    Image.fromarray(to_uint8(image), mode="RGB").save(path, format=fmt)
    return path


def load_image(path: pathlib.Path | str) -> np.ndarray:
    with Image.open(path) as handle:
        levels = np.asarray(handle.convert("RGB"), dtype=np.uint8)
    return levels.astype(np.float32) / np.float32(255.0)


__all__ = ["load_image", "quantize_image", "save_image", "to_uint8"]
