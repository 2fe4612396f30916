"""Portable graymap I/O for arrays indexed ``[x, y]``."""

from pathlib import Path

import numpy as np
from PIL import Image


def read_pgm(path) -> np.ndarray:
    """Read an 8-bit grayscale image as floats in [0, 1], indexed ``[x, y]``."""
    with Image.open(path) as im:
        a = np.asarray(im.convert("L"), dtype=np.float64)
    return a.T / 255.0


def write_pgm(path, img: np.ndarray) -> None:
    a = np.asarray(img)
    if a.dtype != np.uint8:
        a = np.clip(np.rint(a), 0, 255).astype(np.uint8)
    Image.fromarray(np.ascontiguousarray(a.T)).save(Path(path), format="PPM")
