"""A module containing binary PGM (P5, maxval 255) image reading and writing on top of Pillow."""

import io
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from glyphweaver.errors import InputError

MAXVAL = 255


def to_bytes(image: np.ndarray) -> np.ndarray:
    """Quantize values in [0, 1] to uint8."""
    return np.clip(np.rint(np.asarray(image, dtype=np.float64) * MAXVAL), 0, MAXVAL).astype(np.uint8)


def _to_image(pixels: np.ndarray) -> Image.Image:
    pixels = np.asarray(pixels)
    if pixels.ndim == 3 and pixels.shape[-1] == 1:
        pixels = pixels[..., 0]
    if pixels.ndim != 2 or pixels.dtype != np.uint8:
        raise InputError(f"PGM needs a 2D uint8 array, got {pixels.dtype} {pixels.shape}")
    return Image.fromarray(np.ascontiguousarray(pixels))


def encode_pgm(pixels: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    _to_image(pixels).save(buffer, format="PPM")
    return buffer.getvalue()


def write_pgm(path: Union[str, Path], pixels: np.ndarray) -> None:
    _to_image(pixels).save(Path(path), format="PPM")


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    """
    Read an 8-bit grayscale PGM.

    A missing file raises the usual OSError; undecodable content raises InputError.

    Returns:
        uint8 array of shape (height, width)
    """
    with Path(path).open("rb") as handle:
        try:
            with Image.open(handle, formats=["PPM"]) as image:
                image.load()
                if image.mode != "L":
                    raise InputError(f"{path}: expected an 8-bit grayscale PGM, got mode {image.mode}")
                return np.array(image, dtype=np.uint8)
        except InputError:
            raise
        except (UnidentifiedImageError, SyntaxError, ValueError, OSError) as exc:
            raise InputError(f"{path}: cannot decode PGM ({exc})") from exc
