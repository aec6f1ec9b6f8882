"""A module containing the distortion model and the rasterizer for glyph strips."""

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import ndimage

from glyphweaver.corpus.glyphs import prototype_segments
from glyphweaver.errors import ConfigError, LayoutError

# Independent rng streams derived from one sample seed.
SEQUENCE_STREAM, DISTORTION_STREAM = 0, 1
MARGIN = 1.0


@dataclass(frozen=True)
class DistortionRanges:
    """
    Per-sample distortion ranges. Every draw is uniform: stretch, shear, rotation and
    jitter symmetric around zero, kerning in [kerning_min, kerning_max], noise and blur in [0, max].
    """
    stretch: float = 0.15
    shear: float = 0.15
    rotation_deg: float = 5.0
    thickness: float = 1.6
    thickness_jitter: float = 0.4
    vertical_jitter: float = 2.0
    kerning_min: float = 1.0
    kerning_max: float = 2.0
    noise_max: float = 0.05
    blur_max: float = 0.6

    def __post_init__(self) -> None:
        if min(self.stretch, self.shear, self.rotation_deg, self.thickness_jitter,
               self.vertical_jitter, self.noise_max, self.blur_max) < 0:
            raise ConfigError("distortion ranges must be non-negative")
        if self.stretch >= 1 or self.thickness_jitter >= self.thickness:
            raise ConfigError("stretch must stay below 1 and thickness jitter below the base thickness")
        if not 0 <= self.kerning_min <= self.kerning_max:
            raise ConfigError(f"kerning range [{self.kerning_min}, {self.kerning_max}] is invalid")

    @classmethod
    def none(cls, thickness: float = 1.6, kerning: float = 1.0) -> "DistortionRanges":
        """Zero-width ranges: rendering reduces to the undistorted prototypes."""
        return cls(0.0, 0.0, 0.0, thickness, 0.0, 0.0, kerning, kerning, 0.0, 0.0)

    @property
    def max_stretch_factor(self) -> float:
        return 1.0 + self.stretch


@dataclass(frozen=True)
class GlyphDistortion:
    """Parameters applied to one glyph: scale, shear, rotation (radians), stroke width, vertical offset, gap after."""
    stretch_x: float
    stretch_y: float
    shear: float
    rotation: float
    thickness: float
    offset_y: float
    kerning: float

    @classmethod
    def identity(cls, ranges: DistortionRanges) -> "GlyphDistortion":
        return cls(1.0, 1.0, 0.0, 0.0, ranges.thickness, 0.0, ranges.kerning_min)

    @classmethod
    def draw(cls, ranges: DistortionRanges, rng: np.random.Generator) -> "GlyphDistortion":
        return cls(
            stretch_x=1.0 + rng.uniform(-ranges.stretch, ranges.stretch),
            stretch_y=1.0 + rng.uniform(-ranges.stretch, ranges.stretch),
            shear=rng.uniform(-ranges.shear, ranges.shear),
            rotation=math.radians(rng.uniform(-ranges.rotation_deg, ranges.rotation_deg)),
            thickness=ranges.thickness + rng.uniform(-ranges.thickness_jitter, ranges.thickness_jitter),
            offset_y=rng.uniform(-ranges.vertical_jitter, ranges.vertical_jitter),
            kerning=rng.uniform(ranges.kerning_min, ranges.kerning_max),
        )


@dataclass(frozen=True)
class RenderRecord:
    glyphs: tuple[GlyphDistortion, ...]
    noise_std: float = 0.0
    blur_sigma: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class GlyphGeometry:
    """Glyph box size relative to the image: height fraction of H and width-to-height aspect."""
    image_size: tuple[int, int] = (32, 64)
    height_fraction: float = 0.625
    aspect: float = 0.45

    @property
    def glyph_height(self) -> float:
        return self.image_size[0] * self.height_fraction

    @property
    def glyph_width(self) -> float:
        return self.glyph_height * self.aspect

    def worst_case_width(self, length: int, ranges: DistortionRanges) -> float:
        """Strip width needed by `length` glyphs at maximum stretch and kerning."""
        glyphs = length * self.glyph_width * ranges.max_stretch_factor
        return 2 * MARGIN + glyphs + max(length - 1, 0) * ranges.kerning_max


@dataclass
class GlyphSample:
    """One rendered strip: label, (H, W, 1) image in [0, 1], seed and the applied distortions."""
    label: str
    image: np.ndarray
    seed: int
    distortion: RenderRecord = field(repr=False)

    @property
    def length(self) -> int:
        return len(self.label)


def _segment_coverage(points: np.ndarray, segments: np.ndarray, thickness: float) -> np.ndarray:
    """Antialiased stroke coverage of every pixel center for a set of (S, 2, 2) segments."""
    start = segments[:, 0]
    direction = segments[:, 1] - start
    length_sq = np.maximum((direction * direction).sum(axis=-1), 1e-12)
    rel = points[:, None, :] - start[None]
    t = np.clip((rel * direction[None]).sum(axis=-1) / length_sq, 0.0, 1.0)
    nearest = start[None] + t[..., None] * direction[None]
    distance = np.sqrt(((points[:, None, :] - nearest) ** 2).sum(axis=-1))
    return np.clip(thickness / 2.0 + 0.5 - distance, 0.0, 1.0).max(axis=1)


def _place(segments: np.ndarray, distortion: GlyphDistortion, geometry: GlyphGeometry,
           center_x: float, width: float) -> np.ndarray:
    height = geometry.glyph_height * distortion.stretch_y
    local = segments - 0.5
    xs = local[..., 0] * width
    ys = local[..., 1] * height
    xs = xs + distortion.shear * ys
    cos, sin = math.cos(distortion.rotation), math.sin(distortion.rotation)
    center_y = geometry.image_size[0] / 2.0 + distortion.offset_y
    return np.stack([xs * cos - ys * sin + center_x, xs * sin + ys * cos + center_y], axis=-1)


def rasterize(symbols: Sequence[str], glyphs: Sequence[GlyphDistortion], geometry: GlyphGeometry) -> np.ndarray:
    """
    Lay glyphs out left to right and rasterize their strokes (ink 1 on background 0).

    Args:
        symbols: Glyph classes in reading order
        glyphs: One distortion per glyph
        geometry: Image size and glyph box proportions

    Returns:
        (H, W) float image in [0, 1]
    """
    height, width = geometry.image_size
    widths = [geometry.glyph_width * glyph.stretch_x for glyph in glyphs]
    needed = 2 * MARGIN + sum(widths) + sum(glyph.kerning for glyph in glyphs[:-1])
    if needed > width:
        raise LayoutError(f"{len(symbols)} glyphs need {needed:.1f}px but the image is {width}px wide")
    ys, xs = np.mgrid[0:height, 0:width]
    points = np.stack([xs.ravel() + 0.5, ys.ravel() + 0.5], axis=-1)
    image = np.zeros(height * width)
    left = MARGIN
    for symbol, glyph, glyph_width in zip(symbols, glyphs, widths):
        placed = _place(prototype_segments(symbol), glyph, geometry, left + glyph_width / 2.0, glyph_width)
        image = np.maximum(image, _segment_coverage(points, placed, glyph.thickness))
        left += glyph_width + glyph.kerning
    return image.reshape(height, width)


def rasterize_prototype(symbols: Sequence[str], geometry: GlyphGeometry, ranges: DistortionRanges) -> np.ndarray:
    """Undistorted strip: identity transforms, base thickness and minimum kerning."""
    return rasterize(symbols, [GlyphDistortion.identity(ranges)] * len(symbols), geometry)


def render_sample(symbols: Sequence[str], seed: int, geometry: GlyphGeometry, ranges: DistortionRanges) -> GlyphSample:
    """
    Render a glyph sequence with distortions drawn from the seed's distortion stream.
    (symbols, seed) determines the image bit for bit.
    """
    rng = np.random.default_rng((seed, DISTORTION_STREAM))
    glyphs = tuple(GlyphDistortion.draw(ranges, rng) for _ in symbols)
    noise_std = rng.uniform(0.0, ranges.noise_max)
    blur_sigma = rng.uniform(0.0, ranges.blur_max)
    image = rasterize(symbols, glyphs, geometry)
    if blur_sigma > 0:
        image = ndimage.gaussian_filter(image, blur_sigma, mode="nearest")
    if noise_std > 0:
        image = np.clip(image + rng.normal(0.0, noise_std, size=image.shape), 0.0, 1.0)
    record = RenderRecord(glyphs, noise_std, blur_sigma)
    return GlyphSample("".join(symbols), image[..., None], seed, record)
