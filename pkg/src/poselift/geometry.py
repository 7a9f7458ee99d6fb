"""Square-crop coordinate transforms and heatmap decoding.

Image coordinates are (x, y) pixels with the origin at the top-left corner.
A crop transform maps image coordinates into the coordinate frame of a
square crop resized to a fixed network input resolution (224x224 by
default), and back. The crop square is deliberately NOT clamped to the image
bounds so the forward/inverse pair is an exact bijection; points outside the
crop simply map outside [0, out_size).
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

DEFAULT_OUT_SIZE = 224
DEFAULT_MARGIN = 0.15


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned detector box: top-left corner plus width/height, pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise InvalidInputError(f"bounding box needs positive size, got w={self.w} h={self.h}")

    @property
    def center(self):
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)


@dataclass(frozen=True)
class CropTransform:
    """Invertible map between image pixels and resized square-crop pixels.

    Forward: p_crop = (p_img - origin) * out_size / side.
    """

    origin_x: float
    origin_y: float
    side: float
    out_size: int = DEFAULT_OUT_SIZE

    def __post_init__(self):
        if not self.side > 0:
            raise InvalidInputError(f"crop side must be positive, got {self.side}")
        if not self.out_size > 0:
            raise InvalidInputError(f"out_size must be positive, got {self.out_size}")


@dataclass(frozen=True)
class Heatmap:
    """Per-joint activation grids, shape (joint_count, height, width)."""

    values: np.ndarray
    joint_count: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 3:
            raise InvalidInputError(f"heatmap must be (joints, h, w), got shape {values.shape}")
        if values.shape[0] != self.joint_count:
            raise InvalidInputError(
                f"heatmap has {values.shape[0]} grids but joint_count={self.joint_count}"
            )
        if values.shape[1] == 0 or values.shape[2] == 0:
            raise InvalidInputError("heatmap grids must be non-empty")
        if np.any(values < 0):
            raise InvalidInputError("heatmap activations must be non-negative")


def make_square_crop(bbox, margin_frac, image_w, image_h, out_size=DEFAULT_OUT_SIZE):
    """Build the square crop around a detector box.

    The square side is the longest box side scaled by (1 + margin_frac) and
    the square is centered on the box center. image_w/image_h describe the
    source image but are not used for clamping: the square may extend past
    the image so that the transform stays exactly invertible.
    """
    if margin_frac < 0:
        raise InvalidInputError(f"margin_frac must be >= 0, got {margin_frac}")
    if image_w <= 0 or image_h <= 0:
        raise InvalidInputError(f"image size must be positive, got {image_w}x{image_h}")
    if out_size <= 0:
        raise InvalidInputError(f"out_size must be positive, got {out_size}")
    side = max(bbox.w, bbox.h) * (1.0 + margin_frac)
    cx, cy = bbox.center
    return CropTransform(cx - side / 2.0, cy - side / 2.0, side, out_size)


def apply_crop(t, p):
    """Map image-pixel points into crop pixels. p is (2,) or (N, 2)."""
    p = np.asarray(p, dtype=np.float64)
    origin = np.array([t.origin_x, t.origin_y])
    return (p - origin) * (t.out_size / t.side)


def invert_crop(t, p):
    """Exact algebraic inverse of apply_crop."""
    p = np.asarray(p, dtype=np.float64)
    origin = np.array([t.origin_x, t.origin_y])
    return p * (t.side / t.out_size) + origin


def decode_heatmap(hm):
    """Pick the peak activation cell of each joint grid.

    Returns an (joint_count, 2) array of (col, row) coordinates, i.e. (x, y)
    in crop pixels. Ties resolve to the smallest row-major index.
    """
    grids = hm.values
    n_joints, height, width = grids.shape
    coords = np.empty((n_joints, 2), dtype=np.float64)
    flat = grids.reshape(n_joints, height * width)
    idx = np.argmax(flat, axis=1)  # first occurrence wins on ties
    coords[:, 0] = idx % width
    coords[:, 1] = idx // width
    return coords
