"""First-frame composites: element layers tiled left, background right.

The layout solver works in float geometry so placements keep their source
aspect ratio exactly; the renderer snaps each placement to the pixel grid
with round-half-up, making renders bit-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    AllTransparent,
    EmptyElementList,
    PlanMismatch,
    TooManyElements,
)
from .raster import blend_over, resize_bilinear

DEFAULT_CHROMA_THRESHOLD = 250
DEFAULT_MAX_ELEMENTS = 8
WHITE = (255, 255, 255)


@dataclass(frozen=True)
class CanvasSpec:
    """Canvas geometry: elements live in [0, split), background in [split, width)."""

    width: int = 1280
    height: int = 720
    fill_color: tuple[int, int, int] = WHITE

    def __post_init__(self):
        if self.width < 2 or self.width % 2 != 0:
            raise ValueError(f"canvas width must be even and >= 2, got {self.width}")
        if self.height < 1:
            raise ValueError(f"canvas height must be >= 1, got {self.height}")

    @property
    def split(self) -> int:
        return self.width // 2


@dataclass(frozen=True)
class ElementLayer:
    """RGBA cut-out of one tagged entity with a tight alpha bounding box."""

    label: str
    pixels: np.ndarray
    tight_bbox: tuple[int, int, int, int]

    @classmethod
    def from_pixels(cls, label: str, pixels: np.ndarray) -> "ElementLayer":
        pixels = np.asarray(pixels, dtype=np.uint8)
        if pixels.ndim != 3 or pixels.shape[2] != 4:
            raise ValueError(f"element pixels must be RGBA, got shape {pixels.shape}")
        bbox = _alpha_bbox(pixels)
        if bbox is None:
            raise AllTransparent(f"element {label!r} has no opaque pixel")
        pixels = pixels.copy()
        pixels.flags.writeable = False
        return cls(label=label, pixels=pixels, tight_bbox=bbox)

    @property
    def size(self) -> tuple[int, int]:
        return self.pixels.shape[1], self.pixels.shape[0]


def _alpha_bbox(pixels: np.ndarray) -> tuple[int, int, int, int] | None:
    mask = pixels[..., 3] > 0
    if not mask.any():
        return None
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    x, y = int(cols[0]), int(rows[0])
    return x, y, int(cols[-1] - x + 1), int(rows[-1] - y + 1)


def chroma_key(
    raster: np.ndarray,
    threshold: int = DEFAULT_CHROMA_THRESHOLD,
    label: str = "",
) -> ElementLayer:
    """Key out near-white pixels: alpha 0 where all channels >= threshold.

    RGB values are kept everywhere (including keyed pixels), so re-keying a
    keyed layer changes nothing.
    """
    raster = np.asarray(raster, dtype=np.uint8)
    if raster.ndim != 3 or raster.shape[2] != 3:
        raise ValueError(f"chroma_key expects an RGB raster, got shape {raster.shape}")
    keyed = np.all(raster >= threshold, axis=2)
    alpha = np.where(keyed, 0, 255).astype(np.uint8)
    if not (alpha > 0).any():
        raise AllTransparent(f"threshold {threshold} keys out every pixel")
    rgba = np.dstack([raster, alpha])
    return ElementLayer.from_pixels(label, rgba)


def tight_crop(layer: ElementLayer) -> ElementLayer:
    x, y, w, h = layer.tight_bbox
    if (x, y, w, h) == (0, 0, layer.pixels.shape[1], layer.pixels.shape[0]):
        return layer
    return ElementLayer.from_pixels(layer.label, layer.pixels[y : y + h, x : x + w])


@dataclass(frozen=True)
class PlacementBox:
    """Aspect-exact float rectangle plus its snapped pixel rectangle."""

    x: float
    y: float
    w: float
    h: float

    def pixel_rect(self) -> tuple[int, int, int, int]:
        px = int(np.floor(self.x + 0.5))
        py = int(np.floor(self.y + 0.5))
        pw = max(1, int(np.floor(self.w + 0.5)))
        ph = max(1, int(np.floor(self.h + 0.5)))
        return px, py, pw, ph

    def as_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}


@dataclass(frozen=True)
class LayoutPlan:
    element_boxes: tuple[PlacementBox, ...]
    background_box: PlacementBox
    spec: CanvasSpec

    def to_json(self) -> str:
        payload = {
            "canvas": {"width": self.spec.width, "height": self.spec.height},
            "element_boxes": [b.as_dict() for b in self.element_boxes],
            "background_box": self.background_box.as_dict(),
        }
        return json.dumps(payload, indent=2)


def _fit_box(src_w: int, src_h: int, cell_x: float, cell_y: float, cell_w: float, cell_h: float) -> PlacementBox:
    scale = min(cell_w / src_w, cell_h / src_h)
    # clamp away float spill (src * (cell/src) can land one ulp past the cell);
    # the relative aspect distortion is ~1e-16, far inside the 1e-6 budget
    w = min(src_w * scale, cell_w)
    h = min(src_h * scale, cell_h)
    return PlacementBox(x=cell_x + (cell_w - w) / 2.0, y=cell_y + (cell_h - h) / 2.0, w=w, h=h)


def solve_layout(
    elements: Sequence[ElementLayer],
    background_dims: tuple[int, int],
    spec: CanvasSpec = CanvasSpec(),
    max_elements: int = DEFAULT_MAX_ELEMENTS,
) -> LayoutPlan:
    """Place N elements in equal-height cells on the left, background on the right.

    Each source is scaled by the largest aspect-preserving factor that fits
    its cell and centered there.
    """
    n = len(elements)
    if n == 0:
        raise EmptyElementList("need at least one element")
    if n > max_elements:
        raise TooManyElements(f"{n} elements exceeds the limit of {max_elements}")
    bg_w, bg_h = background_dims
    if bg_w < 1 or bg_h < 1:
        raise ValueError(f"background dims must be positive, got {background_dims}")

    cell_h = spec.height // n
    boxes = []
    for i, layer in enumerate(elements):
        x0, y0, w0, h0 = layer.tight_bbox
        boxes.append(_fit_box(w0, h0, 0.0, float(i * cell_h), float(spec.split), float(cell_h)))
    background_box = _fit_box(bg_w, bg_h, float(spec.split), 0.0, float(spec.split), float(spec.height))
    return LayoutPlan(element_boxes=tuple(boxes), background_box=background_box, spec=spec)


def _paste(canvas: np.ndarray, rgba: np.ndarray, box: PlacementBox) -> None:
    x, y, w, h = box.pixel_rect()
    region = canvas[y : y + h, x : x + w]
    if (rgba[..., 3] == 255).all():
        # fully opaque source: blend degenerates to a copy, skip the alpha pass
        region[..., :3] = resize_bilinear(rgba[..., :3], w, h)
        return
    scaled = resize_bilinear(rgba, w, h)
    region[..., :3] = blend_over(region[..., :3], scaled)


def render_composite(
    plan: LayoutPlan,
    elements: Sequence[ElementLayer],
    background: np.ndarray,
) -> np.ndarray:
    """Render the plan to an opaque RGBA canvas.

    Elements are tight-cropped, scaled into their boxes and source-over
    blended in list order after the background.
    """
    if len(plan.element_boxes) != len(elements):
        raise PlanMismatch(
            f"plan has {len(plan.element_boxes)} boxes for {len(elements)} elements"
        )
    spec = plan.spec
    canvas = np.empty((spec.height, spec.width, 4), dtype=np.uint8)
    canvas[..., 0] = spec.fill_color[0]
    canvas[..., 1] = spec.fill_color[1]
    canvas[..., 2] = spec.fill_color[2]
    canvas[..., 3] = 255

    background = np.asarray(background, dtype=np.uint8)
    if background.ndim != 3 or background.shape[2] not in (3, 4):
        raise ValueError(f"background must be RGB or RGBA, got shape {background.shape}")
    if background.shape[2] == 3:
        opaque = np.full(background.shape[:2] + (1,), 255, dtype=np.uint8)
        background = np.concatenate([background, opaque], axis=2)
    _paste(canvas, background, plan.background_box)

    for layer, box in zip(elements, plan.element_boxes):
        x0, y0, w0, h0 = layer.tight_bbox
        _paste(canvas, layer.pixels[y0 : y0 + h0, x0 : x0 + w0], box)
    return canvas
