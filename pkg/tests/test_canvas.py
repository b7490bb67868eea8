from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ffgo import canvas
from ffgo.errors import AllTransparent, EmptyElementList, PlanMismatch, TooManyElements

from .conftest import rgb_raster, rgba_raster
from .reference import ref_render, ref_resize_bilinear


def keyed_layer(w, h, tag="layer", label="thing"):
    raster = rgb_raster(w, h, tag)
    raster[raster >= 250] = 249  # keep every pixel below the key threshold
    return canvas.chroma_key(raster, label=label)


class TestChromaKey:
    def test_pure_white_keyed(self):
        raster = np.full((1, 2, 3), 255, dtype=np.uint8)
        raster[0, 1] = (0, 0, 0)
        layer = canvas.chroma_key(raster, threshold=250)
        assert layer.pixels[0, 0, 3] == 0
        assert layer.pixels[0, 1, 3] == 255

    def test_dark_pixel_kept_rgb_preserved(self):
        raster = np.zeros((1, 1, 3), dtype=np.uint8)
        raster[0, 0] = (10, 20, 30)
        layer = canvas.chroma_key(raster, threshold=250)
        assert tuple(layer.pixels[0, 0]) == (10, 20, 30, 255)

    def test_2x2_against_per_pixel_rule(self):
        raster = np.array(
            [[(255, 255, 255), (250, 250, 251)], [(249, 255, 255), (10, 20, 30)]],
            dtype=np.uint8,
        )
        layer = canvas.chroma_key(raster, threshold=250)
        # independent application of the rule: alpha 0 iff min channel >= 250
        expected = [
            [0 if min(raster[y, x]) >= 250 else 255 for x in range(2)] for y in range(2)
        ]
        assert layer.pixels[..., 3].tolist() == expected

    def test_all_white_raises(self):
        with pytest.raises(AllTransparent):
            canvas.chroma_key(np.full((2, 2, 3), 255, dtype=np.uint8))

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_key_crop_key_fixed_point(self, seed):
        raster = rgb_raster(9, 7, f"fp-{seed}")
        raster[0, 0] = (0, 0, 0)  # guarantee one opaque pixel
        layer = canvas.tight_crop(canvas.chroma_key(raster))
        rekeyed = canvas.chroma_key(layer.pixels[..., :3].copy())
        assert rekeyed.pixels.tobytes() == layer.pixels.tobytes()


class TestTightCrop:
    def test_extent_scan(self):
        pixels = np.zeros((100, 100, 4), dtype=np.uint8)
        pixels[10:20, 30:40] = (5, 6, 7, 255)
        layer = canvas.ElementLayer.from_pixels("block", pixels)
        assert layer.tight_bbox == (30, 10, 10, 10)
        cropped = canvas.tight_crop(layer)
        assert cropped.pixels.shape == (10, 10, 4)
        assert cropped.tight_bbox == (0, 0, 10, 10)

    def test_idempotent(self):
        layer = keyed_layer(16, 12)
        once = canvas.tight_crop(layer)
        assert canvas.tight_crop(once) is once

    def test_fully_opaque_identity(self):
        pixels = rgba_raster(64, 64, "solid")
        pixels[..., 3] = 255
        layer = canvas.ElementLayer.from_pixels("solid", pixels)
        assert canvas.tight_crop(layer) is layer


class TestSolveLayout:
    def test_four_equal_cells(self):
        elements = [keyed_layer(50, 50, f"e{i}") for i in range(4)]
        plan = canvas.solve_layout(elements, (640, 720))
        for i, box in enumerate(plan.element_boxes):
            assert box.y >= i * 180
            assert box.y + box.h <= (i + 1) * 180 + 1e-9

    def test_exact_fit_single_element(self):
        pixels = np.zeros((720, 640, 4), dtype=np.uint8)
        pixels[..., :3] = 60
        pixels[..., 3] = 255
        layer = canvas.ElementLayer.from_pixels("exact", pixels)
        plan = canvas.solve_layout([layer], (100, 100))
        box = plan.element_boxes[0]
        assert (box.x, box.y, box.w, box.h) == (0.0, 0.0, 640.0, 720.0)

    def test_background_aspect_fit(self):
        plan = canvas.solve_layout([keyed_layer(10, 10)], (1920, 1080))
        bg = plan.background_box
        # min(640/1920, 720/1080) = 1/3 -> 640x360 centered at y=180
        assert (bg.w, bg.h) == (640.0, 360.0)
        assert bg.x == 640.0
        assert bg.y == 180.0

    def test_limits(self):
        with pytest.raises(EmptyElementList):
            canvas.solve_layout([], (10, 10))
        with pytest.raises(TooManyElements):
            canvas.solve_layout([keyed_layer(4, 4, f"n{i}") for i in range(9)], (10, 10))

    @given(
        n=st.integers(1, 8),
        seed=st.integers(0, 99_999),
    )
    @settings(max_examples=40, deadline=None)
    def test_plan_invariants(self, n, seed):
        rng = np.random.default_rng(seed)
        elements = [
            keyed_layer(int(rng.integers(1, 120)), int(rng.integers(1, 120)), f"{seed}-{i}")
            for i in range(n)
        ]
        bg = (int(rng.integers(1, 4000)), int(rng.integers(1, 4000)))
        plan = canvas.solve_layout(elements, bg)
        assert_plan_invariants(plan, elements)


def assert_plan_invariants(plan, elements):
    spec = plan.spec
    boxes = plan.element_boxes
    for layer, box in zip(elements, boxes):
        assert box.x >= -1e-9
        assert box.x + box.w <= spec.split + 1e-9
        assert 0 <= box.y and box.y + box.h <= spec.height + 1e-9
        _, _, w0, h0 = layer.tight_bbox
        placed_ratio = box.w / box.h
        src_ratio = w0 / h0
        assert abs(placed_ratio - src_ratio) / src_ratio <= 1e-6
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            a, b = boxes[i], boxes[j]
            overlap_h = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
            assert overlap_h <= 1e-9
    bg = plan.background_box
    assert bg.x >= spec.split - 1e-9
    assert bg.x + bg.w <= spec.width + 1e-9
    assert 0 <= bg.y and bg.y + bg.h <= spec.height + 1e-9


class TestRender:
    def test_transparent_element_leaves_fill(self):
        pixels = np.zeros((10, 10, 4), dtype=np.uint8)
        pixels[0, 0] = (9, 9, 9, 255)  # single opaque pixel so the layer is legal
        layer = canvas.ElementLayer.from_pixels("ghost", pixels)
        plan = canvas.solve_layout([layer], (8, 8))
        out = canvas.render_composite(plan, [layer], np.zeros((8, 8, 3), dtype=np.uint8))
        assert out.shape == (720, 1280, 4)
        # corner of the cell is far from the single opaque pixel: stays white
        assert tuple(out[700, 10]) == (255, 255, 255, 255)

    def test_opaque_element_fills_cell(self):
        pixels = np.full((90, 80, 4), 37, dtype=np.uint8)
        pixels[..., 3] = 255
        layer = canvas.ElementLayer.from_pixels("slab", pixels)
        spec = canvas.CanvasSpec(width=160, height=90)
        plan = canvas.solve_layout([layer], (40, 40), spec)
        out = canvas.render_composite(plan, [layer], np.zeros((40, 40, 3), dtype=np.uint8))
        x, y, w, h = plan.element_boxes[0].pixel_rect()
        region = out[y : y + h, x : x + w]
        assert (region[..., :3] == 37).all()

    def test_outside_boxes_is_fill_exactly(self):
        elements = [keyed_layer(30, 20, f"z{i}") for i in range(3)]
        spec = canvas.CanvasSpec(width=128, height=72)
        plan = canvas.solve_layout(elements, (50, 40), spec)
        out = canvas.render_composite(plan, elements, rgb_raster(50, 40, "bg"))
        mask = np.ones((72, 128), dtype=bool)
        for box in list(plan.element_boxes) + [plan.background_box]:
            x, y, w, h = box.pixel_rect()
            mask[y : y + h, x : x + w] = False
        assert (out[mask][:, :3] == 255).all()
        assert (out[..., 3] == 255).all()

    def test_plan_mismatch(self):
        elements = [keyed_layer(8, 8, "a"), keyed_layer(8, 8, "b")]
        plan = canvas.solve_layout(elements, (10, 10))
        with pytest.raises(PlanMismatch):
            canvas.render_composite(plan, elements[:1], rgb_raster(10, 10))

    def test_matches_reference_compositor(self):
        elements = [keyed_layer(13, 9, "r1"), keyed_layer(7, 21, "r2"), keyed_layer(30, 5, "r3")]
        background = rgb_raster(37, 23, "ref-bg")
        spec = canvas.CanvasSpec(width=128, height=72)
        plan = canvas.solve_layout(
            elements, (background.shape[1], background.shape[0]), spec
        )
        ours = canvas.render_composite(plan, elements, background)
        theirs = ref_render(
            [np.asarray(l.pixels) for l in elements], background, 128, 72
        )
        assert ours.tobytes() == theirs.tobytes()


def test_resize_matches_reference():
    src = rgb_raster(17, 11, "resize")
    from ffgo.raster import resize_bilinear

    for w, h in [(5, 3), (17, 11), (40, 23), (1, 1), (34, 7)]:
        assert resize_bilinear(src, w, h).tobytes() == ref_resize_bilinear(src, w, h).tobytes()


def test_plan_json_roundtrip():
    elements = [keyed_layer(10, 10, "j")]
    plan = canvas.solve_layout(elements, (20, 20))
    payload = json.loads(plan.to_json())
    assert payload["canvas"] == {"width": 1280, "height": 720}
    assert len(payload["element_boxes"]) == 1
    assert payload["background_box"]["x"] >= 640
