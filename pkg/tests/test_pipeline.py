from __future__ import annotations

import numpy as np
import pytest

from ffgo import pipeline
from ffgo.errors import AlreadyPrefixed, FrameCountMismatch
from ffgo.manifest import TRANSITION_PREFIX, prefix_transition

from .conftest import rgb_raster

SMALL = pipeline.GeneratorBackend(width=64, height=36, f_c=4)


class TestPrepareRequest:
    def test_no_resize_when_dims_match(self):
        composite = rgb_raster(64, 36, "comp")
        request = pipeline.prepare_request(composite, "Two friends launch a rocket.", SMALL, seed=1)
        assert request.first_frame.tobytes() == composite.tobytes()
        assert request.prompt.startswith(TRANSITION_PREFIX)

    def test_prefix_exact(self):
        request = pipeline.prepare_request(
            rgb_raster(64, 36), "Two friends launch a rocket.", SMALL, seed=0
        )
        assert request.prompt == "ad23r2 the camera view suddenly changes. Two friends launch a rocket."

    def test_already_prefixed_propagates(self):
        with pytest.raises(AlreadyPrefixed):
            pipeline.prepare_request(
                rgb_raster(64, 36), prefix_transition("x"), SMALL, seed=0
            )

    def test_aspect_fit_pad(self):
        # 1344x768 -> 1280x720: scale = min(1280/1344, 720/768) = 0.9375
        composite = rgb_raster(1344 // 16, 768 // 16, "wide")  # 84x48
        backend = pipeline.GeneratorBackend(width=80, height=45)
        request = pipeline.prepare_request(composite, "c", backend, seed=0)
        assert request.first_frame.shape == (45, 80, 3)
        scale = min(80 / 84, 45 / 48)
        new_w = int(np.floor(84 * scale + 0.5))
        new_h = int(np.floor(48 * scale + 0.5))
        assert new_h == 45  # height-limited, padded horizontally
        pad = (80 - new_w) // 2
        column = request.first_frame[:, pad - 1] if pad else None
        if column is not None:
            assert (column == 255).all()  # letterbox stripe is fill color

    def test_rgba_composite_accepted(self):
        rgba = np.dstack([rgb_raster(64, 36, "a"), np.full((36, 64), 255, np.uint8)])
        request = pipeline.prepare_request(rgba, "c", SMALL, seed=0)
        assert request.first_frame.shape == (36, 64, 3)

    def test_frames_must_exceed_fc(self):
        with pytest.raises(ValueError):
            pipeline.prepare_request(rgb_raster(64, 36), "c", SMALL, seed=0, frames_requested=4)


class TestMockGenerator:
    def test_contract(self):
        request = pipeline.prepare_request(rgb_raster(64, 36, "g"), "cap", SMALL, seed=5)
        seq = pipeline.invoke_generator(request, SMALL)
        assert seq.frame_count == 81
        assert (seq.width, seq.height) == (64, 36)
        assert seq.frames[0].tobytes() == request.first_frame.tobytes()
        for i in range(1, 81):
            assert seq.frames[i].tobytes() != request.first_frame.tobytes()

    def test_determinism(self):
        request = pipeline.prepare_request(rgb_raster(64, 36, "d"), "same cap", SMALL, seed=9)
        a = pipeline.invoke_generator(request, SMALL)
        b = pipeline.invoke_generator(request, SMALL)
        assert [f.tobytes() for f in a.frames] == [f.tobytes() for f in b.frames]

    def test_seed_and_prompt_change_output(self):
        composite = rgb_raster(64, 36, "v")
        r1 = pipeline.prepare_request(composite, "cap one", SMALL, seed=1)
        r2 = pipeline.prepare_request(composite, "cap one", SMALL, seed=2)
        r3 = pipeline.prepare_request(composite, "cap two", SMALL, seed=1)
        s1 = pipeline.invoke_generator(r1, SMALL)
        s2 = pipeline.invoke_generator(r2, SMALL)
        s3 = pipeline.invoke_generator(r3, SMALL)
        assert s1.frames[40].tobytes() != s2.frames[40].tobytes()
        assert s1.frames[40].tobytes() != s3.frames[40].tobytes()

    def test_runs_offline(self, no_network):
        request = pipeline.prepare_request(rgb_raster(16, 10, "off"), "c",
                                           pipeline.GeneratorBackend(width=16, height=10), seed=0)
        seq = pipeline.invoke_generator(request, pipeline.GeneratorBackend(width=16, height=10))
        assert seq.frame_count == 81


class FakeHttpBackend:
    """invoke_generator against a scripted HTTP layer."""


def test_http_frame_count_mismatch(monkeypatch):
    import io
    import zipfile

    from ffgo.raster import png_bytes

    backend = pipeline.GeneratorBackend(name="remote", endpoint="http://unit.test/gen",
                                        width=8, height=6, f_c=2)

    blob = io.BytesIO()
    with zipfile.ZipFile(blob, "w") as zf:
        for i in range(3):  # fewer than requested
            zf.writestr(f"frame_{i:05d}.png", png_bytes(rgb_raster(8, 6, f"f{i}")))

    class Resp:
        content = blob.getvalue()

        def raise_for_status(self):
            pass

    monkeypatch.setattr(pipeline.requests, "post", lambda *a, **k: Resp())
    request = pipeline.prepare_request(rgb_raster(8, 6), "c", backend, seed=0, frames_requested=5)
    with pytest.raises(FrameCountMismatch):
        pipeline.invoke_generator(request, backend)


class TestCustomize:
    def test_81_minus_4(self):
        out = pipeline.customize(rgb_raster(64, 36, "c1"), "a caption", SMALL, seed=3)
        assert out.frame_count == 77

    def test_no_frame_equals_composite(self):
        composite = rgb_raster(64, 36, "c2")
        out = pipeline.customize(composite, "a caption", SMALL, seed=3)
        for frame in out.frames:
            assert frame.tobytes() != composite.tobytes()

    def test_zero_cut_keeps_everything(self):
        backend = pipeline.GeneratorBackend(width=32, height=18, f_c=0)
        out = pipeline.customize(rgb_raster(32, 18, "c3"), "cap", backend, seed=1)
        assert out.frame_count == 81

    def test_equals_uncut_slice(self):
        composite = rgb_raster(64, 36, "c4")
        request = pipeline.prepare_request(composite, "slice cap", SMALL, seed=8)
        raw = pipeline.invoke_generator(request, SMALL)
        cut = pipeline.customize(composite, "slice cap", SMALL, seed=8)
        expected = [raw.frames[i] for i in range(4, 81)]  # independent slicing
        assert [f.tobytes() for f in cut.frames] == [f.tobytes() for f in expected]

    def test_extra_cut(self):
        out = pipeline.customize(rgb_raster(64, 36, "c5"), "cap", SMALL, seed=1, extra_cut=3)
        assert out.frame_count == 74
