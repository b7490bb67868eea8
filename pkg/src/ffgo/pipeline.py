"""Drive a video-generator endpoint with (composite, prefixed prompt).

The mock backend mimics the temporal shape of the real generator: the first
frame echoes the conditioning image, a few buffer frames dissolve away from
it, then a procedural scene plays out. Cutting the buffer frames yields the
clean customized sequence.
"""

from __future__ import annotations

import base64
import hashlib
import io
import zipfile
from dataclasses import dataclass

import numpy as np
import requests

from .errors import EndpointError, FrameCountMismatch, ResolutionMismatch
from .frames import FrameSequence, clean_cut
from .manifest import prefix_transition
from .raster import byte_stream, png_bytes, resize_bilinear, rgb_from_png_bytes, to_uint8

DEFAULT_FRAMES = 81
MOCK_BACKEND = "mock"


@dataclass(frozen=True)
class GeneratorBackend:
    name: str = MOCK_BACKEND
    endpoint: str = MOCK_BACKEND
    f_c: int = 4
    width: int = 1280
    height: int = 720
    timeout: float = 600.0

    def __post_init__(self):
        if self.f_c < 0:
            raise ValueError(f"f_c must be >= 0, got {self.f_c}")

    @property
    def is_mock(self) -> bool:
        return self.endpoint == MOCK_BACKEND


@dataclass(frozen=True)
class GenerationRequest:
    first_frame: np.ndarray
    prompt: str
    frames_requested: int = DEFAULT_FRAMES
    seed: int = 0


def fit_to_resolution(
    raster: np.ndarray,
    width: int,
    height: int,
    fill_color: tuple[int, int, int] = (255, 255, 255),
) -> np.ndarray:
    """Aspect-preserving resize, centered, letterboxed with fill_color."""
    raster = np.asarray(raster, dtype=np.uint8)
    if raster.shape[2] == 4:
        raster = raster[..., :3]
    src_h, src_w = raster.shape[:2]
    if (src_w, src_h) == (width, height):
        return raster.copy()
    scale = min(width / src_w, height / src_h)
    new_w = max(1, int(np.floor(src_w * scale + 0.5)))
    new_h = max(1, int(np.floor(src_h * scale + 0.5)))
    scaled = resize_bilinear(raster, new_w, new_h)
    out = np.empty((height, width, 3), dtype=np.uint8)
    out[..., 0] = fill_color[0]
    out[..., 1] = fill_color[1]
    out[..., 2] = fill_color[2]
    x0 = (width - new_w) // 2
    y0 = (height - new_h) // 2
    out[y0 : y0 + new_h, x0 : x0 + new_w] = scaled
    return out


def prepare_request(
    composite: np.ndarray,
    caption: str,
    backend: GeneratorBackend,
    seed: int,
    frames_requested: int = DEFAULT_FRAMES,
) -> GenerationRequest:
    """Prefix the caption and fit the composite to the backend resolution."""
    if frames_requested <= backend.f_c:
        raise ValueError(
            f"frames_requested ({frames_requested}) must exceed backend f_c ({backend.f_c})"
        )
    prompt = prefix_transition(caption)
    first_frame = fit_to_resolution(composite, backend.width, backend.height)
    return GenerationRequest(
        first_frame=first_frame, prompt=prompt, frames_requested=frames_requested, seed=seed
    )


def _stamp_index(frame: np.ndarray, index: int) -> np.ndarray:
    # a tiny frame counter in the corner guarantees every generated frame
    # differs from the conditioning image and from its neighbours; mutates
    # the (always freshly allocated) input
    frame[0, 0] = (index & 0xFF, (index >> 8) & 0xFF, 0x7F)
    return frame


class _MockScene:
    """Coarse noise field that drifts a few pixels per frame."""

    def __init__(self, width: int, height: int, seed: int, prompt_digest: bytes):
        tile_w = (width + 31) // 32
        tile_h = (height + 31) // 32
        material = hashlib.blake2b(
            prompt_digest + seed.to_bytes(8, "little", signed=True), digest_size=32
        ).digest()
        raw = byte_stream(tile_h * tile_w * 3, "mock-scene", material)
        tile = np.frombuffer(raw, dtype=np.uint8).reshape(tile_h, tile_w, 3)
        ys = np.arange(height) // 32
        xs = np.arange(width) // 32
        self.base = tile[ys][:, xs]
        self.dx = 3 + material[0] % 5
        self.dy = 1 + material[1] % 3

    def frame(self, index: int) -> np.ndarray:
        moved = np.roll(self.base, shift=(index * self.dy, index * self.dx), axis=(0, 1))
        return _stamp_index(moved, index)


def mock_generate(request: GenerationRequest, backend: GeneratorBackend) -> FrameSequence:
    """Deterministic stand-in for the generator endpoint.

    Frame 0 equals the conditioning image byte for byte; frames 1..f_c-1
    dissolve toward the procedural scene; the rest is the scene itself,
    seeded by (seed, prompt digest).
    """
    h, w = request.first_frame.shape[:2]
    if (w, h) != (backend.width, backend.height):
        raise ResolutionMismatch(
            f"request frame is {w}x{h}, backend wants {backend.width}x{backend.height}"
        )
    total = request.frames_requested
    prompt_digest = hashlib.sha256(request.prompt.encode("utf-8")).digest()
    scene = _MockScene(w, h, request.seed, prompt_digest)

    frames = [request.first_frame.copy()]
    first = request.first_frame.astype(np.float64)
    target = scene.frame(0).astype(np.float64)
    for i in range(1, min(backend.f_c, total)):
        t = i / backend.f_c
        frames.append(_stamp_index(to_uint8(first * (1.0 - t) + target * t), i))
    for i in range(len(frames), total):
        frames.append(scene.frame(i))
    return FrameSequence.from_frames(frames, copy=False)


def _decode_zip_frames(blob: bytes) -> list[np.ndarray]:
    frames = []
    with zipfile.ZipFile(io.BytesIO(blob)) as zf:
        for name in sorted(zf.namelist()):
            if name.lower().endswith(".png"):
                frames.append(rgb_from_png_bytes(zf.read(name)))
    return frames


def invoke_generator(request: GenerationRequest, backend: GeneratorBackend) -> FrameSequence:
    """Return exactly the requested number of frames at the backend resolution."""
    if backend.is_mock:
        seq = mock_generate(request, backend)
    else:
        payload = {
            "image": base64.b64encode(png_bytes(request.first_frame)).decode("ascii"),
            "prompt": request.prompt,
            "num_frames": request.frames_requested,
            "seed": request.seed,
        }
        try:
            resp = requests.post(backend.endpoint, json=payload, timeout=backend.timeout)
            resp.raise_for_status()
            frames = _decode_zip_frames(resp.content)
        except (OSError, requests.RequestException, zipfile.BadZipFile) as exc:
            raise EndpointError(f"generator {backend.name} failed: {exc}") from exc
        if not frames:
            raise EndpointError(f"generator {backend.name} returned no frames")
        seq = FrameSequence.from_frames(frames)

    if seq.frame_count != request.frames_requested:
        raise FrameCountMismatch(
            f"requested {request.frames_requested} frames, got {seq.frame_count}"
        )
    if (seq.width, seq.height) != (backend.width, backend.height):
        raise ResolutionMismatch(
            f"frames are {seq.width}x{seq.height}, backend declares "
            f"{backend.width}x{backend.height}"
        )
    return seq


def customize(
    composite: np.ndarray,
    caption: str,
    backend: GeneratorBackend,
    seed: int,
    frames_requested: int = DEFAULT_FRAMES,
    extra_cut: int = 0,
) -> FrameSequence:
    """Full inference path: generate from the composite, then cut the buffer frames."""
    request = prepare_request(composite, caption, backend, seed, frames_requested)
    raw = invoke_generator(request, backend)
    return clean_cut(raw, backend.f_c + extra_cut)
