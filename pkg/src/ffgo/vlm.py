"""Prompt templates, a pluggable VLM endpoint client, and an offline mock.

The wire contract is a single JSON POST: {model, prompt, images, want_images}
returning {text, images}. Provider specifics live in adapter profiles; API
keys come from environment variables only.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
import requests

from .errors import (
    CaptionTooLong,
    EmptyCaption,
    EndpointError,
    MissingSlot,
    NoCaptionTag,
    ResolutionViolation,
    UnknownTemplate,
)
from .raster import byte_stream, png_bytes, rgb_from_png_bytes

MAX_CAPTION_CHARS = 2048
DEFAULT_RETRIES = 3
DEFAULT_PARALLELISM = 4

OBJECT_EXTRACTION = "object_extraction"
OBJECT_REMOVAL = "object_removal"
TRAINING_CAPTION = "training_caption"
TEST_PROMPT_ENHANCEMENT = "test_prompt_enhancement"

_CAPTION_EXAMPLES = (
    "1. Film quality, professional quality, rich details. The video begins to show "
    "the surface of a pond, and the camera slowly zooms in to a close-up. The water "
    "surface begins to bubble, and then a blonde woman is seen coming out of the "
    "lotus pond soaked all over, showing the subtle changes in her facial expression.\n"
    "2. A professional male diver performs an elegant diving maneuver from a high "
    "platform. Full-body side view captures him wearing bright red swim trunks in an "
    "upside-down posture with arms fully extended and legs straight and pressed "
    "together. The camera pans downward as he dives into the water below."
)

_FILLER_EXAMPLE = (
    '"The scene unfolds with a whimsical and heartwarming narrative, emphasizing '
    'the simple joys of life through the Teddy Bear\'s endearing actions"'
)

TEMPLATES: dict[str, str] = {
    OBJECT_EXTRACTION: (
        "Given the input image, extract the subset {IDENTIFIED_OBJECTS} (i.e., only "
        "the specified foreground objects)—return them alone with no resizing, "
        "compression, or background so the output resolution exactly matches the "
        "original image."
    ),
    OBJECT_REMOVAL: (
        "Given the input image, remove the subset {IDENTIFIED_OBJECTS} entirely. "
        "Return the edited image only—it must preserve the source resolution (no "
        "scaling or compression) and contain neither the specified objects nor any "
        "artifacts of their removal."
    ),
    TRAINING_CAPTION: (
        "You are given a video and several images.\n"
        "Generate a descriptive caption for the video that prominently features the "
        "components shown in the images.\n"
        "Wrap your final text in <caption>...</caption> tags.\n"
        "The caption must highlight the significance and role of these components "
        "throughout the video, while omitting filler such as " + _FILLER_EXAMPLE + ".\n"
        "\n"
        "Examples of Descriptive Captions\n" + _CAPTION_EXAMPLES
    ),
    TEST_PROMPT_ENHANCEMENT: (
        "You will be given a prompt and several images for video generation.\n"
        "You task is to make the prompt richer in description so the model can "
        "understand better.\n"
        "Enclose your caption within <caption></caption> tags.\n"
        "The caption must emphasize the significance and role of these components "
        "(and some description of each component) throughout the video.\n"
        "Your caption should exclude unnecessary information such as " + _FILLER_EXAMPLE + ".\n"
        "\n"
        "Example of a Descriptive Caption\n" + _CAPTION_EXAMPLES + "\n"
        "\n"
        "Prompt to Optimize\n"
        "{PROMPT_TO_OPTIMIZE}"
    ),
}

REQUIRED_SLOTS: dict[str, tuple[str, ...]] = {
    OBJECT_EXTRACTION: ("IDENTIFIED_OBJECTS",),
    OBJECT_REMOVAL: ("IDENTIFIED_OBJECTS",),
    TRAINING_CAPTION: (),
    TEST_PROMPT_ENHANCEMENT: ("PROMPT_TO_OPTIMIZE",),
}


def build_prompt(template_id: str, slots: dict[str, str] | None = None) -> str:
    """Substitute slot values into a template; all required slots must be non-blank."""
    if template_id not in TEMPLATES:
        raise UnknownTemplate(f"no template named {template_id!r}")
    slots = slots or {}
    body = TEMPLATES[template_id]
    for name in REQUIRED_SLOTS[template_id]:
        value = slots.get(name, "")
        if not value.strip():
            raise MissingSlot(f"template {template_id!r} requires slot {name!r}")
        body = body.replace("{" + name + "}", value)
    return body


@dataclass(frozen=True)
class VlmRequest:
    template_id: str
    prompt: str
    images: tuple[bytes, ...] = ()
    video_ref: str | None = None
    want_images: int = 0


@dataclass(frozen=True)
class VlmResponse:
    text: str
    images: tuple[bytes, ...] = ()


class VlmClient(Protocol):
    def complete(self, request: VlmRequest) -> VlmResponse: ...


@dataclass(frozen=True)
class AdapterProfile:
    """One named endpoint configuration, loaded from JSON."""

    name: str
    base_url: str
    auth_env_var: str
    model_id: str

    @classmethod
    def from_file(cls, path: str | Path, name: str) -> "AdapterProfile":
        profiles = json.loads(Path(path).read_text(encoding="utf-8"))
        if isinstance(profiles, dict) and "adapters" in profiles:
            profiles = profiles["adapters"]
        for entry in profiles if isinstance(profiles, list) else [profiles]:
            if entry.get("name") == name:
                return cls(
                    name=entry["name"],
                    base_url=entry["base_url"],
                    auth_env_var=entry["auth_env_var"],
                    model_id=entry["model_id"],
                )
        raise EndpointError(f"no adapter profile named {name!r} in {path}")


@dataclass
class HttpVlmClient:
    """POSTs the request to an adapter endpoint with retry and backoff."""

    profile: AdapterProfile
    retries: int = DEFAULT_RETRIES
    backoff_base: float = 0.5
    timeout: float = 120.0
    parallelism: int = DEFAULT_PARALLELISM
    _sleep: object = field(default=time.sleep, repr=False)

    def complete(self, request: VlmRequest) -> VlmResponse:
        import base64

        api_key = os.environ.get(self.profile.auth_env_var, "")
        payload = {
            "model": self.profile.model_id,
            "prompt": request.prompt,
            "images": [base64.b64encode(img).decode("ascii") for img in request.images],
            "want_images": request.want_images,
        }
        if request.video_ref:
            payload["video_ref"] = request.video_ref
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}

        last_error: Exception | None = None
        for attempt in range(self.retries):
            try:
                resp = requests.post(
                    self.profile.base_url, json=payload, headers=headers, timeout=self.timeout
                )
                resp.raise_for_status()
                body = resp.json()
                images = tuple(base64.b64decode(i) for i in body.get("images", []))
                return VlmResponse(text=body.get("text", ""), images=images)
            except Exception as exc:  # noqa: BLE001 - every failure is retried alike
                last_error = exc
                if attempt + 1 < self.retries:
                    self._sleep(self.backoff_base * (2**attempt))
        raise EndpointError(
            f"{self.profile.name} failed after {self.retries} attempts: {last_error}"
        ) from last_error


@dataclass(frozen=True)
class MockVlmClient:
    """Offline stand-in: a pure function of (template id, input digests, seed)."""

    seed: int = 0

    def complete(self, request: VlmRequest) -> VlmResponse:
        digest = hashlib.sha256()
        digest.update(request.prompt.encode("utf-8"))
        for img in request.images:
            digest.update(hashlib.sha256(img).digest())
        if request.video_ref:
            digest.update(request.video_ref.encode("utf-8"))
        tag = digest.hexdigest()

        images = []
        if request.want_images:
            if not request.images:
                raise EndpointError("mock needs an input image to size its outputs")
            base = rgb_from_png_bytes(request.images[0])
            h, w = base.shape[:2]
            for i in range(request.want_images):
                noise = byte_stream(h * w * 3, "mock-image", self.seed, tag, i)
                raster = np.frombuffer(noise, dtype=np.uint8).reshape(h, w, 3)
                images.append(png_bytes(raster))

        if request.template_id in (TRAINING_CAPTION, TEST_PROMPT_ENHANCEMENT):
            text = f"<caption>Film quality, rich details. Mock caption {tag[:12]} describing the referenced components and background in motion.</caption>"
        else:
            text = f"mock response {tag[:12]}"
        return VlmResponse(text=text, images=tuple(images))


def parse_caption(text: str) -> str:
    """Extract the first <caption>...</caption> body, whitespace-trimmed."""
    open_tag, close_tag = "<caption>", "</caption>"
    start = text.find(open_tag)
    if start < 0:
        raise NoCaptionTag("response has no <caption> tag")
    end = text.find(close_tag, start + len(open_tag))
    if end < 0:
        raise NoCaptionTag("response has no closing </caption> tag")
    caption = text[start + len(open_tag) : end].strip()
    if not caption:
        raise EmptyCaption("caption tag is empty")
    if len(caption) > MAX_CAPTION_CHARS:
        raise CaptionTooLong(f"caption has {len(caption)} chars, limit {MAX_CAPTION_CHARS}")
    return caption


def _check_resolution(raster: np.ndarray, reference: np.ndarray, what: str) -> None:
    if raster.shape[:2] != reference.shape[:2]:
        raise ResolutionViolation(
            f"{what} is {raster.shape[1]}x{raster.shape[0]}, "
            f"input is {reference.shape[1]}x{reference.shape[0]}"
        )


def extract_elements(
    image: np.ndarray, names: Sequence[str], client: VlmClient
) -> list[np.ndarray]:
    """Ask the VLM for one full-resolution rendition per named element."""
    if not names:
        raise MissingSlot("extract_elements needs at least one element name")
    prompt = build_prompt(OBJECT_EXTRACTION, {"IDENTIFIED_OBJECTS": ", ".join(names)})
    request = VlmRequest(
        template_id=OBJECT_EXTRACTION,
        prompt=prompt,
        images=(png_bytes(image),),
        want_images=len(names),
    )
    response = client.complete(request)
    if len(response.images) != len(names):
        raise EndpointError(
            f"asked for {len(names)} element images, got {len(response.images)}"
        )
    rasters = [rgb_from_png_bytes(data) for data in response.images]
    for name, raster in zip(names, rasters):
        _check_resolution(raster, image, f"element {name!r}")
    return rasters


def remove_objects(image: np.ndarray, names: Sequence[str], client: VlmClient) -> np.ndarray:
    """Ask the VLM for the image with all named objects removed."""
    if not names:
        raise MissingSlot("remove_objects needs at least one element name")
    prompt = build_prompt(OBJECT_REMOVAL, {"IDENTIFIED_OBJECTS": ", ".join(names)})
    request = VlmRequest(
        template_id=OBJECT_REMOVAL,
        prompt=prompt,
        images=(png_bytes(image),),
        want_images=1,
    )
    response = client.complete(request)
    if len(response.images) != 1:
        raise EndpointError(f"asked for one background image, got {len(response.images)}")
    raster = rgb_from_png_bytes(response.images[0])
    _check_resolution(raster, image, "background")
    return raster


def generate_caption(
    assets: Sequence[np.ndarray], video_ref: str | None, client: VlmClient
) -> str:
    """Caption a training sample from its element cut-outs plus background."""
    if not assets:
        raise MissingSlot("generate_caption needs at least one asset image")
    request = VlmRequest(
        template_id=TRAINING_CAPTION,
        prompt=build_prompt(TRAINING_CAPTION),
        images=tuple(png_bytes(a) for a in assets),
        video_ref=video_ref,
    )
    return parse_caption(client.complete(request).text)


def enhance_test_prompt(
    draft: str, images: Sequence[np.ndarray], client: VlmClient
) -> str:
    if not draft.strip():
        raise MissingSlot("draft prompt is empty")
    request = VlmRequest(
        template_id=TEST_PROMPT_ENHANCEMENT,
        prompt=build_prompt(TEST_PROMPT_ENHANCEMENT, {"PROMPT_TO_OPTIMIZE": draft}),
        images=tuple(png_bytes(i) for i in images),
    )
    return parse_caption(client.complete(request).text)


def map_requests(
    client: VlmClient,
    requests_: Sequence[VlmRequest],
    parallelism: int = DEFAULT_PARALLELISM,
) -> list[VlmResponse]:
    """Run requests concurrently, results ordered to match the input."""
    with ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        return list(pool.map(client.complete, requests_))
