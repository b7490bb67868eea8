"""Frame sequences on disk and in memory: probe, head crop, clean cut.

On-disk format is a directory of ``frame_%05d.png`` files, zero-based and
contiguous. Muxing to a container is delegated to an external encoder
command template.
"""

from __future__ import annotations

import re
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import CutTooLarge, DimensionMismatch, FfgoError, MissingFrames, TooShort
from .raster import load_rgb, save_png

FRAME_NAME = "frame_{index:05d}.png"
_FRAME_RE = re.compile(r"^frame_(\d{5})\.png$")

DEFAULT_FPS = 16


@dataclass(frozen=True)
class FrameSequence:
    """Ordered RGB frames of uniform size."""

    frames: tuple[np.ndarray, ...]
    width: int
    height: int

    @property
    def frame_count(self) -> int:
        return len(self.frames)

    @classmethod
    def from_frames(cls, frames, copy: bool = True) -> "FrameSequence":
        """Validate and freeze frames; ``copy=False`` adopts caller-owned arrays."""
        frames = tuple(np.asarray(f, dtype=np.uint8) for f in frames)
        if not frames:
            raise FfgoError("a frame sequence needs at least one frame")
        h, w = frames[0].shape[:2]
        for i, f in enumerate(frames):
            if f.ndim != 3 or f.shape[2] != 3:
                raise FfgoError(f"frame {i} is not an RGB raster (shape {f.shape})")
            if f.shape[:2] != (h, w):
                raise DimensionMismatch(
                    f"frame {i} is {f.shape[1]}x{f.shape[0]}, expected {w}x{h}"
                )
        frozen = []
        for f in frames:
            if copy or not f.flags.owndata:
                f = f.copy()
            f.flags.writeable = False
            frozen.append(f)
        return cls(frames=tuple(frozen), width=w, height=h)


@dataclass(frozen=True)
class CutConfig:
    """How many leading frames to discard and how long the training crop is."""

    f_c: int = 4
    target_len: int = 81

    def __post_init__(self):
        if self.f_c < 0:
            raise ValueError(f"f_c must be >= 0, got {self.f_c}")
        if self.f_c >= self.target_len:
            raise ValueError(f"f_c ({self.f_c}) must be < target_len ({self.target_len})")


def _scan_dir(path: Path) -> list[Path]:
    if not path.is_dir():
        raise MissingFrames(f"not a frame directory: {path}")
    indexed: dict[int, Path] = {}
    for entry in path.iterdir():
        m = _FRAME_RE.match(entry.name)
        if m:
            indexed[int(m.group(1))] = entry
    if not indexed:
        raise MissingFrames(f"no frame_%05d.png files in {path}")
    count = max(indexed) + 1
    missing = [i for i in range(count) if i not in indexed]
    if missing:
        raise MissingFrames(f"{path} is missing frame index {missing[0]} (of {count})")
    return [indexed[i] for i in range(count)]


def probe(path: str | Path) -> tuple[int, int, int]:
    """Return (width, height, frame_count) for a frame directory."""
    files = _scan_dir(Path(path))
    with Image.open(files[0]) as img:
        w, h = img.size
    for i, f in enumerate(files[1:], start=1):
        with Image.open(f) as img:
            if img.size != (w, h):
                raise DimensionMismatch(
                    f"frame {i} is {img.size[0]}x{img.size[1]}, expected {w}x{h}"
                )
    return w, h, len(files)


def load_frames(path: str | Path) -> FrameSequence:
    files = _scan_dir(Path(path))
    frames = [load_rgb(f) for f in files]
    return FrameSequence.from_frames(frames)


def write_frames(seq: FrameSequence, path: str | Path, overwrite: bool = False) -> Path:
    """Write a sequence as frame_%05d.png files into ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    stale = [p for p in path.iterdir() if _FRAME_RE.match(p.name)]
    if stale:
        if not overwrite:
            raise FfgoError(f"{path} already contains frame files (use overwrite)")
        for p in stale:
            p.unlink()
    for i, frame in enumerate(seq.frames):
        save_png(path / FRAME_NAME.format(index=i), frame)
    return path


def crop_head(seq: FrameSequence, n: int) -> FrameSequence:
    """Keep only the first ``n`` frames."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if seq.frame_count < n:
        raise TooShort(f"sequence has {seq.frame_count} frames, need {n}")
    if seq.frame_count == n:
        return seq
    return FrameSequence(frames=seq.frames[:n], width=seq.width, height=seq.height)


def clean_cut(seq: FrameSequence, f_c: int) -> FrameSequence:
    """Discard the first ``f_c`` frames, keeping the remainder untouched."""
    if f_c < 0:
        raise ValueError(f"f_c must be >= 0, got {f_c}")
    if f_c >= seq.frame_count:
        raise CutTooLarge(f"cannot cut {f_c} of {seq.frame_count} frames")
    if f_c == 0:
        return seq
    return FrameSequence(frames=seq.frames[f_c:], width=seq.width, height=seq.height)


@dataclass(frozen=True)
class EncoderCommand:
    """External muxer invocation, e.g. an ffmpeg template.

    The template is shell-split once; the tokens {fps}, {input_dir} and
    {output_path} are substituted per argument.
    """

    template: str
    fps: int = DEFAULT_FPS

    def argv(self, input_dir: str | Path, output_path: str | Path) -> list[str]:
        subs = {
            "{fps}": str(self.fps),
            "{input_dir}": str(input_dir),
            "{output_path}": str(output_path),
        }
        argv = []
        for token in shlex.split(self.template):
            for marker, value in subs.items():
                token = token.replace(marker, value)
            argv.append(token)
        return argv

    def run(self, input_dir: str | Path, output_path: str | Path) -> None:
        subprocess.run(self.argv(input_dir, output_path), check=True)
