from __future__ import annotations

import socket

import numpy as np
import pytest

from ffgo.raster import byte_stream


@pytest.fixture
def no_network(monkeypatch):
    """Make any socket connection attempt blow up the test."""

    def guard(*args, **kwargs):
        raise AssertionError("network access attempted in an offline test")

    monkeypatch.setattr(socket.socket, "connect", guard)
    return guard


def rgb_raster(w: int, h: int, tag: str = "rgb") -> np.ndarray:
    """Deterministic pseudo-random RGB raster for fixtures."""
    data = byte_stream(w * h * 3, "fixture", tag, w, h)
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w, 3).copy()


def rgba_raster(w: int, h: int, tag: str = "rgba") -> np.ndarray:
    data = byte_stream(w * h * 4, "fixture", tag, w, h)
    arr = np.frombuffer(data, dtype=np.uint8).reshape(h, w, 4).copy()
    arr[..., 3] = np.where(arr[..., 3] > 64, 255, 0)  # binary alpha, mostly opaque
    if not (arr[..., 3] > 0).any():
        arr[0, 0, 3] = 255
    return arr
