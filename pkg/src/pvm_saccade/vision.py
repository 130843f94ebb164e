"""Frame ingestion, cropping, overlay output and synthetic test footage.

File formats: a directory of numbered PNG or PPM (P6) frames, or a single
raw container (magic "RGB8", little-endian u32 width/height/count, then
count*h*w*3 bytes of interleaved RGB, row-major, origin top-left). Pixel
values are normalized u8/255 into [0, 1].
"""

from __future__ import annotations

import os
import re
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .errors import ConfigurationError, InputDataError

_RAW_MAGIC = b"RGB8"


@dataclass
class FrameSequence:
    frames: np.ndarray  # [n, h, w, 3] float64 in [0, 1]
    fps: float = 30.0

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, i):
        return self.frames[i]

    @property
    def frame_w(self) -> int:
        return self.frames.shape[2]

    @property
    def frame_h(self) -> int:
        return self.frames.shape[1]


def load_sequence(path: str) -> FrameSequence:
    if os.path.isdir(path):
        return _load_directory(path)
    return _load_raw(path)


def _load_directory(path: str) -> FrameSequence:
    names = sorted(
        n for n in os.listdir(path)
        if n.lower().endswith((".png", ".ppm"))
    )
    if not names:
        raise InputDataError(f"{path}: no .png or .ppm frames found")
    frames = []
    shape = None
    for name in names:
        full = os.path.join(path, name)
        try:
            with Image.open(full) as im:
                arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
        except Exception as e:
            raise InputDataError(f"{full}: unreadable image ({e})") from e
        if shape is None:
            shape = arr.shape
        elif arr.shape != shape:
            raise InputDataError(
                f"{full}: frame size {arr.shape[1]}x{arr.shape[0]} differs from "
                f"{shape[1]}x{shape[0]}"
            )
        frames.append(arr)
    stack = np.stack(frames).astype(np.float64) / 255.0
    return FrameSequence(frames=stack)


def _load_raw(path: str) -> FrameSequence:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as e:
        raise InputDataError(f"{path}: {e}") from e
    if len(data) < 16 or data[:4] != _RAW_MAGIC:
        raise InputDataError(f"{path}: not an RGB8 container")
    w, h, n = struct.unpack_from("<3I", data, 4)
    expect = 16 + n * h * w * 3
    if len(data) != expect:
        raise InputDataError(f"{path}: expected {expect} bytes, got {len(data)}")
    arr = np.frombuffer(data, dtype=np.uint8, offset=16).reshape(n, h, w, 3)
    return FrameSequence(frames=arr.astype(np.float64) / 255.0)


def write_raw(seq: FrameSequence, path: str) -> None:
    n, h, w, _ = seq.frames.shape
    u8 = np.rint(np.clip(seq.frames, 0.0, 1.0) * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(_RAW_MAGIC)
        fh.write(struct.pack("<3I", w, h, n))
        fh.write(u8.tobytes())


def write_png(frame: np.ndarray, path: str) -> None:
    u8 = np.rint(np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(u8, mode="RGB").save(path)


def crop(frame: np.ndarray, x: int, y: int, w: int, h: int) -> np.ndarray:
    fh, fw = frame.shape[0], frame.shape[1]
    if x < 0 or y < 0 or w < 1 or h < 1 or x + w > fw or y + h > fh:
        raise ValueError(f"crop ({x},{y},{w},{h}) outside frame {fw}x{fh}")
    return frame[y:y + h, x:x + w, :].copy()


def draw_view_rect(frame: np.ndarray, x: int, y: int, w: int, h: int,
                   color=(1.0, 0.0, 0.0)) -> np.ndarray:
    """Copy of the frame with the view rectangle outlined (for overlays)."""
    out = frame.copy()
    c = np.asarray(color, dtype=np.float64)
    out[y, x:x + w, :] = c
    out[y + h - 1, x:x + w, :] = c
    out[y:y + h, x, :] = c
    out[y:y + h, x + w - 1, :] = c
    return out


# ---------------------------------------------------------------------------
# synthetic scenarios
# ---------------------------------------------------------------------------

SCENARIOS = ("uniform_gray", "flicker_patch", "moving_texture", "two_frame_alternator")


@dataclass(frozen=True)
class Scenario:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in SCENARIOS:
            raise ConfigurationError(
                f"unknown scenario {self.kind!r}; expected one of {SCENARIOS}"
            )


def parse_scenario(text: str) -> Scenario:
    """Parse 'name' or 'name(key=value, ...)' with int-valued parameters."""
    m = re.fullmatch(r"\s*(\w+)\s*(?:\(([^)]*)\))?\s*", text)
    if not m:
        raise ConfigurationError(f"cannot parse scenario {text!r}")
    kind, args = m.group(1), m.group(2)
    params = {}
    if args:
        for part in args.split(","):
            if not part.strip():
                continue
            try:
                k, v = part.split("=")
                params[k.strip()] = int(v)
            except ValueError as e:
                raise ConfigurationError(f"bad scenario parameter {part!r}") from e
    return Scenario(kind, params)


def synth_video(
    scenario: Scenario,
    seed: int,
    n_frames: int = 100,
    frame_w: int = 64,
    frame_h: int = 64,
) -> FrameSequence:
    """Deterministic synthetic footage for tests and desk-scale experiments."""
    p = scenario.params
    rng = np.random.default_rng([seed, zlib.crc32(scenario.kind.encode())])
    frames = np.full((n_frames, frame_h, frame_w, 3), 0.5, dtype=np.float64)

    if scenario.kind == "uniform_gray":
        pass

    elif scenario.kind == "flicker_patch":
        size = p.get("size", 8)
        x = p.get("x", (frame_w - size) // 2)
        y = p.get("y", (frame_h - size) // 2)
        period = p.get("period", 2)
        if x < 0 or y < 0 or x + size > frame_w or y + size > frame_h:
            raise ConfigurationError("flicker patch outside the frame")
        for f in range(n_frames):
            v = 1.0 if (2 * f // period) % 2 else 0.0
            frames[f, y:y + size, x:x + size, :] = v

    elif scenario.kind == "two_frame_alternator":
        a = rng.uniform(0.0, 1.0, size=(frame_h, frame_w, 3))
        b = rng.uniform(0.0, 1.0, size=(frame_h, frame_w, 3))
        for f in range(n_frames):
            frames[f] = a if f % 2 == 0 else b

    elif scenario.kind == "moving_texture":
        ow = p.get("obj_w", max(8, frame_w // 4))
        oh = p.get("obj_h", max(8, frame_h // 4))
        if ow > frame_w or oh > frame_h:
            raise ConfigurationError("texture object larger than the frame")
        texture_seed = p.get("texture_seed", seed)
        tex_rng = np.random.default_rng([texture_seed, 7])
        texture = tex_rng.uniform(0.0, 1.0, size=(oh, ow, 3))
        frames[:] = 0.42  # flat low-entropy background
        n_way = p.get("n_waypoints", 5)
        way_x = rng.integers(0, frame_w - ow + 1, size=n_way)
        way_y = rng.integers(0, frame_h - oh + 1, size=n_way)
        # linear interpolation through the waypoints across the whole clip
        ts = np.linspace(0, n_way - 1, n_frames)
        xs = np.interp(ts, np.arange(n_way), way_x)
        ys = np.interp(ts, np.arange(n_way), way_y)
        for f in range(n_frames):
            x, y = int(round(xs[f])), int(round(ys[f]))
            frames[f, y:y + oh, x:x + ow, :] = texture

    return FrameSequence(frames=frames)
