"""Segmenter backends: in-process mocks and the external adapter protocol.

A segmenter takes an image plus prompts (foreground clicks and/or one box)
and returns a mask with a confidence score. The mocks are deliberately
simple geometric predictors used for tests and benchmarks; real models hang
off `ExternalSegmenter`, which speaks newline-delimited JSON over the stdin/
stdout of a child process.

Wire protocol (version "1"), one request in flight at a time:

  adapter -> harness, once at startup:
    {"kind": "hello", "version": "1", "model": "<name>"}

  harness -> adapter:
    {"kind": "segment", "id": N, "image_path": "/abs/path.png",
     "points": [[x, y], ...], "labels": [1, ...],
     "box": [x_min, y_min, x_max, y_max] | null, "multimask": true|false}
    {"kind": "saliency", "id": N, "image_path": "/abs/path.png"}

  adapter -> harness:
    {"kind": "result", "id": N, "mask_rle": {"size": [h, w], "counts": [...]},
     "score": 0.87}
    {"kind": "result", "id": N, "saliency": {"size": [h, w], "values": [...]}}
    {"kind": "error", "id": N | null, "message": "..."}

Images may instead travel inline as {"image_b64": "<base64 PNG>"}. Saliency
values are row-major unsigned 16-bit fixed point (0..65535). Request ids
start at 1 and increase; a response whose id does not match the outstanding
request is a protocol error, never silently reassociated.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import os
import queue
import shlex
import subprocess
import tempfile
import threading
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol, Sequence, Union

import numpy as np
from PIL import Image as _PilImage

from .imgcore import (
    BinaryMask,
    Box,
    FOREGROUND,
    Image,
    Point,
    PointPrompt,
    PromptAugError,
    rle_from_json_dict,
    rle_decode,
    to_grayscale,
)
from .saliency import ProviderUnavailable, SaliencyMap, saliency_map_from_fixed_point

PROTOCOL_VERSION = "1"
ADAPTER_ENV_VAR = "PROMPTAUG_ADAPTER"
HANDSHAKE_TIMEOUT = 120.0
REQUEST_TIMEOUT = 60.0


class InvalidPrompt(PromptAugError):
    """The prompt set violates the interface contract."""


class SegmenterUnavailable(PromptAugError):
    """The backend cannot be reached: spawn failure, crash, or timeout."""


class ProtocolError(PromptAugError):
    """The adapter sent something the protocol does not allow."""


class VersionMismatch(ProtocolError):
    """The adapter speaks a different protocol version."""


class AdapterError(PromptAugError):
    """The adapter answered a request with an in-protocol error."""


@dataclass(frozen=True)
class SegmentationResult:
    mask: BinaryMask
    score: float


class Segmenter(Protocol):
    def segment(
        self,
        image: Image,
        points: Sequence[PointPrompt] = (),
        box: Optional[Box] = None,
        multimask: bool = False,
    ) -> SegmentationResult: ...


def _check_prompts(image: Image, points: Sequence[PointPrompt], box: Optional[Box]) -> None:
    if not points and box is None:
        raise InvalidPrompt("need at least one point or a box")
    for pp in points:
        if not image.contains(pp.point):
            raise InvalidPrompt(f"point {pp.point} outside {image.width}x{image.height} image")
    if box is not None and not (box.x_max < image.width and box.y_max < image.height):
        raise InvalidPrompt(f"box {box} outside {image.width}x{image.height} image")


def _check_foreground_only(points: Sequence[PointPrompt]) -> None:
    for pp in points:
        if pp.label != FOREGROUND:
            raise InvalidPrompt("mock segmenters only understand foreground clicks")


class MockRegionGrow:
    """Grows a near-constant-intensity region around every click.

    From each seed, 4-connected BFS joins neighbors whose grayscale value is
    within `tolerance` of that seed's value, truncated at Chebyshev distance
    `radius` from the seed. A box, when present, additionally clips growth.
    """

    def __init__(self, radius: int, tolerance: int = 8):
        if radius < 0 or tolerance < 0:
            raise ValueError("radius and tolerance must be non-negative")
        self.radius = radius
        self.tolerance = tolerance

    def segment(self, image, points=(), box=None, multimask=False) -> SegmentationResult:
        _check_prompts(image, points, box)
        _check_foreground_only(points)
        if not points:
            raise InvalidPrompt("MockRegionGrow needs at least one click")
        gray = to_grayscale(image).pixels.astype(np.int16)
        h, w = gray.shape
        out = np.zeros((h, w), dtype=bool)
        for pp in points:
            sx, sy = pp.point
            seed_val = int(gray[sy, sx])
            seen = np.zeros((h, w), dtype=bool)
            seen[sy, sx] = True
            frontier = deque([(sy, sx)])
            while frontier:
                y, x = frontier.popleft()
                out[y, x] = True
                for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                    if not (0 <= ny < h and 0 <= nx < w) or seen[ny, nx]:
                        continue
                    if max(abs(ny - sy), abs(nx - sx)) > self.radius:
                        continue
                    if abs(int(gray[ny, nx]) - seed_val) > self.tolerance:
                        continue
                    if box is not None and not box.contains(Point(nx, ny)):
                        continue
                    seen[ny, nx] = True
                    frontier.append((ny, nx))
        return SegmentationResult(BinaryMask(out), 1.0)


class MockBoxFill:
    """Predicts exactly the box interior; clicks are ignored."""

    def segment(self, image, points=(), box=None, multimask=False) -> SegmentationResult:
        _check_prompts(image, points, box)
        if box is None:
            raise InvalidPrompt("MockBoxFill needs a box")
        bits = np.zeros((image.height, image.width), dtype=bool)
        bits[box.y_min : box.y_max + 1, box.x_min : box.x_max + 1] = True
        return SegmentationResult(BinaryMask(bits), 1.0)


class MockDiskAroundSeeds:
    """Union of Euclidean disks of fixed radius around the clicks.

    Adding a click can only add pixels, which makes this mock's output
    monotone in the prompt set; benchmarks lean on that property.
    """

    def __init__(self, radius: int):
        if radius < 0:
            raise ValueError("radius must be non-negative")
        self.radius = radius

    def segment(self, image, points=(), box=None, multimask=False) -> SegmentationResult:
        _check_prompts(image, points, box)
        _check_foreground_only(points)
        if not points:
            raise InvalidPrompt("MockDiskAroundSeeds needs at least one click")
        yy, xx = np.mgrid[0 : image.height, 0 : image.width]
        out = np.zeros((image.height, image.width), dtype=bool)
        r2 = self.radius * self.radius
        for pp in points:
            out |= (xx - pp.point.x) ** 2 + (yy - pp.point.y) ** 2 <= r2
        if box is not None:
            keep = np.zeros_like(out)
            keep[box.y_min : box.y_max + 1, box.x_min : box.x_max + 1] = True
            out &= keep
        return SegmentationResult(BinaryMask(out), 1.0)


# ---------------------------------------------------------------------------
# External adapter transport


def encode_line(obj: dict) -> bytes:
    """Canonical wire serialization: compact JSON plus a newline."""
    return json.dumps(obj, separators=(",", ":")).encode("utf-8") + b"\n"


def segment_payload(
    req_id: int,
    image_ref: dict,
    points: Sequence[Point],
    labels: Sequence[int],
    box: Optional[Box],
    multimask: bool,
) -> dict:
    payload = {"kind": "segment", "id": req_id}
    payload.update(image_ref)
    payload["points"] = [[int(p.x), int(p.y)] for p in points]
    payload["labels"] = [int(l) for l in labels]
    payload["box"] = None if box is None else [box.x_min, box.y_min, box.x_max, box.y_max]
    payload["multimask"] = bool(multimask)
    return payload


def saliency_payload(req_id: int, image_ref: dict) -> dict:
    payload = {"kind": "saliency", "id": req_id}
    payload.update(image_ref)
    return payload


class AdapterProcess:
    """A child process speaking the adapter protocol, one request in flight."""

    def __init__(
        self,
        argv: Sequence[str],
        *,
        handshake_timeout: float = HANDSHAKE_TIMEOUT,
        request_timeout: float = REQUEST_TIMEOUT,
        env: Optional[dict] = None,
        stderr=None,
    ):
        self.argv = list(argv)
        self.request_timeout = request_timeout
        self._lock = threading.Lock()
        self._next_id = 1
        self._lines: queue.Queue = queue.Queue()
        try:
            self._proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=stderr,
                env=env,
            )
        except OSError as exc:
            raise SegmenterUnavailable(f"cannot spawn adapter {self.argv!r}: {exc}") from exc
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()
        hello = self._read_message(handshake_timeout)
        if hello.get("kind") != "hello":
            raise ProtocolError(f"expected hello, got {hello!r}")
        if hello.get("version") != PROTOCOL_VERSION:
            raise VersionMismatch(
                f"adapter speaks version {hello.get('version')!r}, need {PROTOCOL_VERSION!r}"
            )
        self.model = str(hello.get("model", ""))

    def _pump(self) -> None:
        assert self._proc.stdout is not None
        for raw in self._proc.stdout:
            self._lines.put(raw)
        self._lines.put(None)  # EOF sentinel

    def _read_message(self, timeout: float) -> dict:
        try:
            raw = self._lines.get(timeout=timeout)
        except queue.Empty:
            self._kill()
            raise SegmenterUnavailable(
                f"adapter {self.argv!r} did not answer within {timeout:.0f}s"
            ) from None
        if raw is None:
            code = self._proc.poll()
            raise SegmenterUnavailable(f"adapter closed its output (exit code {code})")
        try:
            obj = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"adapter sent a non-JSON line: {raw[:200]!r}") from exc
        if not isinstance(obj, dict):
            raise ProtocolError(f"adapter sent a non-object line: {obj!r}")
        return obj

    def _send_bytes(self, data: bytes) -> None:
        assert self._proc.stdin is not None
        try:
            self._proc.stdin.write(data)
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise SegmenterUnavailable(f"adapter pipe closed: {exc}") from exc

    def allocate_id(self) -> int:
        req_id = self._next_id
        self._next_id += 1
        return req_id

    def request(self, payload: dict, timeout: Optional[float] = None) -> dict:
        """Send one request object and return its matching result object."""
        if not self._lock.acquire(blocking=False):
            raise ProtocolError("a request is already in flight")
        try:
            return self._exchange(encode_line(payload), payload.get("id"), timeout)
        finally:
            self._lock.release()

    def exchange_raw(self, line: bytes, timeout: Optional[float] = None) -> dict:
        """Send raw bytes (conformance probes use this) and read one response."""
        if not self._lock.acquire(blocking=False):
            raise ProtocolError("a request is already in flight")
        try:
            return self._exchange(line, expected_id=None, timeout=timeout)
        finally:
            self._lock.release()

    def _exchange(self, line: bytes, expected_id, timeout: Optional[float]) -> dict:
        self._send_bytes(line)
        reply = self._read_message(self.request_timeout if timeout is None else timeout)
        kind = reply.get("kind")
        if kind == "error":
            got = reply.get("id")
            if expected_id is not None and got is not None and got != expected_id:
                raise ProtocolError(f"error for request {got}, expected {expected_id}")
            raise AdapterError(str(reply.get("message", "unspecified adapter error")))
        if kind != "result":
            raise ProtocolError(f"unexpected message kind {kind!r}")
        if expected_id is not None and reply.get("id") != expected_id:
            raise ProtocolError(f"result for request {reply.get('id')!r}, expected {expected_id}")
        return reply

    def _kill(self) -> None:
        if self._proc.poll() is None:
            self._proc.kill()
            self._proc.wait()

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                if self._proc.stdin is not None:
                    self._proc.stdin.close()
                self._proc.wait(timeout=5.0)
            except (OSError, subprocess.TimeoutExpired):
                self._kill()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def spawn_adapter(command: Union[str, Sequence[str]], **kwargs) -> AdapterProcess:
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    if not argv:
        raise SegmenterUnavailable("empty adapter command")
    return AdapterProcess(argv, **kwargs)


def adapter_command_from_env(env_var: str = ADAPTER_ENV_VAR) -> str:
    command = os.environ.get(env_var, "").strip()
    if not command:
        raise SegmenterUnavailable(f"{env_var} is not set")
    return command


class ExternalSegmenter:
    """Segmenter (and saliency provider) backed by an adapter process."""

    def __init__(self, process: AdapterProcess, image_transport: str = "path"):
        if image_transport not in ("path", "inline"):
            raise ValueError(f"unknown image transport {image_transport!r}")
        self.process = process
        self.image_transport = image_transport
        self._tmp = tempfile.TemporaryDirectory(prefix="promptaug-img-")
        self._path_cache: dict[str, str] = {}

    def _png_bytes(self, image: Image) -> bytes:
        buf = io.BytesIO()
        mode = "L" if image.channels == 1 else "RGB"
        _PilImage.fromarray(image.pixels, mode=mode).save(buf, format="PNG")
        return buf.getvalue()

    def _image_ref(self, image: Image, image_path: Optional[Path]) -> dict:
        if image_path is not None:
            return {"image_path": str(image_path)}
        if self.image_transport == "inline":
            return {"image_b64": base64.b64encode(self._png_bytes(image)).decode("ascii")}
        data = self._png_bytes(image)
        key = hashlib.sha256(data).hexdigest()[:16]
        path = self._path_cache.get(key)
        if path is None:
            path = str(Path(self._tmp.name) / f"{key}.png")
            Path(path).write_bytes(data)
            self._path_cache[key] = path
        return {"image_path": path}

    def segment(
        self,
        image: Image,
        points: Sequence[PointPrompt] = (),
        box: Optional[Box] = None,
        multimask: bool = False,
        *,
        image_path: Optional[Path] = None,
    ) -> SegmentationResult:
        _check_prompts(image, points, box)
        payload = segment_payload(
            self.process.allocate_id(),
            self._image_ref(image, image_path),
            [pp.point for pp in points],
            [pp.label for pp in points],
            box,
            multimask,
        )
        reply = self.process.request(payload)
        try:
            rle = rle_from_json_dict(reply["mask_rle"])
            score = float(reply["score"])
        except (KeyError, TypeError, ValueError, PromptAugError) as exc:
            raise ProtocolError(f"malformed segment result: {exc}") from exc
        mask = rle_decode(rle)
        if mask.bits.shape != (image.height, image.width):
            raise ProtocolError(
                f"adapter mask is {mask.height}x{mask.width}, image is "
                f"{image.height}x{image.width}"
            )
        return SegmentationResult(mask, score)

    def saliency(self, image: Image, *, image_path: Optional[Path] = None) -> SaliencyMap:
        payload = saliency_payload(
            self.process.allocate_id(), self._image_ref(image, image_path)
        )
        try:
            reply = self.process.request(payload)
            sal = reply["saliency"]
            result = saliency_map_from_fixed_point(sal["size"], sal["values"])
        except ProviderUnavailable:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ProviderUnavailable(f"malformed saliency result: {exc}") from exc
        except PromptAugError as exc:
            raise ProviderUnavailable(f"saliency request failed: {exc}") from exc
        if result.values.shape != (image.height, image.width):
            raise ProviderUnavailable(
                f"saliency map is {result.values.shape}, image is "
                f"{(image.height, image.width)}"
            )
        return result

    def close(self) -> None:
        self.process.close()
        self._tmp.cleanup()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
