"""Visual similarity between block crops.

Two channels: a native windowed structural-similarity score, and a
perceptual distance served by a pluggable provider.  The combined score
is the fixed affine blend 0.15 * ssim + 0.85 * (1 - distance).

Providers:
  Fallback          descriptor cosine distance, no learned weights; a
                    deliberate surrogate whose axioms (self-distance 0,
                    symmetry, monotonicity under noise) are what tests pin
  PrecomputedMatrix lookup by unordered image-id pair from a JSON file
  ExternalService   HTTP call that ships both crops as PNG and reads back
                    {"distance": float}

Crops of unequal dimensions are bilinearly resampled to the smaller
crop's dimensions (smaller by area, then by height, then width; a
symmetric rule) before any pixel comparison.
"""

from __future__ import annotations

import io
import json
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image

from .core import BoundingBox, contains
from .errors import ClientError, ImageDecodeError, MissingEntry, ValidationError

C1 = (0.01 * 255) ** 2
C2 = (0.03 * 255) ** 2

SSIM_WEIGHT = 0.15
PERCEPTUAL_WEIGHT = 0.85

_GRAY = np.array([0.299, 0.587, 0.114])  # BT.601 luma


@dataclass(frozen=True)
class ImageRef:
    source: str
    crop: BoundingBox

    @property
    def image_id(self) -> str:
        c = self.crop
        return f"{self.source}@{c.x},{c.y},{c.w},{c.h}"


def to_array(image) -> np.ndarray:
    """Normalize any accepted image form to HxWx3 uint8 RGB."""
    if isinstance(image, np.ndarray):
        arr = image
    elif isinstance(image, Image.Image):
        arr = np.asarray(image.convert("RGB"))
    elif isinstance(image, (bytes, bytearray)):
        try:
            arr = np.asarray(Image.open(io.BytesIO(image)).convert("RGB"))
        except Exception as exc:
            raise ImageDecodeError(f"undecodable image bytes: {exc}") from exc
    elif isinstance(image, (str, Path)):
        try:
            with Image.open(image) as im:
                arr = np.asarray(im.convert("RGB"))
        except Exception as exc:
            raise ImageDecodeError(f"cannot read image {image}: {exc}") from exc
    else:
        raise ImageDecodeError(f"unsupported image type {type(image)!r}")
    if arr.ndim == 2:
        arr = np.stack([arr] * 3, axis=-1)
    if arr.ndim != 3 or arr.shape[2] < 3:
        raise ImageDecodeError(f"unsupported image shape {arr.shape}")
    if arr.shape[2] > 3:
        arr = arr[:, :, :3]
    if arr.dtype != np.uint8:
        arr = np.clip(arr, 0, 255).astype(np.uint8)
    return np.ascontiguousarray(arr)


def to_gray(arr: np.ndarray) -> np.ndarray:
    return arr.astype(np.float64) @ _GRAY


def _resample(arr: np.ndarray, w: int, h: int) -> np.ndarray:
    if arr.shape[1] == w and arr.shape[0] == h:
        return arr
    im = Image.fromarray(arr).resize((w, h), Image.BILINEAR)
    return np.asarray(im)


def common_size(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Bring both images to the smaller one's dimensions (symmetric rule)."""
    dims = sorted(
        [(a.shape[0] * a.shape[1], a.shape[0], a.shape[1]), (b.shape[0] * b.shape[1], b.shape[0], b.shape[1])]
    )
    _, h, w = dims[0]
    return _resample(a, w, h), _resample(b, w, h)


def _window_means(x: np.ndarray, win: int) -> np.ndarray:
    """Exact means of every fully-contained win x win window."""
    c = np.cumsum(np.cumsum(x, axis=0), axis=1)
    c = np.pad(c, ((1, 0), (1, 0)))
    s = c[win:, win:] - c[:-win, win:] - c[win:, :-win] + c[:-win, :-win]
    return s / (win * win)


def ssim(a, b, window: int = 8) -> float:
    """Mean windowed structural similarity on grayscale, range [-1, 1].

    Window size shrinks to the image if the common crop is under 8px in
    either dimension, so tiny crops still get a well-defined score.
    """
    aa, bb = common_size(to_array(a), to_array(b))
    ga, gb = to_gray(aa), to_gray(bb)
    win = max(1, min(window, ga.shape[0], ga.shape[1]))

    mu_a = _window_means(ga, win)
    mu_b = _window_means(gb, win)
    e_aa = _window_means(ga * ga, win)
    e_bb = _window_means(gb * gb, win)
    e_ab = _window_means(ga * gb, win)
    var_a = np.maximum(e_aa - mu_a * mu_a, 0.0)
    var_b = np.maximum(e_bb - mu_b * mu_b, 0.0)
    cov = e_ab - mu_a * mu_b

    num = (2 * mu_a * mu_b + C1) * (2 * cov + C2)
    den = (mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2)
    return float(np.mean(num / den))


class ProviderKind(str, Enum):
    FALLBACK = "Fallback"
    PRECOMPUTED_MATRIX = "PrecomputedMatrix"
    EXTERNAL_SERVICE = "ExternalService"


def _descriptor(arr: np.ndarray) -> np.ndarray:
    """Multi-scale patch descriptor: 3-level box pyramid, each level
    contributing a 4x4 grid of grayscale patch means plus per-channel means."""
    feats: list[float] = []
    im = Image.fromarray(arr)
    for _ in range(3):
        level = np.asarray(im).astype(np.float64)
        gray = Image.fromarray(np.uint8(np.clip(to_gray(level.astype(np.uint8)), 0, 255)))
        patches = np.asarray(gray.resize((4, 4), Image.BOX), dtype=np.float64)
        feats.extend(patches.flatten().tolist())
        feats.extend(level.reshape(-1, 3).mean(axis=0).tolist())
        im = im.resize((max(1, im.width // 2), max(1, im.height // 2)), Image.BOX)
    return np.array(feats)


class FallbackProvider:
    """Descriptor-cosine surrogate for a learned perceptual metric."""

    kind = ProviderKind.FALLBACK

    def distance(self, a, b, a_id: str | None = None, b_id: str | None = None) -> float:
        aa, bb = common_size(to_array(a), to_array(b))
        da, db = _descriptor(aa), _descriptor(bb)
        na, nb = float(np.linalg.norm(da)), float(np.linalg.norm(db))
        if na == 0.0 or nb == 0.0:
            cos = 1.0 if na == nb else 0.0
        else:
            cos = float(np.dot(da, db) / (na * nb))
        return float(min(1.0, max(0.0, 1.0 - cos)))


class PrecomputedMatrixProvider:
    """Distances read from {"pairs": [{"a", "b", "lpips"}]}; order-free keys."""

    kind = ProviderKind.PRECOMPUTED_MATRIX

    def __init__(self, pairs: dict[tuple[str, str], float]):
        self._pairs = dict(pairs)

    @classmethod
    def from_file(cls, path: str | Path) -> "PrecomputedMatrixProvider":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read distance matrix {path}: {exc}") from exc
        pairs = {}
        for row in data.get("pairs", []):
            try:
                key = tuple(sorted((str(row["a"]), str(row["b"]))))
                pairs[key] = float(row["lpips"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"bad matrix row {row!r}: {exc}") from exc
        return cls(pairs)

    def distance(self, a, b, a_id: str | None = None, b_id: str | None = None) -> float:
        if a_id is None or b_id is None:
            raise ValidationError("matrix provider needs image ids")
        key = tuple(sorted((a_id, b_id)))
        if key not in self._pairs:
            raise MissingEntry(f"no distance entry for pair {key}")
        return self._pairs[key]


class ExternalServiceProvider:
    """POSTs both crops as PNG multipart parts, expects {"distance": float}."""

    kind = ProviderKind.EXTERNAL_SERVICE

    def __init__(self, endpoint: str, timeout: float = 30.0, session=None):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        if session is None:
            import requests

            session = requests.Session()
        self._session = session

    @staticmethod
    def _png_bytes(arr: np.ndarray) -> bytes:
        buf = io.BytesIO()
        Image.fromarray(arr).save(buf, format="PNG")
        return buf.getvalue()

    def distance(self, a, b, a_id: str | None = None, b_id: str | None = None) -> float:
        files = {
            "a": ("a.png", self._png_bytes(to_array(a)), "image/png"),
            "b": ("b.png", self._png_bytes(to_array(b)), "image/png"),
        }
        try:
            resp = self._session.post(self.endpoint + "/distance", files=files, timeout=self.timeout)
        except Exception as exc:
            raise ClientError(f"distance service unreachable: {exc}") from exc
        if getattr(resp, "status_code", 0) != 200:
            raise ClientError(f"distance service returned {resp.status_code}")
        try:
            value = float(resp.json()["distance"])
        except Exception as exc:
            raise ClientError(f"malformed distance reply: {exc}") from exc
        if not (0.0 <= value <= 1.0):
            raise ClientError(f"distance out of range: {value}")
        return value


def perceptual_distance(a, b, provider, a_id: str | None = None, b_id: str | None = None) -> float:
    return provider.distance(a, b, a_id, b_id)


def visual_similarity(a, b, provider, a_id: str | None = None, b_id: str | None = None) -> float:
    """The fixed 0.15/0.85 blend of structural and perceptual channels."""
    s = ssim(a, b)
    d = provider.distance(a, b, a_id, b_id)
    return SSIM_WEIGHT * s + PERCEPTUAL_WEIGHT * (1.0 - d)


class ImageStore:
    """Maps screenshot identifiers to decoded pixels and resolves crops."""

    def __init__(self) -> None:
        self._images: dict[str, np.ndarray] = {}

    def register(self, source_id: str, image) -> None:
        self._images[source_id] = to_array(image)

    def get(self, source_id: str) -> np.ndarray:
        if source_id not in self._images:
            raise ValidationError(f"unknown image source {source_id!r}")
        return self._images[source_id]

    def resolve(self, ref: ImageRef) -> np.ndarray:
        arr = self.get(ref.source)
        h, w = arr.shape[:2]
        c = ref.crop
        if not contains(BoundingBox(0, 0, w, h), c):
            raise ValidationError(f"crop {c.as_tuple()} outside source {ref.source!r} ({w}x{h})")
        return arr[c.y : c.bottom, c.x : c.right]


class VisualScorer:
    """visual_similarity over ImageRefs with an unordered-pair score cache.

    The cache is safe under concurrent insert-or-get; a racing pair may
    compute the same deterministic value twice, but callers always see one
    consistent number.
    """

    def __init__(self, store: ImageStore, provider) -> None:
        self.store = store
        self.provider = provider
        self._cache: dict[tuple[str, str], float] = {}
        self._lock = threading.Lock()

    def similarity(self, a: ImageRef, b: ImageRef) -> float:
        key = tuple(sorted((a.image_id, b.image_id)))
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        value = visual_similarity(
            self.store.resolve(a), self.store.resolve(b), self.provider, a.image_id, b.image_id
        )
        with self._lock:
            return self._cache.setdefault(key, value)
