"""Visual similarity: ssim behavior, provider axioms, blending, caching."""

from __future__ import annotations

import io
import threading

import numpy as np
import pytest
from PIL import Image

import comui.visual as visual
from comui.core import BoundingBox
from comui.errors import MissingEntry, ValidationError
from comui.visual import (
    FallbackProvider,
    ImageRef,
    ImageStore,
    PrecomputedMatrixProvider,
    VisualScorer,
    ssim,
    visual_similarity,
)


def checkered(w=64, h=64, seed=1):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)


def gradient(w=64, h=64):
    row = np.linspace(0, 255, w, dtype=np.uint8)
    g = np.tile(row, (h, 1))
    return np.stack([g] * 3, axis=-1)


def test_ssim_identical_is_one():
    img = checkered()
    assert ssim(img, img) == 1.0


def test_ssim_negative_for_photographic_negative():
    img = gradient()
    assert ssim(img, 255 - img) < 0.0


def test_ssim_black_vs_white_near_zero():
    black = np.zeros((32, 32, 3), dtype=np.uint8)
    white = np.full((32, 32, 3), 255, dtype=np.uint8)
    score = ssim(black, white)
    assert 0.0 < score < 0.05


def test_ssim_symmetric():
    a, b = checkered(seed=2), checkered(seed=3)
    assert ssim(a, b) == ssim(b, a)


def test_ssim_resamples_unequal_crops():
    a = checkered(64, 64, seed=4)
    b = checkered(32, 48, seed=5)
    s1, s2 = ssim(a, b), ssim(b, a)
    assert s1 == s2
    assert -1.0 <= s1 <= 1.0


def test_fallback_self_distance_zero_and_symmetry():
    p = FallbackProvider()
    a, b = checkered(seed=6), gradient()
    assert p.distance(a, a) == 0.0
    assert p.distance(a, b) == p.distance(b, a)


def test_fallback_monotone_under_noise():
    p = FallbackProvider()
    base = gradient().astype(np.int32)
    rng = np.random.default_rng(9)
    noise = rng.uniform(-1, 1, size=base.shape)
    dists = []
    for amp in (8, 32, 110):
        noisy = np.clip(base + amp * noise, 0, 255).astype(np.uint8)
        dists.append(p.distance(base.astype(np.uint8), noisy))
    assert dists[0] < dists[1] < dists[2]


def test_fallback_byte_encoding_invariant():
    p = FallbackProvider()
    a = checkered(seed=7)
    buf = io.BytesIO()
    Image.fromarray(a).save(buf, format="PNG")
    decoded = np.asarray(Image.open(io.BytesIO(buf.getvalue())).convert("RGB"))
    assert p.distance(a, decoded) == 0.0


def test_matrix_provider_lookup_and_missing():
    p = PrecomputedMatrixProvider({("a", "b"): 0.37})
    assert p.distance(None, None, "a", "b") == 0.37
    assert p.distance(None, None, "b", "a") == 0.37
    with pytest.raises(MissingEntry):
        p.distance(None, None, "a", "c")


def test_matrix_provider_from_file(tmp_path):
    f = tmp_path / "m.json"
    f.write_text('{"pairs": [{"a": "x", "b": "y", "lpips": 0.25}]}')
    p = PrecomputedMatrixProvider.from_file(f)
    assert p.distance(None, None, "y", "x") == 0.25


class _StubProvider:
    def __init__(self, value):
        self.value = value
        self.calls = 0

    def distance(self, a, b, a_id=None, b_id=None):
        self.calls += 1
        return self.value


def test_visual_similarity_identical_crops():
    img = checkered(seed=8)
    assert visual_similarity(img, img, FallbackProvider()) == 1.0


def test_visual_similarity_blend_arithmetic(monkeypatch):
    monkeypatch.setattr(visual, "ssim", lambda a, b: 0.6)
    got = visual_similarity(None_safe(), None_safe(), _StubProvider(0.3))
    assert got == pytest.approx(0.15 * 0.6 + 0.85 * 0.7)


def None_safe():
    # any decodable image; the monkeypatched ssim ignores it
    return np.zeros((4, 4, 3), dtype=np.uint8)


def test_visual_similarity_worst_perceptual(monkeypatch):
    monkeypatch.setattr(visual, "ssim", lambda a, b: 1.0)
    got = visual_similarity(None_safe(), None_safe(), _StubProvider(1.0))
    assert got == pytest.approx(0.15)


def test_image_store_resolve_and_bounds():
    store = ImageStore()
    store.register("page", checkered(40, 30, seed=10))
    crop = store.resolve(ImageRef("page", BoundingBox(5, 5, 10, 10)))
    assert crop.shape == (10, 10, 3)
    with pytest.raises(ValidationError):
        store.resolve(ImageRef("page", BoundingBox(35, 25, 10, 10)))


def test_scorer_caches_unordered_pairs():
    store = ImageStore()
    store.register("p", checkered(40, 40, seed=11))
    provider = _StubProvider(0.2)
    scorer = VisualScorer(store, provider)
    a = ImageRef("p", BoundingBox(0, 0, 20, 20))
    b = ImageRef("p", BoundingBox(20, 20, 20, 20))
    v1 = scorer.similarity(a, b)
    v2 = scorer.similarity(b, a)
    assert v1 == v2
    assert provider.calls == 1


def test_scorer_thread_safety_smoke():
    store = ImageStore()
    store.register("p", checkered(60, 60, seed=12))
    scorer = VisualScorer(store, FallbackProvider())
    a = ImageRef("p", BoundingBox(0, 0, 30, 30))
    b = ImageRef("p", BoundingBox(30, 30, 30, 30))
    results = []

    def work():
        results.append(scorer.similarity(a, b))

    threads = [threading.Thread(target=work) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(set(results)) == 1
    assert len(scorer._cache) == 1
