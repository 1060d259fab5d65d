"""Aesthetics scorers.

A scorer is any deterministic map from (image, crop window) to a real score;
the reward only ever looks at the sign of score differences, so scorers need
a meaningful ordering but no particular calibration or range.

Two concrete scorers ship here: an analytic hidden-target oracle whose
optimum is known exactly (for verifiable training experiments), and a
handcrafted composition scorer over pixel gradients (content retention plus
a rule-of-thirds term).
"""

from __future__ import annotations

import threading

import numpy as np

from .evaluation import iou
from .images import ImageRaster
from .window import CropWindow, to_pixel_rect


class AestheticScorer:
    """Base class: deterministic scoring plus an exact call counter."""

    def __init__(self) -> None:
        self._calls = 0
        self._lock = threading.Lock()

    @property
    def calls(self) -> int:
        return self._calls

    def reset_calls(self) -> None:
        with self._lock:
            self._calls = 0

    def score_crop(self, image: ImageRaster, window: CropWindow) -> float:
        with self._lock:
            self._calls += 1
        return self._evaluate(image, window)

    def _evaluate(self, image: ImageRaster, window: CropWindow) -> float:
        raise NotImplementedError


def score_crop(scorer: AestheticScorer, image: ImageRaster, window: CropWindow) -> float:
    """Score a crop through the configured scorer, counting the call."""
    return scorer.score_crop(image, window)


def target_iou_score(image: ImageRaster, window: CropWindow, target: CropWindow) -> float:
    """Overlap of window with a target rectangle, in [0, 1]."""
    return iou(window, target)


def composition_score(
    image: ImageRaster,
    window: CropWindow,
    content_weight: float = 0.7,
    thirds_weight: float = 0.3,
) -> float:
    """One-off composition score; see CompositionScorer for the definition."""
    return CompositionScorer(content_weight, thirds_weight)._evaluate(image, window)


class TargetIoUScorer(AestheticScorer):
    """Overlap with a hidden target window; the target itself is the optimum."""

    def __init__(self, target: CropWindow):
        super().__init__()
        self.target = target

    def _evaluate(self, image: ImageRaster, window: CropWindow) -> float:
        return iou(window, self.target)


class CompositionScorer(AestheticScorer):
    """Gradient-energy composition score.

    Combines two terms: how much denser the gradient energy is inside the
    crop than outside (salient-content retention), and how much of the
    crop's gradient mass sits near its rule-of-thirds lines.  Both terms
    depend only on intensity differences, so the score is invariant to
    adding a constant to every pixel.
    """

    def __init__(self, content_weight: float = 0.7, thirds_weight: float = 0.3):
        super().__init__()
        self.content_weight = content_weight
        self.thirds_weight = thirds_weight
        self._cache: tuple[int, np.ndarray] | None = None

    def _gradient_magnitude(self, image: ImageRaster) -> np.ndarray:
        cached = self._cache
        if cached is not None and cached[0] == id(image):
            return cached[1]
        g = image.gray()
        gy = np.gradient(g, axis=0) if g.shape[0] > 1 else np.zeros_like(g)
        gx = np.gradient(g, axis=1) if g.shape[1] > 1 else np.zeros_like(g)
        mag = np.hypot(gx, gy)
        self._cache = (id(image), mag)
        return mag

    def _evaluate(self, image: ImageRaster, window: CropWindow) -> float:
        mag = self._gradient_magnitude(image)
        left, top, w, h = to_pixel_rect(window, image.dims)
        inside = mag[top : top + h, left : left + w]
        sum_in = float(inside.sum())
        area_in = inside.size
        area_out = mag.size - area_in
        mean_in = sum_in / area_in
        mean_out = (float(mag.sum()) - sum_in) / area_out if area_out else 0.0
        content = mean_in - mean_out

        total_in = sum_in
        if total_in > 0.0:
            ys = _thirds_proximity((np.arange(h) + 0.5) / h)
            xs = _thirds_proximity((np.arange(w) + 0.5) / w)
            weights = 0.5 * (ys[:, None] + xs[None, :])
            thirds = float((inside * weights).sum()) / total_in
        else:
            thirds = 0.0
        return self.content_weight * content + self.thirds_weight * thirds


def _thirds_proximity(u: np.ndarray) -> np.ndarray:
    """Weight in [0, 1]: 1 on the third-lines, falling to 0 one sixth away."""
    dist = np.minimum(np.abs(u - 1.0 / 3.0), np.abs(u - 2.0 / 3.0))
    return np.clip(1.0 - 6.0 * dist, 0.0, None)
