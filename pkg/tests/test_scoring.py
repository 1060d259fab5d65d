import numpy as np
import pytest

from croprl.images import from_array
from croprl.scoring import (
    CompositionScorer,
    TargetIoUScorer,
    composition_score,
    score_crop,
    target_iou_score,
)
from croprl.window import CropWindow, full_window


def flat_image(value=0.5, dims=(16, 16)):
    return from_array(np.full((dims[1], dims[0]), value))


def test_target_iou_identity():
    target = CropWindow(0.2, 0.2, 0.5, 0.5)
    scorer = TargetIoUScorer(target)
    assert scorer.score_crop(flat_image(), target) == 1.0


def test_target_iou_disjoint():
    scorer = TargetIoUScorer(CropWindow(0.0, 0.0, 0.2, 0.2))
    assert scorer.score_crop(flat_image(), CropWindow(0.5, 0.5, 0.3, 0.3)) == 0.0


def test_target_iou_partial_overlap():
    # Hand geometry: overlap 0.25 x 1 over union 0.75 x 1.
    scorer = TargetIoUScorer(CropWindow(0.25, 0.0, 0.5, 1.0))
    value = scorer.score_crop(flat_image(), CropWindow(0.0, 0.0, 0.5, 1.0))
    assert value == pytest.approx(1 / 3)


def test_target_iou_symmetry_and_range():
    rng = np.random.default_rng(5)
    img = flat_image()
    for _ in range(200):
        a = CropWindow(*(rng.uniform(0, 0.5, 2)), *(rng.uniform(0.1, 0.5, 2)))
        b = CropWindow(*(rng.uniform(0, 0.5, 2)), *(rng.uniform(0.1, 0.5, 2)))
        ab = target_iou_score(img, a, b)
        ba = target_iou_score(img, b, a)
        assert ab == ba
        assert 0.0 <= ab <= 1.0
        assert (ab == 1.0) == (a == b)


def test_composition_uniform_image_scores_zero():
    scorer = CompositionScorer()
    assert scorer.score_crop(flat_image(0.7), full_window()) == 0.0
    assert scorer.score_crop(flat_image(0.7), CropWindow(0.2, 0.3, 0.4, 0.4)) == 0.0


def bright_square_image():
    """32x32 fixture: all gradient energy sits in a central bright square."""
    px = np.zeros((32, 32))
    px[12:20, 12:20] = 1.0
    return from_array(px)


def test_composition_prefers_window_holding_the_energy():
    # The 24px window contains every gradient pixel; the square sits on its
    # third-lines, so both the content and thirds terms favor it.
    img = bright_square_image()
    window = CropWindow(4 / 32, 4 / 32, 24 / 32, 24 / 32)
    assert composition_score(img, window) > composition_score(img, full_window())


def test_composition_invariant_to_intensity_shift():
    rng = np.random.default_rng(11)
    base = rng.uniform(0, 0.5, (20, 20))
    win = CropWindow(0.1, 0.2, 0.6, 0.5)
    a = composition_score(from_array(base), win)
    b = composition_score(from_array(base + 0.3), win)
    assert a == pytest.approx(b, abs=1e-12)


def test_composition_deterministic():
    img = bright_square_image()
    scorer = CompositionScorer()
    win = CropWindow(0.2, 0.2, 0.5, 0.5)
    assert scorer.score_crop(img, win) == scorer.score_crop(img, win)


def test_composition_weights_configurable():
    img = bright_square_image()
    win = CropWindow(8 / 32, 8 / 32, 16 / 32, 16 / 32)
    content_only = CompositionScorer(content_weight=1.0, thirds_weight=0.0)
    thirds_only = CompositionScorer(content_weight=0.0, thirds_weight=1.0)
    combined = CompositionScorer()._evaluate(img, win)
    assert combined == pytest.approx(
        0.7 * content_only._evaluate(img, win) + 0.3 * thirds_only._evaluate(img, win)
    )


def test_score_crop_counts_calls_exactly():
    scorer = TargetIoUScorer(CropWindow(0.1, 0.1, 0.5, 0.5))
    img = flat_image()
    n = 37
    for _ in range(n):
        score_crop(scorer, img, full_window())
    assert scorer.calls == n
    scorer.reset_calls()
    assert scorer.calls == 0


def test_score_crop_dispatch_and_determinism():
    target = CropWindow(0.2, 0.2, 0.4, 0.4)
    scorer = TargetIoUScorer(target)
    img = flat_image()
    assert score_crop(scorer, img, target) == 1.0
    win = CropWindow(0.0, 0.0, 0.5, 0.5)
    assert score_crop(scorer, img, win) == score_crop(scorer, img, win)


def test_counter_thread_safety():
    import threading

    scorer = TargetIoUScorer(CropWindow(0.1, 0.1, 0.5, 0.5))
    img = flat_image()

    def worker():
        for _ in range(500):
            scorer.score_crop(img, full_window())

    threads = [threading.Thread(target=worker) for _ in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert scorer.calls == 2000
