"""Scorers and image ingestion.

Builds a small synthetic photo, writes and re-reads it as binary PGM, then
compares the composition score of several candidate windows: the score
rewards keeping gradient energy inside the crop and placing it near the
crop's third-lines.
"""

import os
import tempfile

import numpy as np

from croprl import (
    CompositionScorer,
    CropWindow,
    TargetIoUScorer,
    from_array,
    full_window,
    load_image,
    save_image,
)


def synthetic_photo():
    """A textured 'subject' on a smooth background, off-center."""
    rng = np.random.default_rng(4)
    px = np.linspace(0.2, 0.4, 96)[None, :] * np.ones((64, 1))
    px[12:40, 18:46] = 0.75 + 0.2 * rng.standard_normal((28, 28)).clip(-1, 1) * 0.5
    return from_array(px.clip(0, 1))


def main():
    img = synthetic_photo()
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "photo.pgm")
        save_image(path, img)
        img = load_image(path)
        print(f"wrote and re-read {path}: {img.width}x{img.height}, {img.channels} channel(s)")

    scorer = CompositionScorer()
    candidates = {
        "full frame": full_window(),
        "subject centered": CropWindow(0.05, 0.05, 0.6, 0.75),
        "subject on thirds": CropWindow(0.0, 0.0, 0.72, 0.9),
        "background only": CropWindow(0.6, 0.6, 0.35, 0.35),
    }
    print("\nComposition scores (higher reads as better composed):")
    for name, window in candidates.items():
        print(f"  {name:<20} {scorer.score_crop(img, window):+.4f}")
    print(f"scorer calls so far: {scorer.calls}")

    print("\nHidden-target oracle (overlap with a known-best window):")
    target = CropWindow(0.2, 0.15, 0.5, 0.6)
    oracle = TargetIoUScorer(target)
    for name, window in candidates.items():
        print(f"  {name:<20} {oracle.score_crop(img, window):.4f}")


if __name__ == "__main__":
    main()
