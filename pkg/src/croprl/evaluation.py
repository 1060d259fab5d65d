"""Cropping-accuracy metrics, baselines and efficiency accounting.

Covers rectangle overlap and boundary-displacement metrics, top-K max
overlap against multi-annotator ground truth, an exhaustive sliding-window
search baseline, greedy agent inference, and the tab-separated report and
annotation file formats.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .images import ImageRaster
from .policy import PolicyNetwork, greedy_action
from .window import (
    CropWindow,
    EpisodeState,
    MAX_EPISODE_STEPS,
    TERMINATION,
    episode_step,
    full_window,
    to_pixel_rect,
)

Rect = tuple[float, float, float, float]


def iou(a, b) -> float:
    """Intersection-over-union of two (left, top, width, height) rectangles."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    if ax == bx and ay == by and aw == bw and ah == bh:
        return 1.0
    ix = min(ax + aw, bx + bw) - max(ax, bx)
    iy = min(ay + ah, by + bh) - max(ay, by)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    # The clamp absorbs roundoff on nearly identical rectangles.
    return min(1.0, inter / (aw * ah + bw * bh - inter))


def boundary_displacement(a, b, image_dims: tuple[int, int]) -> float:
    """Mean absolute offset of the four edge pairs, each normalized by its
    image dimension (horizontal edges by width, vertical edges by height)."""
    width, height = image_dims
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return (
        abs(ax - bx) / width
        + abs((ax + aw) - (bx + bw)) / width
        + abs(ay - by) / height
        + abs((ay + ah) - (by + bh)) / height
    ) / 4.0


def topk_max_iou(candidates: list, ground_truths: list, k: int) -> float:
    """Best overlap between the first k ranked candidates and any annotation."""
    if not candidates or not ground_truths:
        raise ValueError("need at least one candidate and one ground truth")
    return max(iou(c, g) for c in candidates[:k] for g in ground_truths)


@dataclass(frozen=True)
class GridConfig:
    """Sliding-window grid: window scales x aspect ratios x position stride.

    An aspect ratio of None stands for the image's own ratio.  All values are
    normalized fractions of the image.
    """

    scales: tuple[float, ...] = (0.5, 0.6, 0.7, 0.8, 0.9)
    aspect_ratios: tuple[float | None, ...] = (None, 1.0, 4.0 / 3.0, 3.0 / 4.0, 16.0 / 9.0)
    stride: float = 0.1


GRID_PRESETS: dict[str, GridConfig] = {
    "default": GridConfig(),
    "sparse": GridConfig(scales=(0.5, 0.7, 0.9), aspect_ratios=(None, 1.0), stride=0.2),
    "dense": GridConfig(
        scales=(0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0),
        aspect_ratios=(None, 1.0, 4.0 / 3.0, 3.0 / 4.0, 16.0 / 9.0, 2.0, 0.5),
        stride=0.05,
    ),
}


def generate_grid(grid: GridConfig, image_dims: tuple[int, int]) -> list[CropWindow]:
    """Deduplicated candidate windows in deterministic generation order."""
    width, height = image_dims
    image_ratio = width / height
    seen: set[tuple[int, int, int, int]] = set()
    windows: list[CropWindow] = []
    for scale in grid.scales:
        for ratio in grid.aspect_ratios:
            r = image_ratio if ratio is None else ratio
            # Largest window with pixel aspect ratio r, then scaled down.
            if r >= image_ratio:
                w_full, h_full = 1.0, image_ratio / r
            else:
                w_full, h_full = r / image_ratio, 1.0
            w = scale * w_full
            h = scale * h_full
            for x in _positions(1.0 - w, grid.stride):
                for y in _positions(1.0 - h, grid.stride):
                    key = (round(x * 1e6), round(y * 1e6), round(w * 1e6), round(h * 1e6))
                    if key not in seen:
                        seen.add(key)
                        windows.append(CropWindow(x, y, w, h))
    return windows


def _positions(span: float, stride: float) -> list[float]:
    if span <= 0.0:
        return [0.0]
    vals = [i * stride for i in range(int(span / stride + 1e-9) + 1)]
    if span - vals[-1] > 1e-9:
        vals.append(span)
    return vals


def sliding_window_search(
    image: ImageRaster, scorer, grid: GridConfig = GRID_PRESETS["default"]
) -> tuple[list[tuple[CropWindow, float]], int]:
    """Score every grid window; returns the ranked list and exact call count.

    Ranking is by score descending with ties kept in generation order.
    """
    windows = generate_grid(grid, image.dims)
    if not windows:
        raise ValueError("grid produced no candidate windows")
    before = scorer.calls
    scored = [(w, scorer.score_crop(image, w)) for w in windows]
    calls = scorer.calls - before
    order = sorted(range(len(scored)), key=lambda i: (-scored[i][1], i))
    return [scored[i] for i in order], calls


def agent_crop(
    net: PolicyNetwork,
    image: ImageRaster,
    max_steps: int = MAX_EPISODE_STEPS,
    step: float = 0.05,
) -> tuple[CropWindow, int]:
    """Greedy rollout from the full-image window; no scorer involved.

    Returns the final window and the number of actions taken (the stop
    action counts as a step).
    """
    state = EpisodeState(full_window(), image_dims=image.dims)
    rec = net.initial_state()
    obs = net.encode_observation(image, state.window)
    while not state.terminated:
        out = net.forward(rec, obs)
        rec = out.next_state
        action = greedy_action(out.probs)
        state = episode_step(state, action, step=step, max_steps=max_steps)
        if not state.terminated:
            obs = net.encode_observation(image, state.window, cached_global=obs)
    return state.window, state.t


@dataclass
class EvalReport:
    """Per-annotator accuracy averages plus efficiency columns."""

    avg_iou: list[float]
    avg_boundary_displacement: list[float]
    topk_max_iou: dict[int, float] = field(default_factory=dict)
    avg_steps: float = 0.0
    avg_scorer_calls: float = 0.0
    avg_seconds: float = 0.0


def evaluate_dataset(
    crops: list,
    ground_truths: list[list],
    image_dims: list[tuple[int, int]],
    topk: tuple[int, ...] = (1,),
) -> EvalReport:
    """Average metrics over aligned (crop, annotations, dims) triples.

    All pixel rectangles.  Every image must carry the same number of
    annotations; annotator j's column averages crop-vs-annotation-j over all
    images.  Top-K columns treat the single crop as a length-1 candidate
    list against all annotations of an image.
    """
    if not crops:
        raise ValueError("empty dataset")
    if not (len(crops) == len(ground_truths) == len(image_dims)):
        raise ValueError("crops, ground truths and image dims must align")
    n_annotators = len(ground_truths[0])
    if n_annotators == 0 or any(len(g) != n_annotators for g in ground_truths):
        raise ValueError("every image needs the same nonzero number of annotations")
    avg_iou = [
        float(np.mean([iou(c, gts[j]) for c, gts in zip(crops, ground_truths)]))
        for j in range(n_annotators)
    ]
    avg_disp = [
        float(
            np.mean(
                [
                    boundary_displacement(c, gts[j], dims)
                    for c, gts, dims in zip(crops, ground_truths, image_dims)
                ]
            )
        )
        for j in range(n_annotators)
    ]
    topk_avg = {
        k: float(np.mean([topk_max_iou([c], gts, k) for c, gts in zip(crops, ground_truths)]))
        for k in topk
    }
    return EvalReport(avg_iou, avg_disp, topk_avg)


# ----- annotation and report file formats -----


def load_annotations(path: str | os.PathLike) -> list[tuple[str, list[tuple[int, int, int, int]]]]:
    """Parse an annotation file: per line an image path then 4K integers.

    Returns (image path, [K pixel rects]) per record.  Errors name the
    offending line number.
    """
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) < 5 or (len(parts) - 1) % 4 != 0:
                raise ConfigError(
                    f"{path}: line {lineno}: expected image path plus 4K integers"
                )
            try:
                nums = [int(p) for p in parts[1:]]
            except ValueError:
                raise ConfigError(f"{path}: line {lineno}: non-integer coordinate") from None
            rects = [tuple(nums[i : i + 4]) for i in range(0, len(nums), 4)]
            records.append((parts[0], rects))
    if not records:
        raise ConfigError(f"{path}: no annotation records")
    return records


def format_report(report: EvalReport, include_topk: bool = False) -> str:
    """Tab-separated report table with fixed 4-decimal metric columns."""
    headers: list[str] = []
    values: list[str] = []
    n = len(report.avg_iou)
    for j in range(n):
        tag = f"_{j + 1}" if n > 1 else ""
        headers += [f"avg_iou{tag}", f"avg_disp{tag}"]
        values += [f"{report.avg_iou[j]:.4f}", f"{report.avg_boundary_displacement[j]:.4f}"]
    if include_topk:
        for k in sorted(report.topk_max_iou):
            headers.append(f"top{k}_max_iou")
            values.append(f"{report.topk_max_iou[k]:.4f}")
    headers += ["avg_steps", "avg_scorer_calls", "avg_seconds"]
    values += [
        f"{report.avg_steps:.4f}",
        f"{report.avg_scorer_calls:.4f}",
        f"{report.avg_seconds:.4f}",
    ]
    return "\t".join(headers) + "\n" + "\t".join(values) + "\n"


@dataclass
class BenchRow:
    method: str
    avg_steps: float
    avg_scorer_calls: float
    avg_seconds: float


def bench_methods(
    net: PolicyNetwork,
    images: list[ImageRaster],
    scorer_factory,
    presets: dict[str, GridConfig],
    max_steps: int = MAX_EPISODE_STEPS,
) -> list[BenchRow]:
    """Efficiency table: the greedy agent against each sliding-window preset.

    Steps/calls columns are exact and deterministic; the seconds column is
    wall time and varies run to run.
    """
    rows = []
    t0 = time.perf_counter()
    steps = [agent_crop(net, img, max_steps=max_steps)[1] for img in images]
    agent_secs = (time.perf_counter() - t0) / len(images)
    rows.append(BenchRow("agent", float(np.mean(steps)), 0.0, agent_secs))
    for name, grid in presets.items():
        scorer = scorer_factory()
        t0 = time.perf_counter()
        calls = [sliding_window_search(img, scorer, grid)[1] for img in images]
        secs = (time.perf_counter() - t0) / len(images)
        rows.append(BenchRow(f"sliding-{name}", float(np.mean(calls)), float(np.mean(calls)), secs))
    return rows


def format_bench(rows: list[BenchRow]) -> str:
    lines = ["method\tavg_steps\tavg_scorer_calls\tavg_seconds"]
    for r in rows:
        lines.append(
            f"{r.method}\t{r.avg_steps:.4f}\t{r.avg_scorer_calls:.4f}\t{r.avg_seconds:.4f}"
        )
    return "\n".join(lines) + "\n"
