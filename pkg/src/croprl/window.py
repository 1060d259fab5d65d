"""Crop-window state machine.

A crop window is an axis-aligned rectangle in normalized coordinates on the
unit square.  An agent edits it through a fixed table of 14 discrete actions
(five shrink variants, four translations, four aspect-ratio edits and a
termination trigger); every geometric action moves edges by a fixed fraction
of the *original* image size, never of the current window.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace
from typing import NamedTuple

DEFAULT_STEP = 0.05
MIN_WINDOW_SIZE = 0.1
MAX_EPISODE_STEPS = 50

SCALING = "scaling"
TRANSLATION = "translation"
ASPECT = "aspect"
TERMINATION = "termination"


class CropWindow(NamedTuple):
    """Normalized crop rectangle: x/y top-left corner, w/h extents, all in [0, 1]."""

    x: float
    y: float
    w: float
    h: float

    def is_valid(self, min_size: float = MIN_WINDOW_SIZE) -> bool:
        return (
            self.x >= 0.0
            and self.y >= 0.0
            and self.x + self.w <= 1.0
            and self.y + self.h <= 1.0
            and self.w >= min_size
            and self.h >= min_size
        )


def full_window() -> CropWindow:
    return CropWindow(0.0, 0.0, 1.0, 1.0)


@dataclass(frozen=True)
class Action:
    """One entry of the action table.

    Edge deltas are multiples of the step size applied to the window's
    left/top/right/bottom edges; the termination action has no deltas.
    """

    id: int
    name: str
    group: str
    dl: float = 0.0
    dt: float = 0.0
    dr: float = 0.0
    db: float = 0.0


# Shrink actions anchor one corner and pull the opposite corner's edges
# inward; the centered variant pulls all four edges in by half a step.
# Aspect-ratio edits grow or shrink one dimension symmetrically about the
# window center.  Every non-termination action changes edge positions by
# one step (or two half-steps) of the original image size.
ACTIONS: tuple[Action, ...] = (
    Action(0, "shrink-anchored-top-left", SCALING, dr=-1.0, db=-1.0),
    Action(1, "shrink-anchored-top-right", SCALING, dl=1.0, db=-1.0),
    Action(2, "shrink-anchored-bottom-left", SCALING, dt=1.0, dr=-1.0),
    Action(3, "shrink-anchored-bottom-right", SCALING, dl=1.0, dt=1.0),
    Action(4, "shrink-centered", SCALING, dl=0.5, dt=0.5, dr=-0.5, db=-0.5),
    Action(5, "move-left", TRANSLATION, dl=-1.0, dr=-1.0),
    Action(6, "move-right", TRANSLATION, dl=1.0, dr=1.0),
    Action(7, "move-up", TRANSLATION, dt=-1.0, db=-1.0),
    Action(8, "move-down", TRANSLATION, dt=1.0, db=1.0),
    Action(9, "widen", ASPECT, dl=-0.5, dr=0.5),
    Action(10, "narrow", ASPECT, dl=0.5, dr=-0.5),
    Action(11, "heighten", ASPECT, dt=-0.5, db=0.5),
    Action(12, "shorten", ASPECT, dt=0.5, db=-0.5),
    Action(13, "stop", TERMINATION),
)

N_ACTIONS = len(ACTIONS)
TERMINATION_ID = 13


def action_table_digest() -> str:
    """SHA-256 over the canonical action table, for checkpoint compatibility checks."""
    text = ";".join(
        f"{a.id}:{a.name}:{a.group}:{a.dl},{a.dt},{a.dr},{a.db}" for a in ACTIONS
    )
    return hashlib.sha256(text.encode("ascii")).hexdigest()


def apply_action(
    window: CropWindow,
    action: Action,
    step: float = DEFAULT_STEP,
    min_size: float = MIN_WINDOW_SIZE,
) -> CropWindow:
    """Apply one geometric action and clamp the result to the unit square.

    Translations keep the window size exactly and slide the position as far
    as the boundary allows.  For the other groups edges are moved and then
    clipped to [0, 1]; if the clipped window would fall below the minimum
    size the action is a no-op and the input window is returned unchanged.
    Raises ValueError for the termination action, which has no geometry.
    """
    if action.group == TERMINATION:
        raise ValueError("termination action has no window transform")
    x, y, w, h = window
    if action.group == TRANSLATION:
        nx = min(max(x + action.dl * step, 0.0), 1.0 - w)
        ny = min(max(y + action.dt * step, 0.0), 1.0 - h)
        return CropWindow(nx, ny, w, h)
    left = max(x + action.dl * step, 0.0)
    top = max(y + action.dt * step, 0.0)
    right = min(x + w + action.dr * step, 1.0)
    bottom = min(y + h + action.db * step, 1.0)
    nw = right - left
    nh = bottom - top
    if nw < min_size or nh < min_size:
        return window
    return CropWindow(left, top, nw, nh)


@dataclass
class EpisodeState:
    """Value-type episode snapshot: current window, step count, stop flag."""

    window: CropWindow
    t: int = 0
    terminated: bool = False
    image_dims: tuple[int, int] = (0, 0)


def episode_step(
    state: EpisodeState,
    action: Action,
    step: float = DEFAULT_STEP,
    max_steps: int = MAX_EPISODE_STEPS,
    min_size: float = MIN_WINDOW_SIZE,
) -> EpisodeState:
    """Advance the episode by one action, returning a new state.

    The termination action freezes the window and stops the episode; any
    other action transforms the window.  The step counter always advances,
    and hitting the step cap forces termination.
    """
    if state.terminated:
        raise ValueError("cannot step a terminated episode")
    if state.t >= max_steps:
        raise ValueError(f"episode exceeded {max_steps} steps")
    t = state.t + 1
    if action.group == TERMINATION:
        return replace(state, t=t, terminated=True)
    window = apply_action(state.window, action, step=step, min_size=min_size)
    return replace(state, window=window, t=t, terminated=t >= max_steps)


def to_pixel_rect(
    window: CropWindow, image_dims: tuple[int, int]
) -> tuple[int, int, int, int]:
    """Convert a normalized window to an integer (left, top, width, height) rect.

    Coordinates round half-up; width/height are at least one pixel and the
    rect is clipped to lie inside the image.
    """
    width_px, height_px = image_dims
    if width_px <= 0 or height_px <= 0:
        raise ValueError(f"image dims must be positive, got {image_dims}")
    left = min(max(_round_half_up(window.x * width_px), 0), width_px - 1)
    top = min(max(_round_half_up(window.y * height_px), 0), height_px - 1)
    w = min(max(1, _round_half_up(window.w * width_px)), width_px - left)
    h = min(max(1, _round_half_up(window.h * height_px)), height_px - top)
    return left, top, w, h


def aspect_ratio(window: CropWindow, image_dims: tuple[int, int]) -> float:
    """Pixel-space width/height ratio of the window on the given image."""
    width_px, height_px = image_dims
    return (window.w * width_px) / (window.h * height_px)


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))
