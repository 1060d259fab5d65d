"""croprl: aesthetic image cropping as a sequential decision process.

A recurrent actor-critic agent edits a normalized crop window through a
14-action space, rewarded by sign-clipped aesthetics-score changes, trained
with n-step advantage actor-critic.  Pure numpy; gradients are analytic and
finite-difference checked.
"""

from .errors import CheckpointMismatchError, ConfigError, DivergenceError
from .evaluation import (
    EvalReport,
    GRID_PRESETS,
    GridConfig,
    agent_crop,
    boundary_displacement,
    evaluate_dataset,
    iou,
    sliding_window_search,
    topk_max_iou,
)
from .images import ImageFormatError, ImageRaster, from_array, load_image, save_image
from .policy import (
    NetConfig,
    Observation,
    PolicyNetwork,
    PolicyOutput,
    PolicyParams,
    RecurrentState,
    content_box,
    greedy_action,
    load_checkpoint,
    sample_action,
    save_checkpoint,
)
from .rewards import RewardConfig, base_reward, full_reward, termination_reward
from .scoring import (
    AestheticScorer,
    CompositionScorer,
    TargetIoUScorer,
    composition_score,
    score_crop,
    target_iou_score,
)
from .training import (
    HiddenTargetTasks,
    ImageTasks,
    TrainerConfig,
    Transition,
    compute_returns,
    render_target_image,
    sample_target_window,
    segment_loss,
    train,
)
from .window import (
    ACTIONS,
    Action,
    CropWindow,
    EpisodeState,
    apply_action,
    aspect_ratio,
    episode_step,
    full_window,
    to_pixel_rect,
)

__version__ = "0.1.0"
