"""Batched advantage actor-critic training.

A fixed number of episode streams advance in lockstep; every few ticks (the
update period) each stream's buffered transitions are cut into segments at
episode boundaries, n-step discounted returns are computed with a value
bootstrap at non-terminal cuts, and the summed per-segment gradients are
applied in a single root-mean-square-propagation update.  Everything is
seeded and sequential, so two runs with the same inputs produce
byte-identical parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError
from .images import ImageRaster, from_array
from .policy import (
    EpisodeTape,
    NetConfig,
    Observation,
    PolicyNetwork,
    PolicyParams,
    RecurrentState,
    TapeStep,
    entropy,
    init_params,
    sample_action,
)
from .rewards import RewardConfig, full_reward
from .scoring import AestheticScorer, TargetIoUScorer
from .window import (
    CropWindow,
    EpisodeState,
    TERMINATION,
    aspect_ratio,
    episode_step,
    full_window,
    to_pixel_rect,
)


@dataclass(frozen=True)
class TrainerConfig:
    """Optimization hyperparameters and run budget."""

    gamma: float = 0.99
    beta: float = 0.05
    update_period: int = 10
    max_episode_steps: int = 50
    learning_rate: float = 0.0005
    batch_size: int = 32
    rms_decay: float = 0.99
    rms_epsilon: float = 1e-8
    seed: int = 0
    total_steps: int = 20_000
    grad_clip: float | None = 40.0
    step_size: float = 0.05
    log_interval: int = 1000

    def __post_init__(self) -> None:
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.beta < 0.0:
            raise ValueError("beta must be >= 0")
        if not 1 <= self.update_period <= self.max_episode_steps:
            raise ValueError("need 1 <= update_period <= max_episode_steps")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")


@dataclass
class Transition:
    """One rollout step as consumed by the gradient computation."""

    obs: Observation
    state: RecurrentState
    action_id: int
    reward: float
    value_estimate: float
    probs: np.ndarray


def compute_returns(
    rewards: list[float], terminal: bool, bootstrap_value: float, gamma: float
) -> list[float]:
    """Discounted returns by backward recursion, index-aligned with rewards.

    The recursion seeds from 0 after a terminal cut and from the critic's
    bootstrap value when the segment was cut mid-episode.
    """
    if not rewards:
        raise ValueError("rewards must be nonempty")
    acc = 0.0 if terminal else float(bootstrap_value)
    out = [0.0] * len(rewards)
    for i in range(len(rewards) - 1, -1, -1):
        acc = rewards[i] + gamma * acc
        out[i] = acc
    return out


def segment_loss(
    net: PolicyNetwork,
    transitions: list[Transition],
    returns: list[float],
    beta: float,
) -> tuple[float, dict[str, np.ndarray]]:
    """Actor-critic loss of a segment and its exact gradients.

    Per step the loss is -log pi(action) * advantage - beta * entropy plus
    half the squared return-minus-value error; the advantage is frozen from
    the rollout's value estimates.
    """
    if len(transitions) != len(returns):
        raise ValueError("transitions and returns must align")
    first = transitions[0]
    tape = EpisodeTape(
        raw_global=first.obs.raw_global,
        initial_state=first.state,
        steps=[
            TapeStep(tr.obs.raw_local, tr.action_id, ret, tr.value_estimate)
            for tr, ret in zip(transitions, returns)
        ],
    )
    return net.backward(tape, beta)


class RmsProp:
    """Per-parameter squared-gradient cache with the standard update rule."""

    def __init__(self, params: PolicyParams, decay: float = 0.99, epsilon: float = 1e-8):
        self.decay = decay
        self.epsilon = epsilon
        self.cache = params.zeros_like()

    def update(self, params: PolicyParams, grads: dict[str, np.ndarray], lr: float) -> None:
        for name in PolicyParams.FIELDS:
            g = grads[name]
            c = self.cache[name]
            c *= self.decay
            c += (1.0 - self.decay) * g * g
            getattr(params, name)[...] -= lr * g / (np.sqrt(c) + self.epsilon)


def rms_update(
    params: PolicyParams,
    grads: dict[str, np.ndarray],
    optimizer: RmsProp,
    learning_rate: float,
) -> PolicyParams:
    optimizer.update(params, grads, learning_rate)
    return params


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float | None) -> float:
    """Scale gradients to the global-norm bound; returns the pre-clip norm."""
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if max_norm is not None and max_norm > 0 and total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


# ----- episode sources -----


def sample_target_window(
    rng: np.random.Generator,
    size_range: tuple[float, float] = (0.3, 0.8),
    ar_bounds: tuple[float, float] = (0.5, 2.0),
    image_dims: tuple[int, int] = (48, 48),
) -> CropWindow:
    """Uniform valid window with side fractions in size_range and an
    in-range pixel aspect ratio (rejection sampled)."""
    lo, hi = size_range
    while True:
        w = rng.uniform(lo, hi)
        h = rng.uniform(lo, hi)
        window = CropWindow(0.0, 0.0, w, h)
        ar = aspect_ratio(window, image_dims)
        if ar_bounds[0] <= ar <= ar_bounds[1]:
            x = rng.uniform(0.0, 1.0 - w)
            y = rng.uniform(0.0, 1.0 - h)
            return CropWindow(x, y, w, h)


def render_target_image(target: CropWindow, dims: tuple[int, int] = (48, 48)) -> ImageRaster:
    """Synthetic episode image: a bright rectangle over a dark background.

    The bright region is the target window, so the image's content box (what
    the coordinate encoder observes globally) reveals the crop the scorer
    rewards.
    """
    width, height = dims
    pixels = np.full((height, width), 0.1)
    left, top, w, h = to_pixel_rect(target, dims)
    pixels[top : top + h, left : left + w] = 0.9
    return from_array(pixels)


class HiddenTargetTasks:
    """Per-episode synthetic task: fresh target, rendered image, oracle scorer."""

    def __init__(
        self,
        image_dims: tuple[int, int] = (48, 48),
        size_range: tuple[float, float] = (0.3, 0.8),
        ar_bounds: tuple[float, float] = (0.5, 2.0),
    ):
        self.image_dims = image_dims
        self.size_range = size_range
        self.ar_bounds = ar_bounds

    def sample(self, rng: np.random.Generator) -> tuple[ImageRaster, AestheticScorer]:
        target = sample_target_window(rng, self.size_range, self.ar_bounds, self.image_dims)
        return render_target_image(target, self.image_dims), TargetIoUScorer(target)


class ImageTasks:
    """Uniform-with-replacement draws from a fixed image list, shared scorer."""

    def __init__(self, images: list[ImageRaster], scorer: AestheticScorer):
        if not images:
            raise ValueError("image source is empty")
        self.images = images
        self.scorer = scorer

    def sample(self, rng: np.random.Generator) -> tuple[ImageRaster, AestheticScorer]:
        return self.images[int(rng.integers(len(self.images)))], self.scorer


# ----- the training loop -----


@dataclass
class LogRecord:
    step: int
    mean_reward: float
    mean_length: float
    mean_final_score: float
    entropy: float

    def line(self) -> str:
        return (
            f"{self.step}\t{self.mean_reward:.6f}\t{self.mean_length:.4f}"
            f"\t{self.mean_final_score:.6f}\t{self.entropy:.6f}"
        )


@dataclass
class _Segment:
    transitions: list[Transition]
    terminal: bool
    bootstrap: float


class _Stream:
    """One lockstep episode stream with its segment buffer."""

    def __init__(self, net, tasks, trainer: TrainerConfig, reward: RewardConfig, task_rng):
        self.net = net
        self.tasks = tasks
        self.trainer = trainer
        self.reward = reward
        self.task_rng = task_rng
        self.pending: list[Transition] = []
        self.closed: list[_Segment] = []
        self.finished_episodes: list[tuple[float, int, float]] = []
        self._reset_episode()

    def _reset_episode(self) -> None:
        self.image, self.scorer = self.tasks.sample(self.task_rng)
        self.episode = EpisodeState(full_window(), image_dims=self.image.dims)
        self.rec = self.net.initial_state()
        self.obs = self.net.encode_observation(self.image, self.episode.window)
        self.prev_score = self.scorer.score_crop(self.image, self.episode.window)
        self.episode_reward = 0.0

    def step_once(self, action_rng) -> float:
        """Advance one environment step; returns the policy entropy."""
        out = self.net.forward(self.rec, self.obs)
        action = sample_action(out.probs, action_rng)
        prev_state = self.rec
        prev_obs = self.obs
        self.rec = out.next_state
        self.episode = episode_step(
            self.episode,
            action,
            step=self.trainer.step_size,
            max_steps=self.trainer.max_episode_steps,
        )
        t = self.episode.t - 1
        if action.group == TERMINATION:
            new_score = self.prev_score
        else:
            new_score = self.scorer.score_crop(self.image, self.episode.window)
        reward = full_reward(
            self.prev_score,
            new_score,
            t,
            aspect_ratio(self.episode.window, self.image.dims),
            self.reward,
        )
        self.prev_score = new_score
        self.episode_reward += reward
        self.pending.append(
            Transition(prev_obs, prev_state, action.id, reward, out.value, out.probs)
        )
        if self.episode.terminated:
            stopped = action.group == TERMINATION
            if not stopped:
                # Step-cap cut: bootstrap from the critic at the final state.
                self.obs = self.net.encode_observation(
                    self.image, self.episode.window, cached_global=self.obs
                )
                bootstrap = self.net.forward(self.rec, self.obs).value
            else:
                bootstrap = 0.0
            self.closed.append(_Segment(self.pending, stopped, bootstrap))
            self.pending = []
            self.finished_episodes.append(
                (self.episode_reward, self.episode.t, self.prev_score)
            )
            self._reset_episode()
        else:
            self.obs = self.net.encode_observation(
                self.image, self.episode.window, cached_global=self.obs
            )
        return entropy(out.probs)

    def flush(self) -> list[_Segment]:
        """Close the open segment (bootstrapping from the live state) and
        hand over everything buffered since the last flush."""
        if self.pending:
            bootstrap = self.net.forward(self.rec, self.obs).value
            self.closed.append(_Segment(self.pending, False, bootstrap))
            self.pending = []
        segments, self.closed = self.closed, []
        return segments


def train(
    config: TrainerConfig,
    tasks,
    net_config: NetConfig,
    reward_config: RewardConfig = RewardConfig(),
    log_path=None,
) -> tuple[PolicyNetwork, list[LogRecord]]:
    """Run the full training procedure; returns the network and log records.

    The task source yields one (image, scorer) pair per episode.  Gradients
    from all segments of all streams in an update window are summed, clipped
    at the configured global norm, and applied in one optimizer step.
    Raises DivergenceError if the loss or gradients go non-finite.
    """
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    net = PolicyNetwork(net_config, init_params(net_config, np.random.default_rng(seeds[0])))
    action_rng = np.random.default_rng(seeds[1])
    task_rngs = [np.random.default_rng(s) for s in seeds[2].spawn(config.batch_size)]
    optimizer = RmsProp(net.params, config.rms_decay, config.rms_epsilon)
    streams = [
        _Stream(net, tasks, config, reward_config, task_rngs[i])
        for i in range(config.batch_size)
    ]

    records: list[LogRecord] = []
    entropy_sum = 0.0
    entropy_count = 0
    env_steps = 0
    tick = 0
    last_log = 0
    while env_steps < config.total_steps:
        for stream in streams:
            entropy_sum += stream.step_once(action_rng)
            entropy_count += 1
        env_steps += config.batch_size
        tick += 1
        if tick % config.update_period == 0 or env_steps >= config.total_steps:
            total_grads = net.params.zeros_like()
            total_loss = 0.0
            for stream in streams:
                for seg in stream.flush():
                    returns = compute_returns(
                        [tr.reward for tr in seg.transitions],
                        seg.terminal,
                        seg.bootstrap,
                        config.gamma,
                    )
                    loss, grads = segment_loss(net, seg.transitions, returns, config.beta)
                    total_loss += loss
                    for name in PolicyParams.FIELDS:
                        total_grads[name] += grads[name]
            norm = clip_gradients(total_grads, config.grad_clip)
            if not np.isfinite(total_loss) or not np.isfinite(norm):
                raise DivergenceError(
                    f"non-finite loss ({total_loss}) or gradient norm ({norm}) "
                    f"at step {env_steps}"
                )
            rms_update(net.params, total_grads, optimizer, config.learning_rate)
            if env_steps - last_log >= config.log_interval:
                episodes = [ep for s in streams for ep in s.finished_episodes]
                for s in streams:
                    s.finished_episodes = []
                if episodes:
                    arr = np.array(episodes)
                    rew, length, final = arr[:, 0].mean(), arr[:, 1].mean(), arr[:, 2].mean()
                else:
                    rew = length = final = float("nan")
                records.append(
                    LogRecord(
                        env_steps,
                        float(rew),
                        float(length),
                        float(final),
                        entropy_sum / max(entropy_count, 1),
                    )
                )
                entropy_sum = 0.0
                entropy_count = 0
                last_log = env_steps
    if log_path is not None:
        from .fileio import atomic_write_text

        atomic_write_text(log_path, "".join(r.line() + "\n" for r in records))
    return net, records
