"""Recurrent actor-critic policy network, in plain numpy.

The network maps an observation (a global feature of the whole image plus a
local feature of the current crop) through a fully-connected trunk and a
gated recurrent cell to a 14-way action distribution and a scalar state
value.  Forward, backward (backpropagation through time) and a
finite-difference gradient checker are implemented by hand so training has
no framework dependency and gradients can be verified exactly.

Two observation encoders are provided: a pixel-patch encoder that
area-averages the crop to a small grayscale grid, and a coordinate encoder
that feeds window rectangles directly (for synthetic-oracle experiments
where pixel content is irrelevant).
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointMismatchError
from .fileio import atomic_write_bytes
from .images import ImageRaster
from .window import ACTIONS, Action, CropWindow, N_ACTIONS, action_table_digest, to_pixel_rect

PIXEL_ENCODER = "pixel"
COORDINATE_ENCODER = "coordinate"

CHECKPOINT_MAGIC = "croprl-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetConfig:
    """Shape and wiring of the policy network."""

    feature_dim: int = 64
    hidden_size: int = 128
    encoder: str = PIXEL_ENCODER
    use_recurrent: bool = True
    patch_size: int = 16
    trunk_activation: str = "tanh"

    def __post_init__(self) -> None:
        if self.encoder not in (PIXEL_ENCODER, COORDINATE_ENCODER):
            raise ValueError(f"unknown encoder {self.encoder!r}")
        if min(self.feature_dim, self.hidden_size, self.patch_size) < 1:
            raise ValueError("feature_dim, hidden_size and patch_size must be positive")
        if self.trunk_activation not in ("tanh", "relu", "linear"):
            raise ValueError(f"unknown trunk activation {self.trunk_activation!r}")

    @property
    def raw_dim(self) -> int:
        return 4 if self.encoder == COORDINATE_ENCODER else self.patch_size**2


@dataclass
class PolicyParams:
    """All learnable tensors, float64 throughout."""

    enc_w: np.ndarray
    enc_b: np.ndarray
    trunk_w: np.ndarray
    trunk_b: np.ndarray
    cell_w: np.ndarray
    cell_b: np.ndarray
    policy_w: np.ndarray
    policy_b: np.ndarray
    value_w: np.ndarray
    value_b: np.ndarray

    FIELDS = (
        "enc_w",
        "enc_b",
        "trunk_w",
        "trunk_b",
        "cell_w",
        "cell_b",
        "policy_w",
        "policy_b",
        "value_w",
        "value_b",
    )

    def tensors(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in self.FIELDS}

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(getattr(self, name)) for name in self.FIELDS}

    def flat(self) -> np.ndarray:
        return np.concatenate([getattr(self, name).ravel() for name in self.FIELDS])

    def set_flat(self, vec: np.ndarray) -> None:
        pos = 0
        for name in self.FIELDS:
            arr = getattr(self, name)
            arr.flat[:] = vec[pos : pos + arr.size]
            pos += arr.size

    def copy(self) -> "PolicyParams":
        return PolicyParams(**{name: getattr(self, name).copy() for name in self.FIELDS})


def flatten_grads(grads: dict[str, np.ndarray]) -> np.ndarray:
    return np.concatenate([grads[name].ravel() for name in PolicyParams.FIELDS])


def init_params(config: NetConfig, rng: np.random.Generator) -> PolicyParams:
    """Uniform fan-in initialization; forget-gate bias 1; heads scaled by 0.01.

    The small head scale keeps the initial policy near-uniform (entropy close
    to ln 14), which matters for early exploration.
    """
    d, hidden = config.feature_dim, config.hidden_size

    def uniform(shape, fan_in, scale=1.0):
        k = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-k, k, size=shape) * scale

    enc_w = uniform((d, config.raw_dim), config.raw_dim)
    enc_b = uniform((d,), config.raw_dim)
    trunk_w = uniform((hidden, 2 * d), 2 * d)
    trunk_b = uniform((hidden,), 2 * d)
    cell_w = uniform((4 * hidden, 2 * hidden), 2 * hidden)
    cell_b = uniform((4 * hidden,), 2 * hidden)
    cell_b[hidden : 2 * hidden] = 1.0
    policy_w = uniform((N_ACTIONS, hidden), hidden, scale=0.01)
    policy_b = uniform((N_ACTIONS,), hidden, scale=0.01)
    value_w = uniform((hidden,), hidden, scale=0.01)
    value_b = uniform((1,), hidden, scale=0.01)
    return PolicyParams(
        enc_w, enc_b, trunk_w, trunk_b, cell_w, cell_b, policy_w, policy_b, value_w, value_b
    )


@dataclass
class RecurrentState:
    """Hidden and cell vectors of the gated recurrent unit."""

    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden_size: int) -> "RecurrentState":
        return cls(np.zeros(hidden_size), np.zeros(hidden_size))

    def copy(self) -> "RecurrentState":
        return RecurrentState(self.h.copy(), self.c.copy())


@dataclass
class Observation:
    """Global + local feature pair plus the raw encoder inputs behind them.

    The raw inputs are kept so training can backpropagate into the encoder;
    the global half is computed once per episode and reused by reference.
    """

    global_feature: np.ndarray
    local_feature: np.ndarray
    raw_global: np.ndarray
    raw_local: np.ndarray


@dataclass
class PolicyOutput:
    probs: np.ndarray
    value: float
    next_state: RecurrentState


@dataclass
class TapeStep:
    raw_local: np.ndarray
    action_id: int
    ret: float
    value_estimate: float


@dataclass
class EpisodeTape:
    """Replayable segment: raw inputs, sampled actions, frozen returns/values."""

    raw_global: np.ndarray
    initial_state: RecurrentState
    steps: list[TapeStep] = field(default_factory=list)


def softmax(logits: np.ndarray) -> np.ndarray:
    e = np.exp(logits - logits.max())
    return e / e.sum()


def entropy(probs: np.ndarray) -> float:
    return float(-(probs * np.log(probs)).sum())


def sample_action(probs: np.ndarray, rng: np.random.Generator) -> Action:
    """Draw one action from the policy distribution."""
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(probs), u))
    return ACTIONS[min(idx, N_ACTIONS - 1)]


def greedy_action(probs: np.ndarray) -> Action:
    """Most probable action; ties resolve to the lowest id."""
    return ACTIONS[int(np.argmax(probs))]


def content_box(image: ImageRaster) -> np.ndarray:
    """Normalized bounding box (x, y, w, h) of the image's bright content.

    A crude, deterministic saliency proxy: the box spans all pixels whose
    luma is at or above the midrange intensity.  A flat image maps to the
    full frame.  This is what the coordinate encoder reads as its
    whole-image observation.
    """
    g = image.gray()
    lo = float(g.min())
    hi = float(g.max())
    if hi - lo <= 1e-12:
        return np.array([0.0, 0.0, 1.0, 1.0])
    mask = g >= (lo + hi) / 2.0
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    height, width = g.shape
    return np.array(
        [
            cols[0] / width,
            rows[0] / height,
            (cols[-1] + 1 - cols[0]) / width,
            (rows[-1] + 1 - rows[0]) / height,
        ]
    )


def _overlap_weights(n_src: int, n_out: int) -> np.ndarray:
    """Row-stochastic (n_out, n_src) matrix of pixel-interval overlaps."""
    edges = np.linspace(0.0, n_src, n_out + 1)
    idx = np.arange(n_src)
    lo = np.maximum(edges[:-1, None], idx[None, :])
    hi = np.minimum(edges[1:, None], idx[None, :] + 1.0)
    w = np.clip(hi - lo, 0.0, None)
    return w / (n_src / n_out)


def area_resample(plane: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Exact area-average resampling of a 2-D plane to (out_h, out_w)."""
    wy = _overlap_weights(plane.shape[0], out_h)
    wx = _overlap_weights(plane.shape[1], out_w)
    return wy @ plane @ wx.T


class PolicyNetwork:
    """Parameters plus the forward/backward machinery operating on them."""

    def __init__(self, config: NetConfig, params: PolicyParams):
        self.config = config
        self.params = params

    @classmethod
    def create(cls, config: NetConfig, seed: int) -> "PolicyNetwork":
        rng = np.random.default_rng(seed)
        return cls(config, init_params(config, rng))

    # ----- observation encoding -----

    def raw_global(self, image: ImageRaster) -> np.ndarray:
        if self.config.encoder == COORDINATE_ENCODER:
            return content_box(image)
        n = self.config.patch_size
        return area_resample(image.gray(), n, n).ravel()

    def raw_local(self, image: ImageRaster, window: CropWindow) -> np.ndarray:
        if self.config.encoder == COORDINATE_ENCODER:
            return np.array(window, dtype=np.float64)
        n = self.config.patch_size
        rect = to_pixel_rect(window, image.dims)
        return area_resample(image.crop(rect).gray(), n, n).ravel()

    def _encode(self, raw: np.ndarray) -> np.ndarray:
        return np.tanh(self.params.enc_w @ raw + self.params.enc_b)

    def encode_observation(
        self,
        image: ImageRaster,
        window: CropWindow,
        cached_global: Observation | None = None,
    ) -> Observation:
        """Build the observation; the global half is reused from a prior one."""
        if cached_global is None:
            raw_g = self.raw_global(image)
            feat_g = self._encode(raw_g)
        else:
            raw_g = cached_global.raw_global
            feat_g = cached_global.global_feature
        raw_l = self.raw_local(image, window)
        return Observation(feat_g, self._encode(raw_l), raw_g, raw_l)

    # ----- forward -----

    def initial_state(self) -> RecurrentState:
        return RecurrentState.zeros(self.config.hidden_size)

    def forward(self, state: RecurrentState, obs: Observation) -> PolicyOutput:
        d, hidden = self.config.feature_dim, self.config.hidden_size
        if obs.global_feature.shape != (d,) or obs.local_feature.shape != (d,):
            raise ValueError(
                f"observation features must have length {d}, got "
                f"{obs.global_feature.shape} and {obs.local_feature.shape}"
            )
        if state.h.shape != (hidden,) or state.c.shape != (hidden,):
            raise ValueError(f"recurrent state must have length {hidden}")
        obs_vec = np.concatenate([obs.global_feature, obs.local_feature])
        probs, value, h, c, _ = self._step(obs_vec, state.h, state.c)
        next_state = RecurrentState(h, c) if self.config.use_recurrent else state
        return PolicyOutput(probs, value, next_state)

    def _trunk_act(self, pre: np.ndarray) -> np.ndarray:
        kind = self.config.trunk_activation
        if kind == "tanh":
            return np.tanh(pre)
        if kind == "relu":
            return np.maximum(pre, 0.0)
        return pre

    def _trunk_act_grad(self, z: np.ndarray) -> np.ndarray:
        """Derivative of the trunk activation, expressed from its output."""
        kind = self.config.trunk_activation
        if kind == "tanh":
            return 1.0 - z * z
        if kind == "relu":
            return (z > 0.0).astype(float)
        return np.ones_like(z)

    def _step(self, obs_vec, h_prev, c_prev):
        """One network step; returns (probs, value, h, c, cache-for-backward)."""
        p = self.params
        hidden = self.config.hidden_size
        z = self._trunk_act(p.trunk_w @ obs_vec + p.trunk_b)
        if self.config.use_recurrent:
            zh = np.concatenate([z, h_prev])
            gates = p.cell_w @ zh + p.cell_b
            i = _sigmoid(gates[:hidden])
            f = _sigmoid(gates[hidden : 2 * hidden])
            g = np.tanh(gates[2 * hidden : 3 * hidden])
            o = _sigmoid(gates[3 * hidden :])
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h = o * tc
        else:
            i = f = g = o = tc = zh = None
            h, c = z, c_prev
        logits = p.policy_w @ h + p.policy_b
        probs = softmax(logits)
        value = float(p.value_w @ h + p.value_b[0])
        cache = (obs_vec, z, zh, i, f, g, o, c_prev, c, tc, h)
        return probs, value, h, c, cache

    # ----- loss and gradients -----

    def objective(self, tape: EpisodeTape, beta: float) -> float:
        """Scalar training loss of a replayed segment.

        Per step: -log pi(a) * advantage  - beta * entropy + (R - V)^2 / 2,
        where the advantage uses the tape's frozen value estimate and the
        squared term uses the live value output.
        """
        if not tape.steps:
            return 0.0
        p = self.params
        hidden = self.config.hidden_size
        feat_g = np.tanh(p.enc_w @ tape.raw_global + p.enc_b)
        h = tape.initial_state.h
        c = tape.initial_state.c
        recurrent = self.config.use_recurrent
        loss = 0.0
        for step in tape.steps:
            feat_l = np.tanh(p.enc_w @ step.raw_local + p.enc_b)
            obs_vec = np.concatenate([feat_g, feat_l])
            z = self._trunk_act(p.trunk_w @ obs_vec + p.trunk_b)
            if recurrent:
                gates = p.cell_w @ np.concatenate([z, h]) + p.cell_b
                i = _sigmoid(gates[:hidden])
                f = _sigmoid(gates[hidden : 2 * hidden])
                g = np.tanh(gates[2 * hidden : 3 * hidden])
                o = _sigmoid(gates[3 * hidden :])
                c = f * c + i * g
                h = o * np.tanh(c)
            else:
                h = z
            probs = softmax(p.policy_w @ h + p.policy_b)
            value = p.value_w @ h + p.value_b[0]
            adv = step.ret - step.value_estimate
            loss += (
                -np.log(probs[step.action_id]) * adv
                + beta * (probs * np.log(probs)).sum()
                + 0.5 * (step.ret - value) ** 2
            )
        return float(loss)

    def backward(self, tape: EpisodeTape, beta: float) -> tuple[float, dict[str, np.ndarray]]:
        """Loss and exact analytic gradients via backpropagation through time.

        The advantage multiplying the log-probability term is a constant of
        the tape; no gradient flows from the policy term into the value head
        through it.
        """
        loss, grads, _ = self._replay(tape, beta, want_grads=True)
        return loss, grads

    def _replay(self, tape: EpisodeTape, beta: float, want_grads: bool):
        p = self.params
        d = self.config.feature_dim
        hidden = self.config.hidden_size
        grads = p.zeros_like() if want_grads else None
        if not tape.steps:
            return 0.0, grads, []

        raw_g = tape.raw_global
        feat_g = np.tanh(p.enc_w @ raw_g + p.enc_b)
        h = tape.initial_state.h
        c = tape.initial_state.c
        caches = []
        loss = 0.0
        for step in tape.steps:
            feat_l = np.tanh(p.enc_w @ step.raw_local + p.enc_b)
            obs_vec = np.concatenate([feat_g, feat_l])
            probs, value, h, c, cache = self._step(obs_vec, h, c)
            ent = entropy(probs)
            adv = step.ret - step.value_estimate
            loss += (
                -np.log(probs[step.action_id]) * adv
                - beta * ent
                + 0.5 * (step.ret - value) ** 2
            )
            caches.append((feat_l, probs, value, ent, cache))
        if not want_grads:
            return float(loss), None, caches

        dh_next = np.zeros(hidden)
        dc_next = np.zeros(hidden)
        d_feat_g = np.zeros(d)
        for step, (feat_l, probs, value, ent, cache) in zip(
            reversed(tape.steps), reversed(caches)
        ):
            obs_vec, z, zh, i, f, g, o, c_prev, c_t, tc, h_t = cache
            adv = step.ret - step.value_estimate
            onehot = np.zeros(N_ACTIONS)
            onehot[step.action_id] = 1.0
            dlogits = adv * (probs - onehot) + beta * probs * (np.log(probs) + ent)
            dv = value - step.ret
            grads["policy_w"] += np.outer(dlogits, h_t)
            grads["policy_b"] += dlogits
            grads["value_w"] += dv * h_t
            grads["value_b"] += dv
            dh = p.policy_w.T @ dlogits + p.value_w * dv + dh_next
            if self.config.use_recurrent:
                do = dh * tc
                dc = dh * o * (1.0 - tc * tc) + dc_next
                dgates = np.concatenate(
                    [
                        dc * g * i * (1.0 - i),
                        dc * c_prev * f * (1.0 - f),
                        dc * i * (1.0 - g * g),
                        do * o * (1.0 - o),
                    ]
                )
                grads["cell_w"] += np.outer(dgates, zh)
                grads["cell_b"] += dgates
                dzh = p.cell_w.T @ dgates
                dz = dzh[:hidden]
                dh_next = dzh[hidden:]
                dc_next = dc * f
            else:
                dz = dh
                dh_next = np.zeros(hidden)
            dz_pre = dz * self._trunk_act_grad(z)
            grads["trunk_w"] += np.outer(dz_pre, obs_vec)
            grads["trunk_b"] += dz_pre
            dobs = p.trunk_w.T @ dz_pre
            d_feat_g += dobs[:d]
            dl_pre = dobs[d:] * (1.0 - feat_l * feat_l)
            grads["enc_w"] += np.outer(dl_pre, step.raw_local)
            grads["enc_b"] += dl_pre
        dg_pre = d_feat_g * (1.0 - feat_g * feat_g)
        grads["enc_w"] += np.outer(dg_pre, raw_g)
        grads["enc_b"] += dg_pre
        return float(loss), grads, caches

    def grad_check(self, tape: EpisodeTape, beta: float, epsilon: float = 1e-5) -> float:
        """Max relative error between analytic and central-difference gradients.

        Every parameter is perturbed by +/- epsilon.  Relative error is
        floored at an absolute scale of 1e-3 so roundoff on near-zero
        components is not flagged; a zeroed-out analytic gradient against a
        real finite difference still reports an error near 1.
        """
        _, grads = self.backward(tape, beta)
        analytic = flatten_grads(grads)
        theta = self.params.flat()
        numeric = np.empty_like(analytic)
        for k in range(theta.size):
            orig = theta[k]
            theta[k] = orig + epsilon
            self.params.set_flat(theta)
            up = self.objective(tape, beta)
            theta[k] = orig - epsilon
            self.params.set_flat(theta)
            down = self.objective(tape, beta)
            theta[k] = orig
            numeric[k] = (up - down) / (2.0 * epsilon)
        self.params.set_flat(theta)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-3)
        return float((np.abs(analytic - numeric) / denom).max())


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Overflow-free: sigma(x) = (1 + tanh(x/2)) / 2.
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# ----- checkpoint container -----


def save_checkpoint(path: str | os.PathLike, net: PolicyNetwork, extra: dict | None = None) -> None:
    """Write a versioned checkpoint: text header, then named float64 tensors.

    The header carries the network config, the action-table digest and any
    extra run-config entries; tensors are raw little-endian float64 with
    explicit shapes.  Output bytes depend only on the arguments, and the file
    is written atomically (temp file + rename).
    """
    cfg = net.config
    header: dict[str, str] = {
        "feature_dim": str(cfg.feature_dim),
        "hidden_size": str(cfg.hidden_size),
        "encoder": cfg.encoder,
        "use_recurrent": "true" if cfg.use_recurrent else "false",
        "patch_size": str(cfg.patch_size),
        "trunk_activation": cfg.trunk_activation,
        "action_table_hash": action_table_digest(),
    }
    for key, value in (extra or {}).items():
        header[str(key)] = _format_value(value)
    buf = io.BytesIO()
    buf.write(f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\n".encode("ascii"))
    for key in sorted(header):
        buf.write(f"{key} = {header[key]}\n".encode("utf-8"))
    tensors = net.params.tensors()
    buf.write(f"tensors {len(tensors)}\n".encode("ascii"))
    for name in PolicyParams.FIELDS:
        arr = np.ascontiguousarray(tensors[name], dtype="<f8")
        dims = " ".join(str(s) for s in arr.shape)
        buf.write(f"{name} {arr.ndim}{' ' + dims if dims else ''}\n".encode("ascii"))
        buf.write(arr.tobytes())
    atomic_write_bytes(path, buf.getvalue())


def load_checkpoint(path: str | os.PathLike) -> tuple[PolicyNetwork, dict[str, str]]:
    """Read a checkpoint; returns the network and the full header dict.

    Raises CheckpointMismatchError for version or action-table mismatches and
    for malformed containers.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    stream = io.BytesIO(data)

    def read_line() -> str:
        raw = bytearray()
        while True:
            b = stream.read(1)
            if not b:
                raise CheckpointMismatchError(f"{path}: truncated checkpoint")
            if b == b"\n":
                return raw.decode("utf-8")
            raw.extend(b)

    first = read_line().split()
    if len(first) != 2 or first[0] != CHECKPOINT_MAGIC:
        raise CheckpointMismatchError(f"{path}: not a checkpoint file")
    if int(first[1]) != CHECKPOINT_VERSION:
        raise CheckpointMismatchError(f"{path}: unsupported version {first[1]}")
    header: dict[str, str] = {}
    line = read_line()
    while not line.startswith("tensors "):
        key, _, value = line.partition(" = ")
        if not _:
            raise CheckpointMismatchError(f"{path}: malformed header line {line!r}")
        header[key] = value
        line = read_line()
    n_tensors = int(line.split()[1])

    if header.get("action_table_hash") != action_table_digest():
        raise CheckpointMismatchError(
            f"{path}: checkpoint was built against a different action table"
        )
    try:
        cfg = NetConfig(
            feature_dim=int(header["feature_dim"]),
            hidden_size=int(header["hidden_size"]),
            encoder=header["encoder"],
            use_recurrent=header["use_recurrent"] == "true",
            patch_size=int(header["patch_size"]),
            trunk_activation=header.get("trunk_activation", "tanh"),
        )
    except (KeyError, ValueError) as exc:
        raise CheckpointMismatchError(f"{path}: bad network config in header: {exc}") from exc

    arrays: dict[str, np.ndarray] = {}
    for _ in range(n_tensors):
        spec = read_line().split()
        name, ndim = spec[0], int(spec[1])
        shape = tuple(int(s) for s in spec[2 : 2 + ndim])
        count = int(np.prod(shape)) if shape else 1
        payload = stream.read(count * 8)
        if len(payload) != count * 8:
            raise CheckpointMismatchError(f"{path}: truncated tensor {name}")
        arrays[name] = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
    missing = [name for name in PolicyParams.FIELDS if name not in arrays]
    if missing:
        raise CheckpointMismatchError(f"{path}: missing tensors {missing}")
    params = PolicyParams(**{name: arrays[name] for name in PolicyParams.FIELDS})
    _check_shapes(cfg, params, path)
    return PolicyNetwork(cfg, params), header


def _check_shapes(cfg: NetConfig, params: PolicyParams, path) -> None:
    d, hidden = cfg.feature_dim, cfg.hidden_size
    expected = {
        "enc_w": (d, cfg.raw_dim),
        "enc_b": (d,),
        "trunk_w": (hidden, 2 * d),
        "trunk_b": (hidden,),
        "cell_w": (4 * hidden, 2 * hidden),
        "cell_b": (4 * hidden,),
        "policy_w": (N_ACTIONS, hidden),
        "policy_b": (N_ACTIONS,),
        "value_w": (hidden,),
        "value_b": (1,),
    }
    for name, shape in expected.items():
        actual = getattr(params, name).shape
        if actual != shape:
            raise CheckpointMismatchError(
                f"{path}: tensor {name} has shape {actual}, config implies {shape}"
            )


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)
