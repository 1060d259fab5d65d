import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_tape, small_net
from croprl.errors import CheckpointMismatchError
from croprl.images import from_array
from croprl.policy import (
    EpisodeTape,
    NetConfig,
    Observation,
    PolicyNetwork,
    PolicyParams,
    RecurrentState,
    area_resample,
    content_box,
    entropy,
    flatten_grads,
    greedy_action,
    load_checkpoint,
    sample_action,
    save_checkpoint,
    softmax,
)
from croprl.window import ACTIONS, CropWindow, full_window


def zeroed(net: PolicyNetwork) -> PolicyNetwork:
    for name in PolicyParams.FIELDS:
        getattr(net.params, name)[...] = 0.0
    return net


def rand_obs(net, rng) -> Observation:
    raw_g = rng.uniform(0, 1, net.config.raw_dim)
    raw_l = rng.uniform(0, 1, net.config.raw_dim)
    return Observation(net._encode(raw_g), net._encode(raw_l), raw_g, raw_l)


def test_zero_weights_give_uniform_policy_and_zero_value():
    net = zeroed(small_net())
    rng = np.random.default_rng(0)
    out = net.forward(net.initial_state(), rand_obs(net, rng))
    np.testing.assert_allclose(out.probs, np.full(14, 1 / 14))
    assert out.value == 0.0


def test_uniform_entropy_is_log_14():
    assert entropy(np.full(14, 1 / 14)) == pytest.approx(math.log(14), abs=1e-12)


@given(st.lists(st.floats(-30, 30), min_size=14, max_size=14), st.floats(-50, 50))
def test_softmax_shift_invariance(logits, shift):
    base = softmax(np.array(logits))
    shifted = softmax(np.array(logits) + shift)
    np.testing.assert_allclose(base, shifted, atol=1e-12)
    assert abs(base.sum() - 1.0) <= 1e-9
    assert (base > 0).all()


def test_different_observations_give_different_logits():
    net = small_net(seed=3)
    rng = np.random.default_rng(4)
    out1 = net.forward(net.initial_state(), rand_obs(net, rng))
    out2 = net.forward(net.initial_state(), rand_obs(net, rng))
    assert not np.allclose(out1.probs, out2.probs)


def test_sample_action_degenerate_distribution():
    rng = np.random.default_rng(0)
    probs = np.zeros(14)
    probs[9] = 1.0
    assert all(sample_action(probs, rng).id == 9 for _ in range(50))


def test_sample_action_uniform_counts():
    # 14,000 uniform draws: each action lands in the 99.99% binomial band.
    rng = np.random.default_rng(123)
    probs = np.full(14, 1 / 14)
    counts = np.zeros(14, dtype=int)
    for _ in range(14_000):
        counts[sample_action(probs, rng).id] += 1
    assert counts.min() >= 800 and counts.max() <= 1200


def test_sample_action_reproducible_with_seed():
    probs = np.full(14, 1 / 14)
    rng = np.random.default_rng(9)
    first = [sample_action(probs, rng).id for _ in range(10)]
    rng = np.random.default_rng(9)
    second = [sample_action(probs, rng).id for _ in range(10)]
    assert first == second


def test_greedy_action_argmax_and_ties():
    probs = np.full(14, 1 / 14)
    probs[7] = 0.2
    probs /= probs.sum()
    assert greedy_action(probs).id == 7
    assert greedy_action(np.full(14, 1 / 14)).id == 0  # ties -> lowest id


def test_empty_tape_gives_zero_loss_and_gradients():
    net = small_net(seed=1)
    tape = EpisodeTape(np.zeros(4), net.initial_state(), [])
    loss, grads = net.backward(tape, beta=0.05)
    assert loss == 0.0
    assert all(np.all(g == 0) for g in grads.values())


def test_zero_advantage_zero_beta_policy_head_grads_vanish():
    net = small_net(seed=2)
    rng = np.random.default_rng(5)
    tape = random_tape(net, rng, n_steps=4)
    for step in tape.steps:
        step.value_estimate = step.ret  # advantage == 0
    _, grads = net.backward(tape, beta=0.0)
    # Policy-head gradients come only from advantage and entropy terms.
    assert np.all(grads["policy_w"] == 0.0)
    assert np.all(grads["policy_b"] == 0.0)
    assert not np.all(grads["value_w"] == 0.0)


@pytest.mark.parametrize("use_recurrent", [True, False])
def test_gradcheck_small_nets(use_recurrent):
    rng = np.random.default_rng(20)
    net = small_net(seed=21, use_recurrent=use_recurrent)
    err = net.grad_check(random_tape(net, rng), beta=0.05)
    assert err < 1e-4


def test_gradcheck_pixel_encoder():
    rng = np.random.default_rng(22)
    net = small_net(seed=23, encoder="pixel", patch_size=4)
    err = net.grad_check(random_tape(net, rng, n_steps=3), beta=0.05)
    assert err < 1e-4


def test_gradcheck_flags_corrupted_policy_head():
    rng = np.random.default_rng(30)
    net = small_net(seed=31)
    tape = random_tape(net, rng)
    true_backward = net.backward

    def corrupted(tape, beta):
        loss, grads = true_backward(tape, beta)
        grads["policy_w"] = grads["policy_w"] * 1.5 + 0.05
        return loss, grads

    net.backward = corrupted
    assert net.grad_check(tape, beta=0.05) > 1e-2


def test_gradcheck_flags_zeroed_gradients():
    rng = np.random.default_rng(32)
    net = small_net(seed=33)
    tape = random_tape(net, rng)
    true_backward = net.backward

    def zeroed_grads(tape, beta):
        loss, grads = true_backward(tape, beta)
        return loss, {k: np.zeros_like(v) for k, v in grads.items()}

    net.backward = zeroed_grads
    assert net.grad_check(tape, beta=0.05) == pytest.approx(1.0, abs=0.05)


def test_forward_shape_mismatch_rejected():
    net = small_net()
    rng = np.random.default_rng(0)
    obs = rand_obs(net, rng)
    bad = Observation(obs.global_feature[:4], obs.local_feature, obs.raw_global, obs.raw_local)
    with pytest.raises(ValueError):
        net.forward(net.initial_state(), bad)
    with pytest.raises(ValueError):
        net.forward(RecurrentState(np.zeros(3), np.zeros(3)), obs)


def test_coordinate_encoder_raw_local_is_window():
    net = small_net()
    img = from_array(np.full((8, 8), 0.5))
    win = CropWindow(0.1, 0.2, 0.5, 0.6)
    obs = net.encode_observation(img, win)
    np.testing.assert_array_equal(obs.raw_local, [0.1, 0.2, 0.5, 0.6])


def test_global_feature_cached_between_calls():
    net = small_net(encoder="pixel", patch_size=4)
    rng = np.random.default_rng(1)
    img = from_array(rng.uniform(0, 1, (16, 16)))
    first = net.encode_observation(img, full_window())
    second = net.encode_observation(img, CropWindow(0.2, 0.2, 0.5, 0.5), cached_global=first)
    assert second.global_feature is first.global_feature
    assert second.raw_global is first.raw_global


def test_pixel_encoder_uniform_image_local_features_identical():
    net = small_net(encoder="pixel", patch_size=4)
    img = from_array(np.full((20, 20), 0.37))
    a = net.encode_observation(img, CropWindow(0.0, 0.0, 0.5, 0.5))
    b = net.encode_observation(img, CropWindow(0.3, 0.4, 0.6, 0.5), cached_global=a)
    np.testing.assert_array_equal(a.local_feature, b.local_feature)


def test_area_resample_preserves_mean_and_uniformity():
    rng = np.random.default_rng(2)
    plane = rng.uniform(0, 1, (13, 9))
    out = area_resample(plane, 4, 4)
    assert out.mean() == pytest.approx(plane.mean(), abs=1e-12)
    np.testing.assert_allclose(area_resample(np.full((7, 5), 0.3), 4, 4), 0.3)


def test_content_box_finds_bright_region():
    px = np.full((40, 60), 0.1)
    px[10:30, 15:45] = 0.9
    box = content_box(from_array(px))
    np.testing.assert_allclose(box, [15 / 60, 10 / 40, 30 / 60, 20 / 40])
    np.testing.assert_allclose(content_box(from_array(np.full((8, 8), 0.4))), [0, 0, 1, 1])


def test_no_recurrent_output_independent_of_history():
    net = small_net(seed=40, use_recurrent=False)
    rng = np.random.default_rng(41)
    history = [rand_obs(net, rng) for _ in range(6)]
    final = rand_obs(net, rng)

    def run(order):
        state = net.initial_state()
        for obs in order:
            state = net.forward(state, obs).next_state
        return net.forward(state, final)

    out1 = run(history)
    out2 = run(list(reversed(history)))
    np.testing.assert_array_equal(out1.probs, out2.probs)
    assert out1.value == out2.value


def test_recurrent_output_depends_on_history():
    net = small_net(seed=40, use_recurrent=True)
    rng = np.random.default_rng(41)
    history = [rand_obs(net, rng) for _ in range(6)]
    final = rand_obs(net, rng)

    def run(order):
        state = net.initial_state()
        for obs in order:
            state = net.forward(state, obs).next_state
        return net.forward(state, final)

    assert not np.allclose(run(history).probs, run(list(reversed(history))).probs)


def test_checkpoint_roundtrip_byte_identical(tmp_path):
    net = small_net(seed=50)
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    save_checkpoint(p1, net, extra={"nr": -5.0, "seed": 7})
    save_checkpoint(p2, net, extra={"nr": -5.0, "seed": 7})
    assert p1.read_bytes() == p2.read_bytes()

    loaded, header = load_checkpoint(p1)
    assert header["nr"] == "-5.0"
    assert loaded.config == net.config
    for name in PolicyParams.FIELDS:
        np.testing.assert_array_equal(getattr(loaded.params, name), getattr(net.params, name))


def test_checkpoint_rejects_action_table_mismatch(tmp_path):
    net = small_net(seed=51)
    path = tmp_path / "c.bin"
    save_checkpoint(path, net)
    data = path.read_bytes()
    marker = b"action_table_hash = "
    pos = data.index(marker) + len(marker)
    tampered = data[:pos] + b"0" * 8 + data[pos + 8 :]
    path.write_bytes(tampered)
    with pytest.raises(CheckpointMismatchError):
        load_checkpoint(path)


def test_checkpoint_rejects_truncation_and_garbage(tmp_path):
    net = small_net(seed=52)
    path = tmp_path / "d.bin"
    save_checkpoint(path, net)
    path.write_bytes(path.read_bytes()[:-100])
    with pytest.raises(CheckpointMismatchError):
        load_checkpoint(path)
    garbage = tmp_path / "g.bin"
    garbage.write_bytes(b"not a checkpoint\n")
    with pytest.raises(CheckpointMismatchError):
        load_checkpoint(garbage)


def test_initial_policy_near_uniform():
    net = PolicyNetwork.create(NetConfig(encoder="coordinate"), seed=0)
    rng = np.random.default_rng(1)
    out = net.forward(net.initial_state(), rand_obs(net, rng))
    assert entropy(out.probs) > 0.999 * math.log(14)
