import numpy as np

from croprl.policy import EpisodeTape, NetConfig, PolicyNetwork, RecurrentState, TapeStep


def random_tape(net: PolicyNetwork, rng: np.random.Generator, n_steps: int = 5) -> EpisodeTape:
    """Synthetic replay segment with random inputs, actions and targets."""
    cfg = net.config
    steps = [
        TapeStep(
            raw_local=rng.uniform(0, 1, cfg.raw_dim),
            action_id=int(rng.integers(14)),
            ret=float(rng.normal()),
            value_estimate=float(rng.normal()),
        )
        for _ in range(n_steps)
    ]
    return EpisodeTape(
        raw_global=rng.uniform(0, 1, cfg.raw_dim),
        initial_state=RecurrentState(
            rng.normal(size=cfg.hidden_size) * 0.1,
            rng.normal(size=cfg.hidden_size) * 0.1,
        ),
        steps=steps,
    )


def small_net(seed: int = 0, **overrides) -> PolicyNetwork:
    kwargs = dict(feature_dim=8, hidden_size=16, encoder="coordinate")
    kwargs.update(overrides)
    return PolicyNetwork.create(NetConfig(**kwargs), seed=seed)
