"""The aesthetics-aware reward, piece by piece.

Shows the sign clipping of score deltas, the growing per-step penalty, the
aspect-ratio penalty band, and the invariance that makes the whole system
calibration-free: any strictly increasing rescaling of the scorer leaves
rewards untouched.
"""

import numpy as np

from croprl import RewardConfig, base_reward, full_reward, termination_reward


def main():
    cfg = RewardConfig()
    print("Sign clipping: only the direction of the score change matters")
    for prev, new in [(0.30, 0.50), (0.50, 0.30), (0.40, 0.40), (0.40, 0.40001)]:
        print(f"  score {prev:.5f} -> {new:.5f}: reward at t=0 is {base_reward(prev, new, 0):+.4f}")

    print("\nStep penalty grows with the step index (speed incentive):")
    for t in (0, 9, 24, 49):
        print(f"  t={t:2d}: zero-delta reward {base_reward(0.5, 0.5, t):+.4f}")

    print("\nAspect-ratio penalty band (nr = -5 outside (0.5, 2.0)):")
    for ar in (0.4, 0.5, 1.0, 2.0, 2.5):
        r = full_reward(0.3, 0.5, 0, ar, cfg)
        print(f"  ar={ar:.2f}: reward {r:+.4f}")

    print("\nTermination keeps the window, so only the step penalty applies:")
    for t in (0, 12):
        print(f"  stop at t={t:2d}: {termination_reward(t):+.4f}")

    print("\nMonotone-transform invariance (rewards under f(s) = exp(3s) + 7):")
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        a, b = rng.uniform(-2, 2, size=2)
        t = int(rng.integers(50))
        f = lambda v: float(np.exp(3 * v) + 7)
        worst = max(worst, abs(base_reward(f(a), f(b), t) - base_reward(a, b, t)))
    print(f"  max |difference| over 1000 random pairs: {worst}")


if __name__ == "__main__":
    main()
