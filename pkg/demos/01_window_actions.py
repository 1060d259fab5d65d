"""Tour of the crop-window state machine.

Walks the 14-action table over a few windows, showing the geometry rules:
steps are fractions of the original image, edges clamp to the frame, and a
move that would shrink the window below the minimum size is a no-op.
"""

from croprl import ACTIONS, CropWindow, EpisodeState, apply_action, episode_step, full_window


def show(window):
    return f"(x={window.x:.3f}, y={window.y:.3f}, w={window.w:.3f}, h={window.h:.3f})"


def main():
    print("The action table:")
    for action in ACTIONS:
        print(f"  [{action.id:2d}] {action.group:<12} {action.name}")

    print("\nEach geometric action from the full frame:")
    for action in ACTIONS[:-1]:
        out = apply_action(full_window(), action)
        print(f"  {action.name:<28} -> {show(out)}")

    print("\nClamping at the frame edge (move-right at the right boundary):")
    pinned = CropWindow(0.5, 0.2, 0.5, 0.6)
    moved = apply_action(pinned, ACTIONS[6])
    print(f"  {show(pinned)} -> {show(moved)}  (no-op)")

    print("\nMinimum-size guard (shrink-centered on a 0.12-wide window):")
    thin = CropWindow(0.4, 0.4, 0.12, 0.3)
    print(f"  {show(thin)} -> {show(apply_action(thin, ACTIONS[4]))}  (no-op)")

    print("\nAn episode: three shrinks then the stop action:")
    state = EpisodeState(full_window())
    for action in (ACTIONS[3], ACTIONS[3], ACTIONS[4], ACTIONS[13]):
        state = episode_step(state, action)
        flag = "terminated" if state.terminated else "running"
        print(f"  t={state.t}: {action.name:<28} {show(state.window)}  [{flag}]")


if __name__ == "__main__":
    main()
