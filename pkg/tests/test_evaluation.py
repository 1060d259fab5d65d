import numpy as np
import pytest

from conftest import small_net
from croprl.errors import ConfigError
from croprl.evaluation import (
    GRID_PRESETS,
    GridConfig,
    agent_crop,
    bench_methods,
    boundary_displacement,
    evaluate_dataset,
    format_bench,
    format_report,
    generate_grid,
    iou,
    load_annotations,
    sliding_window_search,
    topk_max_iou,
)
from croprl.images import from_array
from croprl.policy import PolicyParams
from croprl.scoring import CompositionScorer, TargetIoUScorer
from croprl.window import CropWindow, full_window


def test_iou_identity_and_disjoint():
    assert iou((3, 4, 10, 10), (3, 4, 10, 10)) == 1.0
    assert iou((0, 0, 10, 10), (20, 20, 5, 5)) == 0.0


def test_iou_half_shift():
    # 50x100 overlap over union 2*10000 - 5000.
    assert iou((0, 0, 100, 100), (50, 0, 100, 100)) == pytest.approx(1 / 3)


def test_iou_fuzz_properties():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        a = (*rng.uniform(0, 50, 2), *rng.uniform(1, 50, 2))
        b = (*rng.uniform(0, 50, 2), *rng.uniform(1, 50, 2))
        ab = iou(a, b)
        assert 0.0 <= ab <= 1.0
        assert ab == iou(b, a)
        assert iou(a, a) == 1.0


def test_boundary_displacement_identical_is_zero():
    assert boundary_displacement((5, 5, 20, 20), (5, 5, 20, 20), (100, 100)) == 0.0


def test_boundary_displacement_hand_value():
    got = boundary_displacement((0, 0, 100, 100), (5, 5, 90, 90), (100, 100))
    assert got == pytest.approx(0.05)


def test_boundary_displacement_symmetric_and_zero_iff_equal():
    rng = np.random.default_rng(2)
    for _ in range(300):
        a = tuple(int(v) for v in rng.integers(0, 40, 4) + [0, 0, 1, 1])
        b = tuple(int(v) for v in rng.integers(0, 40, 4) + [0, 0, 1, 1])
        d_ab = boundary_displacement(a, b, (64, 48))
        assert d_ab == boundary_displacement(b, a, (64, 48))
        assert (d_ab == 0.0) == (a == b)


def test_topk_single_candidate_matching_one_of_ten():
    gts = [(i, i, 10, 10) for i in range(10)]
    assert topk_max_iou([(4, 4, 10, 10)], gts, 1) == 1.0


def test_topk_k1_reduces_to_best_gt():
    cand = (0, 0, 10, 10)
    gts = [(5, 0, 10, 10), (100, 100, 4, 4)]
    assert topk_max_iou([cand], gts, 1) == max(iou(cand, g) for g in gts)


def test_topk_takes_best_of_first_k():
    gt = [(0, 0, 100, 100)]
    candidates = [(0, 0, 20, 100), (0, 0, 70, 100), (0, 0, 50, 100)]
    # IoUs vs gt: 0.2, 0.7, 0.5 -> top-3 max is 0.7.
    assert topk_max_iou(candidates, gt, 3) == pytest.approx(0.7)
    assert topk_max_iou(candidates, gt, 1) == pytest.approx(0.2)


def test_topk_nondecreasing_in_k():
    rng = np.random.default_rng(3)
    for _ in range(200):
        candidates = [(*rng.uniform(0, 50, 2), *rng.uniform(5, 50, 2)) for _ in range(6)]
        gts = [(*rng.uniform(0, 50, 2), *rng.uniform(5, 50, 2)) for _ in range(3)]
        values = [topk_max_iou(candidates, gts, k) for k in range(1, 7)]
        assert all(v2 >= v1 for v1, v2 in zip(values, values[1:]))


def flat_image(dims=(60, 40)):
    return from_array(np.full((dims[1], dims[0]), 0.5))


def test_sliding_window_single_window_grid():
    grid = GridConfig(scales=(1.0,), aspect_ratios=(None,), stride=0.1)
    scorer = TargetIoUScorer(CropWindow(0, 0, 1, 1))
    ranked, calls = sliding_window_search(flat_image(), scorer, grid)
    assert calls == 1
    assert len(ranked) == 1
    assert ranked[0][0] == full_window()


def test_sliding_window_call_count_matches_grid():
    img = flat_image((50, 50))
    grid = GRID_PRESETS["default"]
    expected = len(generate_grid(grid, img.dims))
    scorer = CompositionScorer()
    ranked, calls = sliding_window_search(img, scorer, grid)
    assert calls == expected == len(ranked)
    assert scorer.calls == calls
    # Deterministic for fixed dims.
    assert len(generate_grid(grid, img.dims)) == expected


def test_sliding_window_finds_on_grid_target():
    img = flat_image((50, 50))
    grid_windows = generate_grid(GRID_PRESETS["default"], img.dims)
    target = grid_windows[len(grid_windows) // 2]  # an exhaustively covered optimum
    scorer = TargetIoUScorer(target)
    ranked, _ = sliding_window_search(img, scorer, GRID_PRESETS["default"])
    assert ranked[0][0] == target
    assert ranked[0][1] == 1.0


def test_sliding_window_ties_keep_generation_order():
    img = flat_image((30, 30))
    grid = GridConfig(scales=(0.5, 0.9), aspect_ratios=(1.0,), stride=0.5)
    scorer = CompositionScorer()  # flat image: every window scores 0
    ranked, _ = sliding_window_search(img, scorer, grid)
    assert [w for w, _ in ranked] == generate_grid(grid, img.dims)


def terminate_now_net():
    net = small_net(seed=60)
    for name in PolicyParams.FIELDS:
        getattr(net.params, name)[...] = 0.0
    net.params.policy_b[13] = 10.0
    return net


def test_agent_crop_immediate_termination():
    img = flat_image()
    window, steps = agent_crop(terminate_now_net(), img)
    assert window == full_window()
    assert steps == 1


def test_agent_crop_step_cap_and_determinism():
    net = small_net(seed=61)  # random policy heads: wanders until the cap
    img = flat_image()
    w1, s1 = agent_crop(net, img)
    w2, s2 = agent_crop(net, img)
    assert s1 <= 50
    assert (w1, s1) == (w2, s2)


def test_evaluate_dataset_identity():
    crops = [(0, 0, 50, 50), (10, 10, 30, 30)]
    gts = [[c] for c in crops]
    report = evaluate_dataset(crops, gts, [(100, 100), (100, 100)])
    assert report.avg_iou == [1.0]
    assert report.avg_boundary_displacement == [0.0]


def test_evaluate_dataset_single_third_overlap():
    report = evaluate_dataset(
        [(0, 0, 100, 100)], [[(50, 0, 100, 100)]], [(150, 100)], topk=(1,)
    )
    assert report.avg_iou[0] == pytest.approx(1 / 3)
    assert report.topk_max_iou[1] == pytest.approx(1 / 3)


def test_evaluate_dataset_rejects_empty_and_misaligned():
    with pytest.raises(ValueError):
        evaluate_dataset([], [], [])
    with pytest.raises(ValueError):
        evaluate_dataset([(0, 0, 1, 1)], [], [(10, 10)])
    with pytest.raises(ValueError):
        evaluate_dataset([(0, 0, 1, 1)], [[(0, 0, 1, 1)], [(0, 0, 1, 1)]], [(10, 10)])


def test_evaluate_dataset_per_annotator_columns():
    crops = [(0, 0, 40, 40)]
    gts = [[(0, 0, 40, 40), (0, 0, 20, 40), (10, 10, 40, 40)]]
    report = evaluate_dataset(crops, gts, [(80, 80)])
    assert len(report.avg_iou) == 3
    assert report.avg_iou[0] == 1.0
    assert report.avg_iou[1] == pytest.approx(0.5)


def test_load_annotations_roundtrip(tmp_path):
    path = tmp_path / "ann.tsv"
    path.write_text("img1.pgm\t0\t0\t10\t10\t5\t5\t20\t20\nimg2.pgm\t1\t2\t3\t4\t6\t7\t8\t9\n")
    records = load_annotations(path)
    assert records[0] == ("img1.pgm", [(0, 0, 10, 10), (5, 5, 20, 20)])
    assert len(records) == 2


def test_load_annotations_reports_line_number(tmp_path):
    path = tmp_path / "bad.tsv"
    lines = ["img.pgm\t0\t0\t10\t10"] * 16 + ["img.pgm\t0\t0\t10"]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(ConfigError, match="line 17"):
        load_annotations(path)
    path.write_text("img.pgm\t0\tx\t10\t10\n")
    with pytest.raises(ConfigError, match="line 1"):
        load_annotations(path)


def test_format_report_four_decimals():
    report = evaluate_dataset([(0, 0, 100, 100)], [[(50, 0, 100, 100)]], [(150, 100)])
    text = format_report(report)
    header, row = text.strip().split("\n")
    assert header.split("\t")[0] == "avg_iou"
    assert row.split("\t")[0] == "0.3333"


def test_bench_agent_vs_grids():
    net = terminate_now_net()
    images = [flat_image((40, 40))]
    rows = bench_methods(net, images, CompositionScorer, dict(sorted(GRID_PRESETS.items())))
    by_name = {r.method: r for r in rows}
    assert by_name["agent"].avg_steps <= 50
    assert by_name["agent"].avg_scorer_calls == 0.0
    assert by_name["sliding-dense"].avg_scorer_calls > by_name["sliding-default"].avg_scorer_calls
    assert by_name["sliding-default"].avg_scorer_calls > by_name["sliding-sparse"].avg_scorer_calls
    text = format_bench(rows)
    assert text.startswith("method\tavg_steps")
