import json
import math

import numpy as np
import pytest

from blinkrecon.config import RunConfig
from blinkrecon.saccade import RIGHTWARD, LEFTWARD, SaccadeEvent, fit_saccade_params, simulate_saccade
from blinkrecon.synth import SynthConfig, synthesize_trace
from blinkrecon.trace import EyeTrace
from blinkrecon.validate import (
    GRID_COLUMNS,
    ArtificialBlinkResult,
    GridCell,
    SigmaBetaGrid,
    artificial_blink_grid,
    blink_free_trials,
    compute_reading_measures,
    emit_report,
    grid_svg,
    merge_grids,
    midpoint_results,
    relative_shift,
    run_artificial_blinks,
    score_cell,
    write_grid_csv,
    write_measures_csv,
)


def one_saccade(t_sb=400.0, t0=40.0, A=80.0, n=600):
    g, w = fit_saccade_params(A, t0, 8.0)
    lead = int(t_sb / 2)
    P = np.concatenate([np.full(lead, 100.0), simulate_saccade(A, t0, g, RIGHTWARD, (100, 100 + A), 2.0, (n - lead) * 2.0)])
    tr = EyeTrace(p=P[:n], valid=np.ones(n, bool))
    e = SaccadeEvent(t_sb, t0, t_sb + 2 * t0, A, 8.0, g, w, RIGHTWARD)
    return tr, e


def test_replica_schedule():
    tr, e = one_saccade()
    res, skipped = run_artificial_blinks(tr, [e], 10, 100.0, 24, (None, None), 40.0)
    assert skipped == 0 and len(res) == 10
    t_ab = [x.t_ab for x in res]
    assert t_ab[-1] == e.t_sb + e.t_0 / 2
    assert t_ab[0] == e.t_sb + e.t_0 / 2 - 100 + 10
    assert np.allclose(np.diff(t_ab), 10.0)
    for x in res:
        assert x.t_ab <= x.t_r <= x.t_ab + x.P_B


def test_replicas_leaving_trial_are_skipped():
    tr, e = one_saccade(t_sb=60.0)
    res, skipped = run_artificial_blinks(tr, [e], 10, 100.0, 24, (None, None), 40.0)
    assert skipped > 0 and len(res) + skipped == 10
    with pytest.raises(ValueError):
        run_artificial_blinks(tr, [e], 10, 0.5, 24, (None, None), 40.0)


def test_midpoint_control_scores_zero():
    tr, e = one_saccade()
    res, _ = run_artificial_blinks(tr, [e], 10, 100.0, 24, (None, None), 40.0)
    cell = score_cell(midpoint_results(res, 37.0), 24, 100.0, 37.0)
    assert cell.sigma == 0.0 and cell.beta == 0.0


def test_perfect_oracle_sigma_closed_form():
    t_sb, t0, P_B, f = 400.0, 40.0, 100.0, 10
    res = []
    for r in range(1, f + 1):
        t_ab = t_sb + t0 / 2 - P_B + r * P_B / f
        res.append(ArtificialBlinkResult(0, r, t_ab, t_sb, t0, P_B, t_sb, t0, "oracle"))
    cell = score_cell(res, 24, P_B, t0)
    # |t_ab + P_B/2 - t_sb| = |10 r - 30| over r = 1..10
    assert cell.mean_tr == 0.0
    assert cell.sigma == pytest.approx(310 / 10 / 100, abs=1e-15)
    assert cell.beta == 0.0
    assert score_cell([], 24, P_B, t0) is None


def test_sigma_beta_identities():
    c = GridCell(24, 100.0, 0.1, 0.3, 0.2, 0.25, 5)
    assert c.sigma == c.mean_trp - c.mean_tr
    assert c.beta == c.mean_t0rp - c.mean_t0r


@pytest.fixture(scope="module")
def small_grid(clean_corpus):
    return artificial_blink_grid(clean_corpus[0], [20, 30], [60.0, 100.0], RunConfig())


def test_grid_on_synthetic_corpus(small_grid, clean_corpus):
    assert small_grid.sigma().shape == (2, 2)
    assert np.isfinite(small_grid.sigma()).all()
    for c in small_grid.cells.values():
        assert abs(c.sigma - (c.mean_trp - c.mean_tr)) <= 1e-12
    ctrl = artificial_blink_grid(clean_corpus[0], [20], [60.0], RunConfig(), midpoint=True)
    assert np.abs(ctrl.sigma()).max() <= 1e-12 and np.abs(ctrl.beta()).max() <= 1e-12


def test_grid_without_saccades_raises():
    tr = EyeTrace(p=np.full(300, 5.0), valid=np.ones(300, bool))
    with pytest.raises(ValueError):
        artificial_blink_grid(tr, [20], [60.0])


def test_merge_grids(small_grid):
    a = SigmaBetaGrid([20], [60.0, 100.0], {k: v for k, v in small_grid.cells.items() if k[0] == 20})
    b = SigmaBetaGrid([30], [60.0, 100.0], {k: v for k, v in small_grid.cells.items() if k[0] == 30})
    assert write_grid_csv(merge_grids([a, b])) == write_grid_csv(small_grid)


# reading measures on a hand-built trial


def reading_trial(xs, dur=100):
    """Fixation positions ``xs`` joined by 10-sample ramps; word boxes are 100 px wide."""
    segs, events, t = [], [], 0
    for k, x in enumerate(xs):
        segs.append(np.full(dur, float(x)))
        t += dur
        if k + 1 < len(xs):
            ramp = np.linspace(x, xs[k + 1], 12)[1:-1]
            segs.append(ramp)
            d = RIGHTWARD if xs[k + 1] > x else LEFTWARD
            events.append(SaccadeEvent(t * 2.0, 10.0, (t + 10) * 2.0, abs(xs[k + 1] - x), 1.0, 0.1, 0.3, d))
            t += 10
    p = np.concatenate(segs)
    boxes = (tuple((100.0 * w, 100.0 * w + 90) for w in range(5)),)
    return EyeTrace(p=p, valid=np.ones(p.size, bool), word_boxes=boxes), events


def test_single_fixation_word():
    tr, ev = reading_trial([20, 130, 250])
    m = compute_reading_measures(tr, ev)
    w1 = m.words[1]
    assert w1.gaze_duration_ms == w1.total_reading_time_ms == w1.single_fixation_duration_ms == 200.0
    assert w1.single_fixation_position == pytest.approx(3.0)
    assert len(m.words) == 3 and m.outside_boxes == 0


def test_skipped_word_and_regression():
    tr, ev = reading_trial([20, 250, 130, 340])
    m = compute_reading_measures(tr, ev)
    by = {w.word: w for w in m.words}
    assert by[1].skipped and by[1].gaze_duration_ms == 0 and by[1].total_reading_time_ms == 200.0
    assert by[2].regression_origin and not by[2].skipped
    assert by[2].single_fixation_duration_ms is None  # followed by a regression
    assert m.means["skipping_probability"] == pytest.approx(0.25)
    for w in m.words:
        assert w.gaze_duration_ms <= w.total_reading_time_ms
    for k in ("skipping_probability", "regression_probability"):
        assert 0 <= m.means[k] <= 1


def test_refixation_counts_into_gaze():
    tr, ev = reading_trial([20, 50, 150])
    w0 = compute_reading_measures(tr, ev).words[0]
    assert w0.gaze_duration_ms == w0.total_reading_time_ms
    assert w0.single_fixation_duration_ms is None


def test_fixation_outside_boxes_assigned_to_nearest():
    tr, ev = reading_trial([20, 95, 150])
    m = compute_reading_measures(tr, ev)
    assert m.outside_boxes == 1


def test_measures_need_boxes():
    tr = EyeTrace(p=np.full(10, 1.0), valid=np.ones(10, bool))
    with pytest.raises(ValueError):
        compute_reading_measures(tr, [])


def test_flat_reconstruction_leaves_measures_unchanged():
    from blinkrecon.reconstruct import reconstruct_trace

    tr, ev = reading_trial([20, 130, 250])
    valid = tr.valid.copy()
    valid[30:50] = False
    blinky = tr.replace(p=np.where(valid, tr.p, 0.0), valid=valid)
    filled, plans = reconstruct_trace(blinky, RunConfig(t_d_letters=24))
    assert [p.mode for p in plans] == ["flat"]
    assert compute_reading_measures(filled, ev).means == compute_reading_measures(tr, ev).means
    assert blink_free_trials(blinky) == []


def test_relative_shift():
    a = dict.fromkeys(("total_reading_time_ms", "gaze_duration_ms", "single_fixation_duration_ms",
                       "single_fixation_position", "skipping_probability", "regression_probability"), 2.0)
    b = dict(a, gaze_duration_ms=2.1)
    assert relative_shift(a, b)["gaze_duration_ms"] == pytest.approx(0.05)


def test_measures_csv_header():
    tr, ev = reading_trial([20, 130])
    text = write_measures_csv(compute_reading_measures(tr, ev))
    assert text.splitlines()[0].startswith("trial,word,total_reading_time_ms")


# report


def grid_5x5():
    td, pb = [10, 14, 18, 22, 26], [40.0, 60.0, 80.0, 100.0, 120.0]
    cells = {}
    for i, t in enumerate(td):
        for k, p in enumerate(pb):
            cells[(t, p)] = GridCell(t, p, 0.1 * i, 0.2, 0.05 * k, 0.1, 10)
    cells[(26, 120.0)] = None
    return SigmaBetaGrid(td, pb, cells)


def test_svg_has_one_rect_per_cell():
    svg = grid_svg(grid_5x5(), "sigma")
    assert svg.count("<rect") == 25
    assert "#cccccc" in svg  # the absent cell


def test_grid_csv_columns_and_absent_cells():
    text = write_grid_csv(grid_5x5())
    lines = text.splitlines()
    assert lines[0] == ",".join(GRID_COLUMNS)
    assert len(lines) == 26
    assert lines[-1] == "52.0,120.0,,,,,,,0"


def test_empty_grid_raises():
    with pytest.raises(ValueError):
        emit_report(SigmaBetaGrid([], []))
    with pytest.raises(ValueError):
        emit_report(None)


def test_report_is_deterministic():
    measures = {"reconstructed": {"gaze_duration_ms": 210.0, "single_fixation_position": math.nan}}
    a = emit_report(grid_5x5(), measures)
    b = emit_report(grid_5x5(), measures)
    assert a == b
    assert set(a) == {"grid.csv", "sigma.svg", "beta.svg", "report.json"}
    doc = json.loads(a["report.json"])
    assert doc["cells"] == 25 and doc["scored_cells"] == 24
    assert doc["measures"]["reconstructed"]["single_fixation_position"] is None


def test_synthetic_corpus_measures_are_sane():
    tr, _, _ = synthesize_trace(SynthConfig(n_trials=20, rng_seed=3, blink_rate_per_min=0.0))
    from blinkrecon.saccade import detect_saccades

    m = compute_reading_measures(tr, detect_saccades(tr))
    assert 150 < m.means["gaze_duration_ms"] < 400
    assert 0 < m.means["skipping_probability"] < 0.6
