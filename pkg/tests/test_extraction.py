"""Greedy extraction against its brute-force twin, plus fixtures with
hand-computed expected output."""

import numpy as np
import pytest

from impletkit.data import AttributionSeries, TimeSeries
from impletkit.errors import ShapeError
from impletkit.extraction import (Implet, ImpletParams, brute_force_extract,
                                  extract_dataset, extract_implets,
                                  implet_score, load_implets, save_implets)

from conftest import make_dataset


def _random_pair(rng, T):
    x = rng.normal(0, 1, T)
    w = rng.normal(0, 1, T)
    return x, w


def test_zero_attribution_yields_nothing():
    x = np.zeros(20)
    w = np.zeros(20)
    assert extract_implets(x, w, ImpletParams()) == []
    assert brute_force_extract(x, w, ImpletParams()) == []


def test_single_spike_fixture():
    # spike at position 5 (1-based); sum score grows with length, so the
    # implet runs to the length cap: 2.0 + 0.1 * 10 = 3.0
    w = np.zeros(20)
    w[4] = 2.0
    x = np.arange(20.0)
    params = ImpletParams(lam=0.1, phi=1.0, len_min=3, len_max=10)
    out = extract_implets(x, w, params)
    assert len(out) == 1
    im = out[0]
    assert (im.l, im.r) == (5, 14)
    assert im.score == 3.0
    assert np.array_equal(im.values, x[4:14])
    assert brute_force_extract(x, w, params) == out


def test_oracle_equivalence_random_pairs():
    rng = np.random.default_rng(42)
    params_grid = [
        ImpletParams(scoring="sum"),
        ImpletParams(scoring="mean"),
        ImpletParams(lam=0.0, scoring="sum"),  # disables the fast path
        ImpletParams(lam=0.3, phi=0.5, len_min=2, len_max=9, scoring="mean"),
    ]
    for _ in range(50):
        x, w = _random_pair(rng, 50)
        for params in params_grid:
            fast = extract_implets(x, w, params)
            slow = brute_force_extract(x, w, params)
            assert fast == slow  # Implet.__eq__ compares every field


def test_results_sorted_and_disjoint():
    rng = np.random.default_rng(7)
    x, w = _random_pair(rng, 400)
    out = extract_implets(x, w, ImpletParams())
    for a, b in zip(out, out[1:]):
        assert a.r < b.l


def test_sum_mode_takes_maximal_length():
    # with lam > 0 the summed score strictly increases in r
    rng = np.random.default_rng(3)
    x, w = _random_pair(rng, 120)
    params = ImpletParams(lam=0.1, len_max=15)
    for im in extract_implets(x, w, params):
        assert im.r == min(im.l + 15 - 1, 120)


def test_mean_mode_tie_takes_smallest_end():
    # equal |w| everywhere and lam=0 make every end tie exactly
    w = np.array([1.5, 1.5, 1.5, 1.5])
    x = np.zeros(4)
    params = ImpletParams(lam=0.0, phi=1.0, len_min=1, len_max=4,
                          scoring="mean")
    out = extract_implets(x, w, params)
    assert [(im.l, im.r) for im in out] == [(1, 1), (2, 2), (3, 3), (4, 4)]
    assert out == brute_force_extract(x, w, params)


def test_start_eligibility_is_signed():
    # large negative attribution is not an eligible start
    w = np.zeros(20)
    w[4] = -5.0
    assert extract_implets(np.zeros(20), w, ImpletParams()) == []


def test_resume_past_emitted_implet():
    w = np.zeros(30)
    w[2] = 2.0
    w[20] = 2.0
    out = extract_implets(np.zeros(30), w, ImpletParams(len_max=5))
    assert [(im.l, im.r) for im in out] == [(3, 7), (21, 25)]


def test_attribution_series_input_uses_normalized():
    raw = np.zeros(30)
    raw[9] = 10.0
    attr = AttributionSeries.from_raw(2, 1, raw)
    x = TimeSeries(values=np.arange(30.0), id=5)
    out = extract_implets(x, attr, ImpletParams(len_max=4))
    assert len(out) == 1
    # ids come from the attribution, values from the series
    assert out[0].sample_id == 2
    assert out[0].class_id == 1
    assert np.array_equal(out[0].attributions, attr.normalized[9:13])


def test_implet_score_plain_window():
    w = np.array([0.5, -1.0, 2.0])
    assert implet_score(1, 3, w, lam=0.1) == pytest.approx(3.5 + 0.3)
    assert implet_score(2, 2, w, lam=0.0, scoring="mean") == 1.0
    with pytest.raises(IndexError):
        implet_score(0, 2, w, lam=0.1)
    with pytest.raises(IndexError):
        implet_score(1, 4, w, lam=0.1)


def test_params_validation():
    with pytest.raises(ValueError):
        ImpletParams(lam=-0.1)
    with pytest.raises(ValueError):
        ImpletParams(len_min=0)
    with pytest.raises(ValueError):
        ImpletParams(len_min=5, len_max=4)
    with pytest.raises(ValueError):
        ImpletParams(scoring="max")


def test_len_max_resolution():
    assert ImpletParams().resolved_len_max(101) == 50
    assert ImpletParams(len_max=7).resolved_len_max(101) == 7
    # resolved cap below len_min means nothing can be emitted
    w = np.full(4, 9.0)
    assert extract_implets(np.zeros(4), w, ImpletParams(len_min=3)) == []


def test_length_mismatch():
    with pytest.raises(ShapeError):
        extract_implets(np.zeros(5), np.zeros(6), ImpletParams())


def test_extract_dataset_routes_by_attribution_ids():
    ds = make_dataset([[0.0] * 12, [1.0] * 12], [0, 1])
    raw = np.zeros(12)
    raw[3] = 8.0
    attrs = [AttributionSeries.from_raw(1, 1, raw)]
    out = extract_dataset(ds, attrs, ImpletParams(len_max=3))
    assert len(out) == 1
    assert out[0].sample_id == 1
    assert np.array_equal(out[0].values, np.ones(3))


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    x, w = _random_pair(rng, 80)
    params = ImpletParams(len_max=10)
    implets = extract_implets(x, w, params)
    assert implets
    path = tmp_path / "implets.json"
    save_implets(implets, params, path)
    back, payload = load_implets(path)
    assert back == implets  # exact, including float fields
    assert payload["params"]["lambda"] == params.lam


def test_implet_shape_check():
    with pytest.raises(ShapeError):
        Implet(sample_id=0, class_id=0, l=1, r=3,
               values=np.zeros(2), attributions=np.zeros(3), score=1.0)
