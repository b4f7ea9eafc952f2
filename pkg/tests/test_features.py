import numpy as np
import pytest

from edaflow.decompose import DecomposedTrace
from edaflow.features import (
    BANDS,
    FEATURE_NAMES,
    FeatureMatrix,
    WindowSpec,
    band_power,
    build_feature_matrix,
    feature_row,
    read_feature_csv,
    segment_windows,
    time_domain_features,
    write_feature_csv,
)
from edaflow.signal_io import LabelInterval, LabelTrack, RiskLabel

FS = 4.0


def _dec(edr, edl=None, fs=FS):
    edr = np.asarray(edr, dtype=float)
    edl = np.full_like(edr, 2.0) if edl is None else np.asarray(edl, dtype=float)
    return DecomposedTrace(edl=edl, edr=edr, driver=np.zeros_like(edr),
                           residual=np.zeros_like(edr), fs=fs)


def _track(*triples):
    return LabelTrack(tuple(LabelInterval(s, e, lab) for s, e, lab in triples))


# ----------------------------------------------------------------- windowing

def test_window_count_600s():
    assert len(segment_windows(2400, FS, WindowSpec())) == 591


def test_window_count_exact_fit():
    wins = segment_windows(40, FS, WindowSpec())
    assert wins == [(0, 40)]


def test_window_count_too_short():
    assert segment_windows(39, FS, WindowSpec()) == []


def test_windows_are_contiguous_strides():
    wins = segment_windows(60, FS, WindowSpec())
    assert wins[0] == (0, 40)
    assert all(b[0] - a[0] == 4 for a, b in zip(wins, wins[1:]))
    assert all(hi - lo == 40 for lo, hi in wins)


def test_bad_window_spec():
    with pytest.raises(ValueError):
        WindowSpec(window_s=1.0, stride_s=2.0)


# ------------------------------------------------------------- time features

def test_constant_windows():
    td = time_domain_features(np.full(40, 0.7), np.full(40, 2.5), FS)
    assert td.edr_std == 0.0
    assert td.edr_median == 0.7
    assert td.edr_integral == pytest.approx(0.7 * 39 / FS)
    assert td.edr_nap == 0.0
    assert td.edr_nrms == 0.0
    assert td.edl_mean == 2.5
    assert td.edl_std == 0.0
    assert td.edl_median == 2.5


def test_ramp_integral_closed_form():
    # linear 0 -> 1 over 9.75 s: trapezoid rule is exact, area = 9.75 / 2
    td = time_domain_features(np.linspace(0, 1, 40), np.zeros(40), FS)
    assert td.edr_integral == pytest.approx(4.875)


def test_population_std():
    x = np.array([1.0, 2.0, 3.0, 4.0])
    td = time_domain_features(x, x, FS)
    assert td.edr_std == pytest.approx(np.sqrt(1.25))  # population, not sample


def test_alternating_nap_nrms():
    x = np.tile([0.0, 1.0], 20)
    td = time_domain_features(x, x, FS)
    assert td.edr_nap == pytest.approx(0.5)
    assert td.edr_nrms == pytest.approx(np.sqrt(0.5))


def test_nap_affine_invariant():
    rng = np.random.default_rng(0)
    x = rng.normal(size=40)
    a = time_domain_features(x, x, FS)
    b = time_domain_features(3.0 * x + 7.0, x, FS)
    assert b.edr_nap == pytest.approx(a.edr_nap, rel=1e-12)
    assert b.edr_nrms == pytest.approx(a.edr_nrms, rel=1e-12)


# -------------------------------------------------------------- band powers

def test_sine_on_bin_has_half_power():
    n, fs = 40, 4.0
    t = np.arange(n) / fs
    x = np.sin(2 * np.pi * 0.2 * t)  # exactly bin k = 2
    assert band_power(x, fs, (0.2, 0.3)) == pytest.approx(0.5, abs=1e-9)
    assert band_power(x, fs, (0.1, 0.2)) == pytest.approx(0.0, abs=1e-9)
    assert band_power(x, fs, (0.3, 0.4)) == pytest.approx(0.0, abs=1e-9)


def test_band_edges_half_open():
    n, fs = 40, 4.0
    t = np.arange(n) / fs
    x = np.sin(2 * np.pi * 0.3 * t)  # bin k = 3 sits at the 0.3 Hz boundary
    assert band_power(x, fs, (0.2, 0.3)) == pytest.approx(0.0, abs=1e-9)
    assert band_power(x, fs, (0.3, 0.4)) == pytest.approx(0.5, abs=1e-9)


def test_band_power_quadratic_scaling_and_shift_invariance():
    rng = np.random.default_rng(5)
    x = rng.normal(size=40)
    base = band_power(x, FS, (0.2, 0.3))
    assert band_power(3.0 * x, FS, (0.2, 0.3)) == pytest.approx(9.0 * base, rel=1e-10)
    assert band_power(x + 11.0, FS, (0.2, 0.3)) == pytest.approx(base, rel=1e-8, abs=1e-12)


def test_band_power_parseval_bound():
    rng = np.random.default_rng(6)
    for _ in range(1000):
        x = rng.normal(size=40)
        total = sum(band_power(x, FS, b) for b in BANDS)
        assert total <= np.var(x) + 1e-10


def test_band_power_bad_band():
    with pytest.raises(ValueError):
        band_power(np.zeros(40), FS, (0.0, 0.1))
    with pytest.raises(ValueError):
        band_power(np.zeros(40), FS, (1.9, 2.5))


def test_feature_row_layout():
    rng = np.random.default_rng(1)
    edr, edl = rng.normal(size=40), rng.normal(size=40)
    row = feature_row(edr, edl, FS)
    assert row.shape == (len(FEATURE_NAMES),)
    td = time_domain_features(edr, edl, FS)
    np.testing.assert_allclose(row[:8], list(td))
    np.testing.assert_allclose(row[8:], [band_power(edr, FS, b) for b in BANDS])


# ------------------------------------------------------------ matrix building

def test_build_matrix_single_interval():
    dec = _dec(np.zeros(600))  # 150 s
    fm = build_feature_matrix(dec, _track((0, 60, RiskLabel.LOW)))
    # full 10 s windows inside [0, 60): starts 0..50 s
    assert len(fm) == 51
    assert set(fm.labels) == {int(RiskLabel.LOW)}
    assert fm.window_starts[0] == 0.0
    assert fm.window_starts[-1] == 50.0


def test_build_matrix_empty_track():
    fm = build_feature_matrix(_dec(np.zeros(600)), LabelTrack(()))
    assert len(fm) == 0
    assert fm.values.shape == (0, len(FEATURE_NAMES))


def test_build_matrix_late_interval():
    fm = build_feature_matrix(_dec(np.zeros(600)), _track((90, 120, RiskLabel.HIGH)))
    assert len(fm) == 21  # starts 90..110 s
    assert set(fm.labels) == {int(RiskLabel.HIGH)}


def test_build_matrix_class_counts_and_subset():
    fm = build_feature_matrix(
        _dec(np.zeros(600)),
        _track((0, 60, RiskLabel.LOW), (90, 120, RiskLabel.HIGH)),
    )
    counts = fm.class_counts()
    assert counts[RiskLabel.LOW] == 51
    assert counts[RiskLabel.HIGH] == 21
    sub = fm.subset(np.nonzero(fm.labels == int(RiskLabel.HIGH))[0])
    assert len(sub) == 21


def test_feature_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    dec = _dec(np.abs(rng.normal(size=600)), 2.0 + rng.normal(size=600) * 0.1)
    fm = build_feature_matrix(dec, _track((0, 150, RiskLabel.HIGH)))
    p = tmp_path / "feat.csv"
    write_feature_csv(p, fm)
    back = read_feature_csv(p)
    np.testing.assert_array_equal(back.values, fm.values)
    np.testing.assert_array_equal(back.labels, fm.labels)
    np.testing.assert_array_equal(back.window_starts, fm.window_starts)
