import numpy as np
import pytest

from dmfreq.dmd import ModeSet, SignalWindow
from dmfreq.features import (FeatureCache, SubjectRecord, TfdmHistogram, feature_layout,
                             normalize_kind, order_free_mean, sdm_features, subject_features,
                             tfdm_band_features, tfdm_histogram, window_band_counts,
                             window_histogram, window_sdm)

DT = 1 / 500


def fake_modes(freqs, p=3, seed=0):
    rng = np.random.default_rng(seed)
    lam = np.exp(2j * np.pi * np.asarray(freqs) * DT)
    modes = rng.standard_normal((p, len(freqs))) + 1j * rng.standard_normal((p, len(freqs)))
    return ModeSet(lam, modes, np.ones(len(freqs), complex), DT, p)


def test_histogram_folds_and_counts_every_mode():
    h = window_histogram(np.array([10.2, -10.2, 0.5, 249.9, 250.0, -260.0]))
    assert h[10] == 2 and h[0] == 1 and h[249] == 3
    assert h.sum() == 6 and h.size == 250


def test_histogram_normalized():
    h = window_histogram(np.array([1.5, -1.5, 3.0, 3.2]), normalize=True)
    assert h[1] == 0.5 and h[3] == 0.5


def test_histogram_bins_are_half_open():
    h = window_histogram(np.array([9.0, 10.0, 10.999999]))
    assert h[9] == 1 and h[10] == 2


def test_tfdm_histogram_mean_over_windows():
    hist = tfdm_histogram([fake_modes([10.3, -10.3]), fake_modes([20.1, -20.1, 9.0, -9.0])])
    assert hist.counts[10] == 1.0 and hist.counts[9] == 1.0 and hist.counts[20] == 1.0


def test_band_counts_top_band_closed():
    c = window_band_counts(np.array([0.5, 80.0, 250.0, -300.0, 13.0]))
    assert list(c) == [1, 0, 0, 0, 1, 0, 3]


def test_band_features_from_histogram_agree():
    sets = [fake_modes(np.random.default_rng(i).uniform(-260, 260, 8), seed=i) for i in range(5)]
    direct = tfdm_band_features(sets)
    via_hist = tfdm_band_features(tfdm_histogram(sets))
    assert np.allclose(direct, via_hist)
    assert direct.sum() == pytest.approx(8.0)


def test_histogram_route_needs_integer_edges():
    from dmfreq.spectrum import BandDef
    with pytest.raises(ValueError):
        tfdm_band_features(TfdmHistogram(np.zeros(250)), [BandDef("x", 0.5, 2)])


def test_sdm_invariants():
    ms = fake_modes([5.0, -5.0, 11.0, -11.0], p=4)
    s = window_sdm(ms.modes_p)
    assert np.allclose(s, s.conj().T)
    assert np.trace(s).real == pytest.approx(4.0)
    assert np.all(np.linalg.eigvalsh(s) > -1e-12)
    f = sdm_features([ms, fake_modes([1.0], p=4, seed=2)])
    assert f.sn.shape == (4,) and f.se.shape == (6,)
    assert np.all(f.se >= 0)


def test_sdm_single_mode_diag_sums_to_one():
    s = window_sdm(np.array([[3.0], [4.0]], dtype=complex))
    assert np.allclose(np.diag(s).real, [9 / 25, 16 / 25])


def test_order_free_mean_is_permutation_invariant_bitwise():
    rng = np.random.default_rng(0)
    a = rng.standard_normal((60, 7)) * 10.0 ** rng.integers(-8, 8, (60, 7))
    ref = order_free_mean(a)
    for s in range(5):
        assert np.array_equal(order_free_mean(a[np.random.default_rng(s).permutation(60)]), ref)


def test_layout_names():
    ch = ("a", "b", "c")
    assert feature_layout("amp", ch)[:2] == ("amp_a_low-delta", "amp_a_high-delta")
    assert feature_layout("sedm", ch) == ("se_a_b", "se_a_c", "se_b_c")
    assert len(feature_layout("sdm+tfdm", ch)) == 3 + 3 + 7
    with pytest.raises(ValueError):
        normalize_kind("psd")


def _subject(seed=0, n=4, p=3):
    rng = np.random.default_rng(seed)
    t = np.arange(500) * DT
    ws = [SignalWindow(np.sin(2 * np.pi * 10 * t) + 0.1 * rng.standard_normal((p, 500)), DT)
          for _ in range(n)]
    return SubjectRecord("s1", "g", ws)


def test_subject_features_shapes_and_window_order():
    sr = _subject()
    for kind, size in [("amplitude", 21), ("sndm", 3), ("sedm", 3), ("tfdm", 7), ("sdm+tfdm", 13)]:
        v = subject_features(sr, kind, 4)
        assert v.values.shape == (size,) and len(v.layout) == size
    rev = SubjectRecord("s1", "g", sr.windows[::-1])
    assert np.array_equal(subject_features(sr, "tfdm", 4).values,
                          subject_features(rev, "tfdm", 4).values)


def test_tfdm_counts_sum_to_k():
    v = subject_features(_subject(), "tfdm", 6).values
    assert v.sum() == pytest.approx(6.0)


def test_cache_matches_direct_and_parallel():
    recs = [_subject(i) for i in range(3)]
    for i, r in enumerate(recs):
        r.subject_id = f"s{i}"
    a = FeatureCache().fill(recs, ["tfdm", "amplitude"], [2, "full"])
    b = FeatureCache().fill(recs, ["tfdm", "amplitude"], [2, "full"], jobs=2)
    for r in recs:
        for key in [(r.subject_id, "tfdm", 2), (r.subject_id, "tfdm", "full"),
                    (r.subject_id, "amplitude", None)]:
            assert np.array_equal(a[key], b[key])
        assert np.array_equal(a[(r.subject_id, "tfdm", 2)],
                              subject_features(r, "tfdm", 2).values)
    assert np.array_equal(a.getter("amplitude")("s0", 99), a[("s0", "amplitude", None)])
