import numpy as np
import pytest
from scipy import stats

from dmfreq.synth import (NOISE_SD, TrialSpec, generate_dataset, generate_subject,
                          generate_trial, on_fraction, sample_times, transition_phase)
from dmfreq.ingest import window


def test_noiseless_stationary_is_exact():
    spec = TrialSpec("stationary", 3, 7, noise=False)
    x = generate_trial(spec).data
    t = sample_times()
    for i in range(2):
        want = np.sin(2 * np.pi * 10 * t + spec.eps_p[i, 0]) + np.sin(2 * np.pi * 20 * t + spec.eps_p[i, 1])
        assert np.allclose(x[i], want, atol=1e-12)
    assert np.all(x[2:] == 0)


def test_noiseless_nonstationary_gate():
    spec = TrialSpec("nonstationary", 1, 7, noise=False)
    x = generate_trial(spec).data
    t = sample_times()
    g = (np.sin(np.pi * t + spec.eps_t) > 0).astype(float)
    want = 2 * g * np.sin(2 * np.pi * 10 * t + spec.eps_p[0, 0]) + np.sin(2 * np.pi * 20 * t + spec.eps_p[0, 1])
    assert np.allclose(x[0], want, atol=1e-12)
    # off -> on: starts off, ends on
    assert g[0] == 0 and g[-1] == 1


def test_pairs_share_transition_time_with_opposite_direction():
    n = 100
    for j in (1, 17, 50):
        a = TrialSpec("nonstationary", j, 0, n)
        b = TrialSpec("nonstationary", j + 50, 0, n)
        assert a.direction == "off->on" and b.direction == "on->off"
        ga = (np.sin(np.pi * sample_times() + a.eps_t) > 0)
        gb = (np.sin(np.pi * sample_times() + b.eps_t) > 0)
        assert np.array_equal(ga, ~gb)


def test_on_fraction_statistics():
    fr = np.array([on_fraction(TrialSpec("nonstationary", j, 0).eps_t) for j in range(1, 101)])
    assert abs(fr.mean() - 0.5) <= 0.03
    assert fr.min() >= 0.1 and fr.max() <= 0.9


def test_transition_phase_uniform():
    ph = np.array([transition_phase(0, j) for j in range(1, 2001)])
    assert np.all((ph > -0.9 * np.pi) & (ph < -0.1 * np.pi))
    u = (ph + 0.9 * np.pi) / (0.8 * np.pi)
    assert stats.kstest(u, "uniform").pvalue > 0.01


def test_signal_phases_uniform():
    eps = np.concatenate([TrialSpec("stationary", j, 1, 300).eps_p.ravel() for j in range(1, 301)])
    assert stats.kstest((eps + np.pi) / (2 * np.pi), "uniform").pvalue > 0.01


def test_shared_phase():
    spec = TrialSpec("stationary", 1, 0, shared_phase=True)
    assert np.array_equal(spec.eps_p[:, 0], spec.eps_p[:, 1])


def test_noise_sd():
    x = np.concatenate([w.data[2:].ravel() for w in generate_dataset("stationary", 20, 3)])
    assert abs(x.std() - NOISE_SD) <= 0.05
    assert abs(x.mean()) < 0.05


def test_deterministic_and_order_free():
    a = generate_dataset("nonstationary", 6, 11)
    b = generate_dataset("nonstationary", 6, 11, jobs=2)
    c = generate_trial(TrialSpec("nonstationary", 4, 11, 6))
    assert all(np.array_equal(x.data, y.data) for x, y in zip(a, b))
    assert np.array_equal(a[3].data, c.data)
    assert not np.array_equal(a[0].data, generate_dataset("nonstationary", 6, 12)[0].data)


def test_bad_specs():
    with pytest.raises(ValueError):
        TrialSpec("drifting", 1, 0)
    with pytest.raises(ValueError):
        TrialSpec("stationary", 0, 0)
    with pytest.raises(ValueError):
        generate_dataset("stationary", 0)


def test_subject_windows_are_trials():
    rec = generate_subject("stationary", 2, n_windows=3, master_seed=5)
    ws = window(rec)
    assert rec.samples.shape == (10, 1500) and len(ws) == 3
    assert rec.subject_id == "sta002" and rec.group == "stationary"
    other = generate_subject("stationary", 3, n_windows=3, master_seed=5)
    assert not np.array_equal(rec.samples, other.samples)
