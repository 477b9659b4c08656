"""Synthetic 10-channel test signals with a stationary or gated 10 Hz rhythm.

Channels 1-2 carry a 10 Hz and a 20 Hz sinusoid on top of white noise
(sd 2.5); channels 3-10 are noise only. In the nonstationary condition the
10 Hz wave has amplitude 2 and is switched by a single on/off transition
between 0.1 s and 0.9 s. Trials ``j <= n/2`` switch off -> on; trial
``j + n/2`` switches on -> off at the same instant.

Every trial draws from its own PCG64 substream keyed by
``(master_seed, condition, j)``, so datasets do not depend on generation
order. Normal deviates are produced by inverse-CDF (``ndtri``) on 53-bit
uniforms.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.special import ndtri

from .dmd import SignalWindow

FS = 500.0
N_SAMPLES = 500
N_CHANNELS = 10
SIGNAL_CHANNELS = 2
NOISE_SD = 2.5

Condition = Literal["stationary", "nonstationary"]
CONDITIONS: tuple[str, ...] = ("stationary", "nonstationary")
_COND_CODE = {"stationary": 0, "nonstationary": 1}
_TRANSITION_STREAM = 2


def _generator(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(key))))


def _uniform53(rng: np.random.Generator, size) -> np.ndarray:
    """Uniforms on the open interval (0, 1) with 53-bit resolution."""
    return (rng.integers(0, 2**53, size=size, dtype=np.uint64).astype(np.float64) + 0.5) / 2.0**53


def _normal(rng: np.random.Generator, size) -> np.ndarray:
    return ndtri(_uniform53(rng, size))


def sample_times(n: int = N_SAMPLES, fs: float = FS) -> np.ndarray:
    return np.arange(n) / fs


def transition_phase(master_seed: int, pair_index: int) -> float:
    """Off -> on gate phase, uniform on (-0.9 pi, -0.1 pi)."""
    u = _uniform53(_generator(master_seed, _TRANSITION_STREAM, pair_index), 1)[0]
    return float(-0.9 * np.pi + 0.8 * np.pi * u)


def gate(t: np.ndarray, eps_t: float) -> np.ndarray:
    """``(1 + sign(sin(pi t + eps_t))) / 2`` restricted to {0, 1}."""
    return (np.sin(np.pi * t + eps_t) > 0).astype(float)


def on_fraction(eps_t: float, n: int = N_SAMPLES, fs: float = FS) -> float:
    return float(gate(sample_times(n, fs), eps_t).mean())


@dataclass(frozen=True)
class TrialSpec:
    """Parameters of one simulated trial (``j`` is 1-based)."""

    condition: str
    j: int
    seed: int
    n_trials: int = 100
    shared_phase: bool = False
    noise: bool = True
    eps_p: np.ndarray = field(init=False, repr=False, compare=False)
    eps_t: float | None = field(init=False, compare=False)

    def __post_init__(self):
        if self.condition not in _COND_CODE:
            raise ValueError(f"unknown condition {self.condition!r}")
        if self.n_trials < 1 or not 1 <= self.j <= self.n_trials:
            raise ValueError(f"trial index {self.j} outside [1, {self.n_trials}]")
        rng = self.rng()
        u = _uniform53(rng, (SIGNAL_CHANNELS, 2))
        eps_p = -np.pi + 2 * np.pi * u
        if self.shared_phase:
            eps_p[:, 1] = eps_p[:, 0]
        object.__setattr__(self, "eps_p", eps_p)
        eps_t = None
        if self.condition == "nonstationary":
            half = (self.n_trials + 1) // 2
            if self.j <= half:
                eps_t = transition_phase(self.seed, self.j)
            else:
                # shifting by pi complements the gate: same transition time, on -> off
                eps_t = transition_phase(self.seed, self.j - half) + np.pi
        object.__setattr__(self, "eps_t", eps_t)

    @property
    def direction(self) -> str | None:
        if self.condition != "nonstationary":
            return None
        return "off->on" if self.j <= (self.n_trials + 1) // 2 else "on->off"

    def rng(self) -> np.random.Generator:
        """Fresh substream for this trial; phases are drawn first, then noise."""
        return _generator(self.seed, _COND_CODE[self.condition], self.j)


def generate_trial(spec: TrialSpec) -> SignalWindow:
    t = sample_times()
    rng = spec.rng()
    _uniform53(rng, (SIGNAL_CHANNELS, 2))  # phases, already held on spec
    x = np.zeros((N_CHANNELS, N_SAMPLES))
    if spec.noise:
        x += NOISE_SD * _normal(rng, (N_CHANNELS, N_SAMPLES))
    if spec.condition == "stationary":
        amp10, g = 1.0, 1.0
    else:
        amp10, g = 2.0, gate(t, spec.eps_t)
    for i in range(SIGNAL_CHANNELS):
        p10, p20 = spec.eps_p[i]
        x[i] += amp10 * g * np.sin(2 * np.pi * 10 * t + p10) + np.sin(2 * np.pi * 20 * t + p20)
    return SignalWindow(x, 1.0 / FS)


def _one(args) -> SignalWindow:
    condition, j, n, seed, shared, noise = args
    return generate_trial(TrialSpec(condition, j, seed, n, shared, noise))


def trial_specs(condition: str, n_trials: int, master_seed: int, *,
                shared_phase: bool = False, noise: bool = True) -> list[TrialSpec]:
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    return [TrialSpec(condition, j, master_seed, n_trials, shared_phase, noise)
            for j in range(1, n_trials + 1)]


def generate_dataset(condition: str, n_trials: int = 100, master_seed: int = 0, *,
                     shared_phase: bool = False, noise: bool = True,
                     jobs: int = 1) -> list[SignalWindow]:
    """All trials of one condition, in trial order."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    if condition not in _COND_CODE:
        raise ValueError(f"unknown condition {condition!r}")
    tasks = [(condition, j, n_trials, master_seed, shared_phase, noise)
             for j in range(1, n_trials + 1)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(_one, tasks, chunksize=8))
    return [_one(a) for a in tasks]


def subject_seed(master_seed: int, condition: str, subject: int) -> int:
    """Independent master seed for one synthetic subject."""
    ss = np.random.SeedSequence([master_seed, 3, _COND_CODE[condition], subject])
    return int(ss.generate_state(1, np.uint32)[0])


def generate_subject(condition: str, subject: int, n_windows: int = 60, master_seed: int = 0,
                     *, shared_phase: bool = False, subject_id: str | None = None):
    """One synthetic subject: ``n_windows`` one-second trials of a single condition.

    Returns an :class:`~dmfreq.ingest.Recording` whose consecutive 500-sample
    windows are the trials in order.
    """
    from .ingest import Recording

    ws = generate_dataset(condition, n_windows, subject_seed(master_seed, condition, subject),
                          shared_phase=shared_phase)
    sid = subject_id or f"{condition[:3]}{subject:03d}"
    return Recording(sid, condition, FS, tuple(f"ch{i + 1}" for i in range(N_CHANNELS)),
                     np.concatenate([w.data for w in ws], axis=1))
