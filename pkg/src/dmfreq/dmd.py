"""Exact DMD on delay-stacked signal windows.

A window of ``P`` channels and ``L`` samples is Hankel-stacked ``h`` times
so the observation dimension ``hP`` exceeds the snapshot count ``L - h``.
The propagator is fit through a rank-``k`` SVD of the snapshot matrix and
each eigenvalue is turned into a frequency ``arg(lambda) / (2 pi dt)`` and a
per-second growth factor ``|lambda| ** (1 / dt)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg import DEFAULT_RCOND, eig_dense, pinv_from_svd, thin_svd


class RankWarning(UserWarning):
    """Requested SVD truncation exceeded the numerical rank and was clamped."""


@dataclass(frozen=True)
class SignalWindow:
    """``P x L`` real samples with sample interval ``dt`` (seconds)."""

    data: np.ndarray
    dt: float

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise ValueError(f"window data must be 2-D (channels x samples), got {data.shape}")
        if data.shape[1] < 2:
            raise ValueError("window needs at least 2 samples")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(data)):
            raise ValueError("window contains non-finite samples")
        object.__setattr__(self, "data", data)

    @property
    def p(self) -> int:
        return self.data.shape[0]

    @property
    def l(self) -> int:  # noqa: E743
        return self.data.shape[1]

    @property
    def fs(self) -> float:
        return 1.0 / self.dt


def stack_factor(p: int, l: int) -> int:  # noqa: E741
    """Smallest integer ``h >= 1`` with ``h >= (l + 1) / (p + 1)``."""
    return max(1, -(-(l + 1) // (p + 1)))


@dataclass(frozen=True)
class StackedPair:
    h: int
    p: int
    x: np.ndarray
    xprime: np.ndarray


def stack(w: SignalWindow) -> StackedPair:
    """Build the delay-stacked snapshot matrices ``X`` and ``X'``.

    Row ``b * P + c`` of ``X`` holds channel ``c`` delayed by ``b`` samples,
    so column ``j`` of ``X`` is ``[x_j; x_{j+1}; ...; x_{j+h-1}]``.
    """
    h = stack_factor(w.p, w.l)
    ncols = w.l - h
    if ncols < 2:
        raise ValueError(f"window of {w.l} samples too short for {w.p} channels (h={h})")
    d = w.data
    x = np.concatenate([d[:, b : b + ncols] for b in range(h)], axis=0)
    xprime = np.concatenate([d[:, b + 1 : b + 1 + ncols] for b in range(h)], axis=0)
    return StackedPair(h, w.p, x, xprime)


@dataclass(frozen=True)
class ModeSet:
    """Dynamic modes of one window.

    ``modes`` spans the full stacked dimension; ``modes_p`` keeps the first
    ``P`` rows (one delay block) for spatial features.
    """

    eigenvalues: np.ndarray
    modes: np.ndarray
    amps: np.ndarray
    dt: float
    p: int
    clamped: bool = False

    @property
    def k(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def modes_p(self) -> np.ndarray:
        return self.modes[: self.p]

    @property
    def omegas(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.eigenvalues) / self.dt

    @property
    def freqs(self) -> np.ndarray:
        return np.angle(self.eigenvalues) / (2 * np.pi * self.dt)

    @property
    def decays(self) -> np.ndarray:
        return np.abs(self.eigenvalues) ** (1.0 / self.dt)


def _order_modes(lam: np.ndarray, score: np.ndarray) -> np.ndarray:
    """Descending score with each conjugate partner placed right after its mate."""
    n = lam.shape[0]
    order = np.lexsort((-lam.imag, -lam.real, -score))
    taken = np.zeros(n, dtype=bool)
    out = []
    tol = 1e-8 * max(1.0, float(np.abs(lam).max(initial=0.0)))
    for i in order:
        if taken[i]:
            continue
        taken[i] = True
        if abs(lam[i].imag) <= tol:
            out.append(i)
            continue
        free = np.flatnonzero(~taken)
        if free.size:
            j = free[np.argmin(np.abs(lam[free] - lam[i].conjugate()))]
            if abs(lam[j] - lam[i].conjugate()) <= 1e-6 * max(1.0, abs(lam[i])):
                taken[j] = True
                pair = (i, j) if lam[i].imag > 0 else (j, i)
                out.extend(pair)
                continue
        out.append(i)
    return np.asarray(out, dtype=int)


class WindowDecomposition:
    """SVD of one stacked window, reusable across truncation levels.

    The full projected operator ``U* X' V Sigma^-1`` is formed once; the
    reduced operator for any ``k`` is its leading ``k x k`` block.
    """

    def __init__(self, pair: StackedPair, dt: float, rcond: float = DEFAULT_RCOND):
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.pair = pair
        self.dt = dt
        svd = thin_svd(pair.x)
        self.rank = svd.rank(rcond)
        self.svd = svd.truncate(self.rank)
        # X' V Sigma^-1, shared by the operator and the exact modes
        self._xv = (pair.xprime @ self.svd.v) / self.svd.sigma
        self.projected = self.svd.u.conj().T @ self._xv

    @classmethod
    def from_window(cls, w: SignalWindow, rcond: float = DEFAULT_RCOND) -> "WindowDecomposition":
        return cls(stack(w), w.dt, rcond)

    @property
    def full_k(self) -> int:
        return min(self.pair.x.shape)

    def resolve_k(self, k) -> int:
        if k is None or k == "full":
            return self.full_k
        k = int(k)
        if not 1 <= k <= self.full_k:
            raise ValueError(f"k={k} outside [1, {self.full_k}] for this window geometry")
        return k

    def _clamp(self, k: int) -> tuple[int, bool]:
        if k > self.rank:
            warnings.warn(
                f"k={k} exceeds numerical rank {self.rank}; clamped", RankWarning, stacklevel=3
            )
            return self.rank, True
        return k, False

    def eigenvalues(self, k) -> np.ndarray:
        """Eigenvalues only, for frequency counting."""
        k, _ = self._clamp(self.resolve_k(k))
        if k == 0:
            return np.zeros(0, dtype=complex)
        return np.linalg.eigvals(self.projected[:k, :k]).astype(complex)

    def mode_set(self, k, first_p_only: bool = False) -> ModeSet:
        k, clamped = self._clamp(self.resolve_k(k))
        p = self.pair.p
        if k == 0:
            return ModeSet(np.zeros(0, complex), np.zeros((self.pair.x.shape[0], 0), complex),
                           np.zeros(0, complex), self.dt, p, clamped)
        eig = eig_dense(self.projected[:k, :k])
        modes = self._xv[:, :k] @ eig.vectors
        amps = pinv_from_svd(thin_svd(modes)) @ self.pair.x[:, 0]
        order = _order_modes(eig.values, np.abs(amps) * np.linalg.norm(modes, axis=0))
        if first_p_only:
            order = order[:p]
        return ModeSet(eig.values[order], modes[:, order], amps[order], self.dt, p, clamped)


def exact_dmd(sp_or_window, k, dt: float | None = None, *, first_p_only: bool = False,
              rcond: float = DEFAULT_RCOND) -> ModeSet:
    """Exact DMD with rank-``k`` truncation.

    Accepts a :class:`SignalWindow` (stacked internally) or a
    :class:`StackedPair` plus ``dt``. ``k`` may be ``"full"``. With
    ``first_p_only`` only the leading ``P`` modes are kept.
    """
    if isinstance(sp_or_window, SignalWindow):
        dec = WindowDecomposition.from_window(sp_or_window, rcond)
    else:
        if dt is None:
            raise ValueError("exact_dmd on a StackedPair needs dt")
        dec = WindowDecomposition(sp_or_window, dt, rcond)
    return dec.mode_set(k, first_p_only)


def reconstruct(ms: ModeSet, t_grid: Sequence[float]) -> np.ndarray:
    """Evaluate ``sum_k phi_k r_k^t exp(2 pi i f_k t) b_k`` on ``t_grid``."""
    t = np.asarray(t_grid, dtype=float)
    if ms.k == 0:
        return np.zeros((ms.modes.shape[0], t.size), dtype=complex)
    growth = ms.decays[:, None] ** t[None, :]
    phase = np.exp(2j * np.pi * ms.freqs[:, None] * t[None, :])
    return ms.modes @ (ms.amps[:, None] * growth * phase)
