"""Per-window DM statistics and per-subject feature vectors.

Mode frequencies are folded to ``|f|`` and every retained mode is counted,
so both members of a conjugate pair land in the same bin. Per-subject
averages are taken over sorted per-window values, which makes them
independent of window order down to the last bit.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dmd import ModeSet, SignalWindow, WindowDecomposition
from .spectrum import CANONICAL_BANDS, BandDef, amplitude_spectra, band_average

N_HIST_BINS = 250
HIST_EDGES = np.arange(N_HIST_BINS + 1, dtype=float)

KINDS = ("amplitude", "sndm", "sedm", "tfdm", "sdm+tfdm")
DMD_KINDS = ("sndm", "sedm", "tfdm", "sdm+tfdm")


class ZeroModeWarning(UserWarning):
    """A mode column had zero norm and was left out of the sDM matrix."""


def normalize_kind(kind: str) -> str:
    k = kind.strip().lower().replace("_", "+").replace(" ", "")
    aliases = {"amp": "amplitude", "sdm+tf": "sdm+tfdm", "tfdm+sdm": "sdm+tfdm", "sdmtfdm": "sdm+tfdm"}
    k = aliases.get(k, k)
    if k not in KINDS:
        raise ValueError(f"unknown feature kind {kind!r}; choose from {', '.join(KINDS)}")
    return k


def order_free_mean(stack: np.ndarray) -> np.ndarray:
    """Mean over axis 0 that does not depend on the order of the rows."""
    stack = np.asarray(stack)
    if np.iscomplexobj(stack):
        return order_free_mean(stack.real) + 1j * order_free_mean(stack.imag)
    return np.sort(stack, axis=0).sum(axis=0) / stack.shape[0]


def _freqs_of(ms_or_freqs) -> np.ndarray:
    if isinstance(ms_or_freqs, ModeSet):
        return ms_or_freqs.freqs
    return np.asarray(ms_or_freqs, dtype=float)


def window_histogram(freqs, normalize: bool = False) -> np.ndarray:
    """Counts of ``|f|`` in 1 Hz bins ``[n, n+1)`` over 0-250 Hz.

    ``|f| >= 250`` goes to the last bin. With ``normalize`` counts are
    divided by the number of modes.
    """
    f = np.abs(_freqs_of(freqs))
    idx = np.minimum(np.floor(f).astype(int), N_HIST_BINS - 1)
    counts = np.bincount(idx, minlength=N_HIST_BINS).astype(float)
    if normalize and f.size:
        counts /= f.size
    return counts


@dataclass(frozen=True)
class TfdmHistogram:
    counts: np.ndarray
    bin_edges: np.ndarray = field(default_factory=lambda: HIST_EDGES.copy())


def tfdm_histogram(modesets: Sequence, normalize: bool = False) -> TfdmHistogram:
    """Mean per-window mode counts in 1 Hz bins."""
    if len(modesets) == 0:
        raise ValueError("tfdm_histogram needs at least one window")
    per_window = np.array([window_histogram(m, normalize) for m in modesets])
    return TfdmHistogram(order_free_mean(per_window))


def window_band_counts(freqs, bands: Sequence[BandDef] = CANONICAL_BANDS,
                       normalize: bool = False) -> np.ndarray:
    f = np.abs(_freqs_of(freqs))
    top = max(b.hi for b in bands)
    out = np.empty(len(bands))
    for i, b in enumerate(bands):
        inside = (f >= b.lo) & (f < b.hi)
        if b.hi == top:
            inside |= f >= b.hi
        out[i] = np.count_nonzero(inside)
    if normalize and f.size:
        out /= f.size
    return out


def tfdm_band_features(source, bands: Sequence[BandDef] = CANONICAL_BANDS,
                       normalize: bool = False) -> np.ndarray:
    """Mean number of modes per window falling in each band.

    ``source`` is a list of per-window ModeSets (or frequency arrays) or a
    :class:`TfdmHistogram` (integer band edges only).
    """
    if isinstance(source, TfdmHistogram):
        out = np.empty(len(bands))
        for i, b in enumerate(bands):
            if b.lo != int(b.lo) or b.hi != int(b.hi):
                raise ValueError("histogram route needs integer band edges")
            out[i] = source.counts[int(b.lo) : int(b.hi)].sum()
        return out
    if len(source) == 0:
        return np.zeros(len(bands))
    return order_free_mean(np.array([window_band_counts(m, bands, normalize) for m in source]))


def window_sdm(modes_p: np.ndarray) -> np.ndarray:
    """``phi phi^H`` of the column-normalized truncated modes."""
    norms = np.linalg.norm(modes_p, axis=0)
    keep = norms > 0
    if not keep.all():
        warnings.warn(f"{np.count_nonzero(~keep)} zero-norm mode column(s) skipped",
                      ZeroModeWarning, stacklevel=2)
    phi = modes_p[:, keep] / norms[keep]
    return phi @ phi.conj().T


@dataclass(frozen=True)
class SdmFeatures:
    matrix: np.ndarray

    @property
    def sn(self) -> np.ndarray:
        return np.abs(np.diag(self.matrix))

    @property
    def se(self) -> np.ndarray:
        iu = np.triu_indices(self.matrix.shape[0], 1)
        return np.abs(self.matrix[iu])


def sdm_features(modesets: Sequence[ModeSet]) -> SdmFeatures:
    if len(modesets) == 0:
        raise ValueError("sdm_features needs at least one window")
    mats = np.array([window_sdm(m.modes_p) for m in modesets])
    return SdmFeatures(order_free_mean(mats))


@dataclass(frozen=True)
class FeatureVector:
    kind: str
    values: np.ndarray
    layout: tuple[str, ...]

    def __post_init__(self):
        if len(self.layout) != len(self.values):
            raise ValueError("layout and values differ in length")


@dataclass
class SubjectRecord:
    """A subject's group label and its analysis windows."""

    subject_id: str
    group: str
    windows: list[SignalWindow]
    channel_names: tuple[str, ...] | None = None

    def names(self) -> tuple[str, ...]:
        if self.channel_names is not None:
            return tuple(self.channel_names)
        return tuple(f"ch{i + 1}" for i in range(self.windows[0].p))


def feature_layout(kind: str, channels: Sequence[str],
                   bands: Sequence[BandDef] = CANONICAL_BANDS) -> tuple[str, ...]:
    kind = normalize_kind(kind)
    if kind == "amplitude":
        return tuple(f"amp_{c}_{b.name}" for c in channels for b in bands)
    sn = tuple(f"sn_{c}" for c in channels)
    n = len(channels)
    se = tuple(f"se_{channels[i]}_{channels[j]}" for i in range(n) for j in range(i + 1, n))
    tf = tuple(f"tfdm_{b.name}" for b in bands)
    return {"sndm": sn, "sedm": se, "tfdm": tf, "sdm+tfdm": sn + se + tf}[kind]


def _assemble(kind: str, tf: np.ndarray | None, sdm: SdmFeatures | None) -> np.ndarray:
    parts = {
        "sndm": lambda: [sdm.sn],
        "sedm": lambda: [sdm.se],
        "tfdm": lambda: [tf],
        "sdm+tfdm": lambda: [sdm.sn, sdm.se, tf],
    }[kind]()
    return np.concatenate(parts)


class SubjectFeatureBuilder:
    """Computes one subject's features for several kinds and ``k`` values.

    Each window is decomposed once; every ``k`` then reuses that SVD.
    """

    def __init__(self, record: SubjectRecord, bands: Sequence[BandDef] = CANONICAL_BANDS,
                 normalize_counts: bool = False, first_p_only: bool = False):
        if not record.windows:
            raise ValueError(f"subject {record.subject_id!r} has no windows")
        self.record = record
        self.bands = tuple(bands)
        self.normalize_counts = normalize_counts
        self.first_p_only = first_p_only
        self._decomp: list[WindowDecomposition] | None = None

    def decompositions(self) -> list[WindowDecomposition]:
        if self._decomp is None:
            self._decomp = [WindowDecomposition.from_window(w) for w in self.record.windows]
        return self._decomp

    def amplitude(self) -> np.ndarray:
        per_window = np.array([band_average(amplitude_spectra(w.data), self.bands)
                               for w in self.record.windows])
        return order_free_mean(per_window).ravel()

    def dmd(self, kind: str, k) -> np.ndarray:
        kind = normalize_kind(kind)
        decs = self.decompositions()
        tf = sdm = None
        if kind in ("tfdm", "sdm+tfdm"):
            if self.first_p_only:
                freqs = [d.mode_set(k, True).freqs for d in decs]
            else:
                freqs = [np.angle(d.eigenvalues(k)) / (2 * np.pi * d.dt) for d in decs]
            tf = tfdm_band_features(freqs, self.bands, self.normalize_counts)
        if kind != "tfdm":
            sdm = sdm_features([d.mode_set(k, self.first_p_only) for d in decs])
        return _assemble(kind, tf, sdm)

    def vector(self, kind: str, k=None) -> FeatureVector:
        kind = normalize_kind(kind)
        values = self.amplitude() if kind == "amplitude" else self.dmd(kind, k)
        return FeatureVector(kind, values, feature_layout(kind, self.record.names(), self.bands))


def subject_features(sr: SubjectRecord, kind: str, k=None,
                     bands: Sequence[BandDef] = CANONICAL_BANDS) -> FeatureVector:
    """Feature vector of one subject, averaged over its windows."""
    return SubjectFeatureBuilder(sr, bands).vector(kind, k)


def _builder_task(args):
    record, kinds, ks, bands, normalize_counts, first_p_only = args
    b = SubjectFeatureBuilder(record, bands, normalize_counts, first_p_only)
    out = {}
    for kind in kinds:
        if kind == "amplitude":
            out[(kind, None)] = b.amplitude()
        else:
            for k in ks:
                out[(kind, k)] = b.dmd(kind, k)
    return record.subject_id, out


class FeatureCache:
    """Feature table keyed by ``(subject_id, kind, k)``.

    ``k`` is ``None`` for the amplitude kind, which does not depend on it.
    """

    def __init__(self, bands: Sequence[BandDef] = CANONICAL_BANDS,
                 normalize_counts: bool = False, first_p_only: bool = False):
        self.bands = tuple(bands)
        self.normalize_counts = normalize_counts
        self.first_p_only = first_p_only
        self._table: dict[tuple[str, str, object], np.ndarray] = {}

    def __contains__(self, key) -> bool:
        return key in self._table

    def __getitem__(self, key) -> np.ndarray:
        return self._table[key]

    def put(self, subject_id: str, kind: str, k, values: np.ndarray) -> None:
        self._table[(subject_id, normalize_kind(kind), k)] = np.asarray(values, dtype=float)

    def fill(self, records: Iterable[SubjectRecord], kinds: Sequence[str], ks: Sequence,
             jobs: int = 1) -> "FeatureCache":
        """Compute every missing ``(subject, kind, k)`` entry."""
        kinds = tuple(dict.fromkeys(normalize_kind(k) for k in kinds))
        tasks = []
        for r in records:
            need_kinds = [kd for kd in kinds
                          if any((r.subject_id, kd, k) not in self._table
                                 for k in ((None,) if kd == "amplitude" else ks))]
            if need_kinds:
                tasks.append((r, tuple(need_kinds), tuple(ks), self.bands,
                              self.normalize_counts, self.first_p_only))
        if jobs > 1 and len(tasks) > 1:
            from concurrent.futures import ProcessPoolExecutor
            with ProcessPoolExecutor(jobs) as pool:
                results = list(pool.map(_builder_task, tasks))
        else:
            results = [_builder_task(t) for t in tasks]
        for sid, out in results:
            for (kind, k), v in out.items():
                self._table.setdefault((sid, kind, k), v)
        return self

    def getter(self, kind: str):
        kind = normalize_kind(kind)
        if kind == "amplitude":
            return lambda sid, k: self._table[(sid, kind, None)]
        return lambda sid, k: self._table[(sid, kind, k)]


def write_features_csv(path, rows: Sequence[tuple[str, FeatureVector]]) -> None:
    """One row per subject; header is ``subject_id`` plus the layout names."""
    if not rows:
        raise ValueError("no feature rows to write")
    layout = rows[0][1].layout
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("subject_id",) + layout)
        for sid, fv in rows:
            if fv.layout != layout:
                raise ValueError("feature rows have mismatched layouts")
            w.writerow([sid] + [repr(float(v)) for v in fv.values])
