"""Recording I/O (CSV + JSON sidecar, DMK1 binary, EDF) and windowing.

DMK1 layout, all little-endian::

    b"DMK1" | u32 P | u32 N | f64 fs | P*N f64 samples, channel-major

Subject id, group and channel names for DMK1 and CSV live in a JSON
sidecar next to the data file (``<stem>.json``).
"""
from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .dmd import SignalWindow

DMK1_MAGIC = b"DMK1"
_DMK1_HEADER = struct.Struct("<4sIId")


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True, eq=False)
class Recording:
    subject_id: str
    group: str | None
    fs: float
    channel_names: tuple[str, ...]
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 2:
            raise DataError(f"samples must be channels x time, got shape {samples.shape}")
        if not self.fs > 0:
            raise DataError(f"sampling rate must be positive, got {self.fs}")
        names = tuple(self.channel_names)
        if len(names) != samples.shape[0]:
            raise DataError(f"{len(names)} channel names for {samples.shape[0]} channels")
        if len(set(names)) != len(names):
            raise DataError("channel names must be unique")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "channel_names", names)

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


def default_names(p: int) -> tuple[str, ...]:
    return tuple(f"ch{i + 1}" for i in range(p))


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def _read_sidecar(path, required: bool) -> dict:
    sc = sidecar_path(path)
    if not sc.exists():
        if required:
            raise DataError(f"missing metadata sidecar {sc}")
        return {}
    try:
        return json.loads(sc.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{sc}: invalid JSON ({exc})") from exc


def _write_sidecar(rec: Recording, path) -> None:
    doc = {"subject_id": rec.subject_id, "group": rec.group, "fs": rec.fs,
           "channel_names": list(rec.channel_names)}
    sidecar_path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_csv(rec: Recording, path) -> None:
    """Header of channel names, one row per sample, shortest round-trip decimals."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(rec.channel_names)
        for row in rec.samples.T:
            w.writerow([repr(float(v)) for v in row])
    _write_sidecar(rec, path)


def read_csv(path) -> Recording:
    path = Path(path)
    meta = _read_sidecar(path, required=True)
    if "fs" not in meta:
        raise DataError(f"{sidecar_path(path)}: sidecar lacks 'fs'")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for r, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}")
            vals = []
            for c, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(f"{path}: row {r}, column {c}: non-numeric cell {cell!r}") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}: row {r}, column {c}: non-finite value {cell!r}")
                vals.append(v)
            rows.append(vals)
    samples = np.array(rows, dtype=float).reshape(len(rows), len(header)).T
    return Recording(str(meta.get("subject_id", path.stem)), meta.get("group"),
                     float(meta["fs"]), tuple(header), samples)


def write_dmk1(rec: Recording, path) -> None:
    path = Path(path)
    p, n = rec.samples.shape
    with open(path, "wb") as fh:
        fh.write(_DMK1_HEADER.pack(DMK1_MAGIC, p, n, float(rec.fs)))
        fh.write(np.ascontiguousarray(rec.samples, dtype="<f8").tobytes())
    _write_sidecar(rec, path)


def read_dmk1(path) -> Recording:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _DMK1_HEADER.size:
        raise DataError(f"{path}: file shorter than the {_DMK1_HEADER.size}-byte header")
    magic, p, n, fs = _DMK1_HEADER.unpack_from(raw)
    if magic != DMK1_MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    expected = _DMK1_HEADER.size + 8 * p * n
    if len(raw) != expected:
        raise DataError(f"{path}: expected {expected} bytes, found {len(raw)}")
    samples = np.frombuffer(raw, dtype="<f8", offset=_DMK1_HEADER.size).reshape(p, n).astype(float)
    meta = _read_sidecar(path, required=False)
    names = tuple(meta.get("channel_names") or default_names(p))
    return Recording(str(meta.get("subject_id", path.stem)), meta.get("group"), float(fs),
                     names, samples)


# EDF: 256-byte fixed header, then ns blocks of per-signal fields
_EDF_MAIN = [("version", 8), ("patient", 80), ("recording", 80), ("startdate", 8),
             ("starttime", 8), ("header_bytes", 8), ("reserved", 44), ("n_records", 8),
             ("record_duration", 8), ("ns", 4)]
_EDF_SIGNAL = [("label", 16), ("transducer", 80), ("physical_dimension", 8),
               ("physical_min", 8), ("physical_max", 8), ("digital_min", 8),
               ("digital_max", 8), ("prefiltering", 80), ("n_samples", 8), ("reserved", 32)]


def _edf_field(raw: bytes, offset: int, width: int, name: str, kind=str):
    chunk = raw[offset : offset + width]
    if len(chunk) < width:
        raise DataError(f"EDF header truncated at byte {offset} (field {name!r})")
    text = chunk.decode("ascii", errors="replace").strip()
    if kind is str:
        return text
    try:
        return kind(text)
    except ValueError:
        raise DataError(f"EDF field {name!r} at byte {offset}: cannot parse {text!r}") from None


def read_edf(path, drop: Sequence[str] = ()) -> Recording:
    """Read an EDF file into a Recording (physical units).

    Channels named in ``drop`` (and any ``EDF Annotations`` signal) are
    discarded before the equal-sampling-rate check.
    """
    path = Path(path)
    raw = path.read_bytes()
    off = 0
    head = {}
    for name, width in _EDF_MAIN:
        kind = int if name in ("header_bytes", "n_records", "ns") else (
            float if name == "record_duration" else str)
        head[name] = _edf_field(raw, off, width, name, kind)
        off += width
    if head["reserved"].startswith("EDF+D"):
        raise DataError(f"{path}: discontinuous EDF+D files are not supported")
    ns = head["ns"]
    if ns < 1:
        raise DataError(f"{path}: no signals declared (byte 252)")
    if head["header_bytes"] != 256 * (ns + 1):
        raise DataError(f"EDF field 'header_bytes' at byte 184: {head['header_bytes']} "
                        f"!= 256 * (ns + 1) = {256 * (ns + 1)}")
    sig = {name: [] for name, _ in _EDF_SIGNAL}
    for name, width in _EDF_SIGNAL:
        kind = float if name in ("physical_min", "physical_max", "digital_min", "digital_max") else (
            int if name == "n_samples" else str)
        for _ in range(ns):
            sig[name].append(_edf_field(raw, off, width, name, kind))
            off += width
    per_record = np.array(sig["n_samples"], dtype=int)
    record_bytes = 2 * int(per_record.sum())
    data_bytes = len(raw) - off
    n_rec = head["n_records"]
    if n_rec < 0:
        n_rec = data_bytes // record_bytes
    if data_bytes < n_rec * record_bytes:
        raise DataError(f"{path}: truncated data, expected {n_rec * record_bytes} bytes "
                        f"({n_rec} records x {record_bytes}), found {data_bytes}")
    digital = np.frombuffer(raw, dtype="<i2", count=n_rec * record_bytes // 2, offset=off)
    digital = digital.reshape(n_rec, -1) if n_rec else digital.reshape(0, int(per_record.sum()))
    bounds = np.concatenate([[0], np.cumsum(per_record)])
    drop = set(drop)
    unknown = drop.difference(sig["label"])
    if unknown:
        raise DataError(f"unknown channel(s) {sorted(unknown)}; valid: {sig['label']}")
    keep = [i for i, lab in enumerate(sig["label"])
            if lab not in drop and lab != "EDF Annotations"]
    if not keep:
        raise DataError(f"{path}: no data channels left")
    rates = {per_record[i] for i in keep}
    if len(rates) > 1:
        raise DataError(f"{path}: mixed sampling rates {sorted(rates)} samples/record; "
                        "drop channels to make them equal")
    channels = []
    for i in keep:
        d = digital[:, bounds[i] : bounds[i + 1]].ravel().astype(float)
        pmin, pmax = sig["physical_min"][i], sig["physical_max"][i]
        dmin, dmax = sig["digital_min"][i], sig["digital_max"][i]
        if dmax == dmin:
            raise DataError(f"{path}: signal {sig['label'][i]!r} has digital_min == digital_max")
        gain = (pmax - pmin) / (dmax - dmin)
        channels.append((d - dmin) * gain + pmin)
    duration = head["record_duration"]
    if not duration > 0:
        raise DataError(f"EDF field 'record_duration' at byte 244: must be positive, found {duration}")
    fs = per_record[keep[0]] / duration
    meta = _read_sidecar(path, required=False)
    subject = meta.get("subject_id") or path.stem
    return Recording(str(subject), meta.get("group"), float(fs),
                     tuple(sig["label"][i] for i in keep), np.array(channels))


def write_edf(rec: Recording, path, record_seconds: float = 1.0) -> None:
    """Write a plain EDF file (16-bit, per-channel physical range from the data)."""
    path = Path(path)
    per_rec = rec.fs * record_seconds
    if abs(per_rec - round(per_rec)) > 1e-9:
        raise DataError("fs * record_seconds must be an integer")
    per_rec = int(round(per_rec))
    n_rec = rec.n_samples // per_rec
    p = rec.n_channels
    dmin, dmax = -32768, 32767

    def fld(value, width):
        text = value if isinstance(value, str) else _edf_number(value, width)
        return text.encode("ascii")[:width].ljust(width)

    pmins, pmaxs = [], []
    for ch in rec.samples:
        lo, hi = float(ch.min()), float(ch.max())
        if lo == hi:
            lo, hi = lo - 1.0, hi + 1.0
        pmins.append(lo)
        pmaxs.append(hi)
    header = b"".join([fld("0", 8), fld(rec.subject_id, 80), fld(rec.group or "", 80),
                       fld("01.01.00", 8), fld("00.00.00", 8), fld(256 * (p + 1), 8),
                       fld("", 44), fld(n_rec, 8), fld(record_seconds, 8), fld(p, 4)])
    columns = [
        [fld(n, 16) for n in rec.channel_names], [fld("", 80)] * p, [fld("uV", 8)] * p,
        [fld(v, 8) for v in pmins], [fld(v, 8) for v in pmaxs],
        [fld(dmin, 8)] * p, [fld(dmax, 8)] * p, [fld("", 80)] * p,
        [fld(per_rec, 8)] * p, [fld("", 32)] * p,
    ]
    header += b"".join(b"".join(col) for col in columns)
    # physical limits are re-read from their 8-char text form; quantize against those
    pmins = [float(fld(v, 8)) for v in pmins]
    pmaxs = [float(fld(v, 8)) for v in pmaxs]
    dig = np.empty((p, n_rec * per_rec), dtype="<i2")
    for i, ch in enumerate(rec.samples[:, : n_rec * per_rec]):
        gain = (pmaxs[i] - pmins[i]) / (dmax - dmin)
        dig[i] = np.clip(np.round((ch - pmins[i]) / gain + dmin), dmin, dmax)
    body = dig.reshape(p, n_rec, per_rec).transpose(1, 0, 2).tobytes()
    path.write_bytes(header + body)
    meta = {"subject_id": rec.subject_id, "group": rec.group}
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _edf_number(value, width: int) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if v == int(v) and len(str(int(v))) <= width:
        return str(int(v))
    for prec in range(width, 0, -1):
        text = f"{v:.{prec}g}"
        if len(text) <= width:
            return text
    raise DataError(f"cannot fit {value} into {width} characters")


FORMATS = {"csv": ".csv", "dmk1": ".dmk1", "edf": ".edf"}


def read_recording(path, fmt: str | None = None, drop: Sequence[str] = ()) -> Recording:
    path = Path(path)
    fmt = fmt or {v: k for k, v in FORMATS.items()}.get(path.suffix.lower())
    if fmt == "csv":
        rec = read_csv(path)
    elif fmt == "dmk1":
        rec = read_dmk1(path)
    elif fmt == "edf":
        return read_edf(path, drop)
    else:
        raise DataError(f"{path}: unknown format")
    return drop_channels(rec, drop) if drop else rec


def write_recording(rec: Recording, path, fmt: str) -> None:
    {"csv": write_csv, "dmk1": write_dmk1, "edf": write_edf}[fmt](rec, path)


def window(rec: Recording, seconds: float = 1.0) -> list[SignalWindow]:
    """Nonoverlapping windows; a trailing partial window is dropped."""
    size = rec.fs * seconds
    if abs(size - round(size)) > 1e-9 or round(size) < 2:
        raise DataError(f"fs * seconds = {size} is not an integer sample count >= 2")
    size = int(round(size))
    n = rec.n_samples // size
    dt = 1.0 / rec.fs
    return [SignalWindow(rec.samples[:, i * size : (i + 1) * size], dt) for i in range(n)]


def drop_channels(rec: Recording, names: Sequence[str]) -> Recording:
    """Remove the named channels, keeping the order of the rest."""
    unknown = [n for n in names if n not in rec.channel_names]
    if unknown:
        raise DataError(f"unknown channel(s) {unknown}; valid names: {list(rec.channel_names)}")
    drop = set(names)
    keep = [i for i, n in enumerate(rec.channel_names) if n not in drop]
    return replace(rec, channel_names=tuple(rec.channel_names[i] for i in keep),
                   samples=rec.samples[keep])
