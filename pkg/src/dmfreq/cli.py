"""Command-line front end: ``dmfreq {simulate,analyze,classify,anova}``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats as sps

from . import __version__
from .crossval import (DEFAULT_COSTS, DEFAULT_KS, HyperGrid, fmt_k, make_plans, nested_cv,
                       write_confusion_json, write_results_csv, write_summary_csv)
from .dmd import WindowDecomposition, stack_factor
from .features import (FeatureCache, SubjectRecord, normalize_kind, order_free_mean,
                       window_histogram, window_sdm)
from .ingest import (FORMATS, DataError, Recording, drop_channels, read_recording, window,
                     write_recording)
from .linalg import ConvergenceError
from .spectrum import CANONICAL_BANDS, amplitude_spectra, parse_bands, spectrum_freqs
from .stats import per_frequency_anova, write_anova_csv
from .synth import CONDITIONS, FS, generate_subject, generate_trial, on_fraction, trial_specs

log = logging.getLogger("dmfreq")

MANIFEST_SCHEMA = "dmfreq.manifest/1"
EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# helpers

def _parse_k(text: str):
    text = text.strip().lower()
    if text == "full":
        return "full"
    try:
        k = int(text)
    except ValueError:
        raise UsageError(f"invalid k {text!r}; use an integer or 'full'") from None
    if k < 1:
        raise UsageError(f"k must be >= 1, got {k}")
    return k


def _parse_list(text: str | None, conv):
    if text is None:
        return None
    return [conv(t) for t in text.split(",") if t.strip()]


def _mean_ci(values: np.ndarray, level: float = 0.95):
    """Mean and t-based confidence bounds along axis 0."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    mean = order_free_mean(values)
    if n < 2:
        return mean, mean.copy(), mean.copy()
    half = sps.t.ppf(0.5 + level / 2, n - 1) * values.std(axis=0, ddof=1) / np.sqrt(n)
    return mean, mean - half, mean + half


def _fmt(v) -> str:
    return repr(float(v))


def _write_rows(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_manifest(out: Path, command: str, config: dict) -> None:
    files = sorted(str(p.relative_to(out)) for p in out.rglob("*")
                   if p.is_file() and p.name != "manifest.json")
    doc = {"schema": MANIFEST_SCHEMA, "version": __version__, "command": command,
           "config": config, "outputs": files}
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _prepare_out(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {out}: {exc}") from None
    return out


def _dataset_files(data: str, fmt: str | None) -> list[Path]:
    d = Path(data)
    if not d.is_dir():
        raise DataError(f"{d} is not a directory")
    exts = [FORMATS[fmt]] if fmt else list(FORMATS.values())
    for ext in exts:
        files = sorted(p for p in d.iterdir() if p.suffix.lower() == ext)
        if files:
            return files
    raise DataError(f"no recordings ({', '.join(exts)}) found in {d}")


def _load(files: Sequence[Path], fmt: str | None, drop: Sequence[str]) -> list[Recording]:
    recs = [read_recording(f, fmt, drop) for f in files]
    return recs


def _windows(rec: Recording, seconds: float):
    ws = window(rec, seconds)
    if not ws:
        raise DataError(f"recording {rec.subject_id!r} is shorter than one {seconds} s window")
    return ws


def _check_k(k, p: int, l: int) -> None:  # noqa: E741
    if k == "full" or k is None:
        return
    h = stack_factor(p, l)
    full = min(h * p, l - h)
    if k > full:
        raise UsageError(f"k={k} exceeds the {full} SVD components available for "
                         f"{p} channels x {l} samples")


def _decompose(args):
    w, k, first_p = args
    return WindowDecomposition.from_window(w).mode_set(k, first_p)


# --------------------------------------------------------------------------
# simulate

def cmd_simulate(args) -> None:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if args.subjects < 0 or args.windows < 1:
        raise UsageError("--subjects must be >= 0 and --windows >= 1")
    out = _prepare_out(args.out)
    fmt = args.format
    for cond in CONDITIONS:
        cdir = out / cond
        cdir.mkdir(exist_ok=True)
        specs = trial_specs(cond, args.trials, args.seed, shared_phase=args.shared_phase)
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                windows = list(pool.map(generate_trial, specs, chunksize=8))
        else:
            windows = [generate_trial(s) for s in specs]
        meta_rows = []
        width = max(3, len(str(args.trials)))
        for spec, w in zip(specs, windows):
            sid = f"{cond}_{spec.j:0{width}d}"
            rec = Recording(sid, cond, FS, tuple(f"ch{i + 1}" for i in range(w.p)), w.data)
            write_recording(rec, cdir / f"trial_{spec.j:0{width}d}{FORMATS[fmt]}", fmt)
            meta_rows.append([spec.j, cond, spec.direction or "",
                              "" if spec.eps_t is None else _fmt(spec.eps_t),
                              "" if spec.eps_t is None else _fmt(on_fraction(spec.eps_t)),
                              *(_fmt(v) for v in spec.eps_p.ravel())])
        _write_rows(out / f"{cond}_trials.csv",
                    ["trial", "condition", "direction", "eps_t", "on_fraction",
                     "eps_p_ch1_10hz", "eps_p_ch1_20hz", "eps_p_ch2_10hz", "eps_p_ch2_20hz"],
                    meta_rows)
    if args.subjects:
        cdir = out / "cohort"
        cdir.mkdir(exist_ok=True)
        tasks = [(cond, s, args.windows, args.seed, args.shared_phase)
                 for cond in CONDITIONS for s in range(1, args.subjects + 1)]
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                recs = list(pool.map(_subject, tasks))
        else:
            recs = [_subject(t) for t in tasks]
        for rec in recs:
            write_recording(rec, cdir / f"{rec.subject_id}{FORMATS[fmt]}", fmt)
        _write_rows(out / "cohort_groups.csv", ["subject_id", "group"],
                    [[r.subject_id, r.group] for r in recs])
    _write_manifest(out, "simulate", {"seed": args.seed, "trials": args.trials, "format": fmt,
                                      "shared_phase": args.shared_phase,
                                      "subjects": args.subjects, "windows": args.windows})


def _subject(task) -> Recording:
    cond, s, n, seed, shared = task
    return generate_subject(cond, s, n, seed, shared_phase=shared)


# --------------------------------------------------------------------------
# analyze

def cmd_analyze(args) -> None:
    from .plotting import line_with_band, matrix_heatmap

    drop = _parse_list(args.drop_channels, str.strip) or []
    k = _parse_k(args.k)
    files = _dataset_files(args.data, args.format)
    recs = _load(files, args.format, drop)
    windows, names = [], recs[0].channel_names
    for rec in recs:
        if rec.channel_names != names:
            raise DataError(f"{rec.subject_id}: channel layout differs from the first recording")
        windows.extend(_windows(rec, args.window_seconds))
    p, l = windows[0].p, windows[0].l
    _check_k(k, p, l)
    channel = args.channel - 1
    if not 0 <= channel < p:
        raise UsageError(f"--channel must be in 1..{p}")

    tasks = [(w, k, args.first_p_modes) for w in windows]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            modesets = list(pool.map(_decompose, tasks, chunksize=4))
    else:
        modesets = [_decompose(t) for t in tasks]

    hists = np.array([window_histogram(ms, args.normalize_counts) for ms in modesets])
    h_mean, h_lo, h_hi = _mean_ci(hists)
    freqs = spectrum_freqs(1.0 / windows[0].dt)
    spectra = np.array([amplitude_spectra(w.data[channel : channel + 1])[0] for w in windows])
    s_mean, s_lo, s_hi = _mean_ci(spectra)
    sdm = np.abs(order_free_mean(np.array([window_sdm(ms.modes_p) for ms in modesets])))

    out = _prepare_out(args.out)
    _write_rows(out / "histogram.csv", ["bin_lo", "bin_hi", "mean", "ci_low", "ci_high"],
                [[i, i + 1, _fmt(m), _fmt(a), _fmt(b)]
                 for i, (m, a, b) in enumerate(zip(h_mean, h_lo, h_hi))])
    _write_rows(out / "spectrum.csv", ["frequency", "mean", "ci_low", "ci_high"],
                [[_fmt(f), _fmt(m), _fmt(a), _fmt(b)]
                 for f, m, a, b in zip(freqs, s_mean, s_lo, s_hi)])
    _write_rows(out / "sdm.csv", ["channel", *names],
                [[names[i], *(_fmt(v) for v in row)] for i, row in enumerate(sdm)])
    _write_rows(out / "modes.csv", ["window", "mode", "frequency", "decay", "abs_amplitude"],
                [[wi + 1, mi + 1, _fmt(f), _fmt(r), _fmt(abs(b))]
                 for wi, ms in enumerate(modesets)
                 for mi, (f, r, b) in enumerate(zip(ms.freqs, ms.decays, ms.amps))])
    centers = np.arange(250) + 0.5
    line_with_band(out / "histogram.svg", centers, [("", h_mean, h_lo, h_hi)],
                   "DM frequency (Hz)", "modes per window", f"k = {fmt_k(k)}", xlim=(0, 50))
    line_with_band(out / "spectrum.svg", freqs, [("", s_mean, s_lo, s_hi)],
                   "frequency (Hz)", "amplitude", f"channel {names[channel]}", xlim=(0, 50))
    matrix_heatmap(out / "sdm.svg", sdm, names, "mean |sDM|")
    _write_manifest(out, "analyze", {"data": str(args.data), "k": fmt_k(k),
                                     "channel": args.channel, "format": args.format,
                                     "drop_channels": drop, "windows": len(windows),
                                     "window_seconds": args.window_seconds,
                                     "normalize_counts": args.normalize_counts,
                                     "first_p_modes": args.first_p_modes})


# --------------------------------------------------------------------------
# cohort helpers for classify / anova

def _read_groups(path: str) -> dict[str, str]:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"groups file {p} not found")
    with open(p, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows and [c.strip().lower() for c in rows[0][:2]] == ["subject_id", "group"]:
        rows = rows[1:]
    groups = {}
    for i, row in enumerate(rows, start=1):
        if not row or not "".join(row).strip():
            continue
        if len(row) < 2:
            raise DataError(f"{p}: line {i} needs subject_id,group")
        groups[row[0].strip()] = row[1].strip()
    if not groups:
        raise DataError(f"{p}: no subjects listed")
    return groups


def _cohort(args) -> list[SubjectRecord]:
    drop = _parse_list(args.drop_channels, str.strip) or []
    groups = _read_groups(args.groups)
    files = _dataset_files(args.data, args.format)
    by_id = {}
    for f in files:
        rec = read_recording(f, args.format)
        if drop:
            rec = drop_channels(rec, drop)
        if rec.subject_id in by_id:
            raise DataError(f"duplicate subject id {rec.subject_id!r}")
        by_id[rec.subject_id] = rec
    missing = sorted(set(groups) - set(by_id))
    if missing:
        raise DataError(f"no recording for subject(s) {missing}")
    records = []
    for sid in sorted(groups):
        rec = by_id[sid]
        records.append(SubjectRecord(sid, groups[sid], _windows(rec, args.window_seconds),
                                     rec.channel_names))
    if len({r.group for r in records}) < 2:
        raise DataError("need at least two groups")
    return records


# --------------------------------------------------------------------------
# classify

def cmd_classify(args) -> None:
    from .plotting import accuracy_bars, line_with_band

    kinds = [normalize_kind(k) for k in _parse_list(args.kinds, str)]
    if not kinds:
        raise UsageError("--kinds is empty")
    bands = parse_bands(args.bands) if args.bands else CANONICAL_BANDS
    costs = tuple(_parse_list(args.costs, float) or DEFAULT_COSTS)
    records = _cohort(args)
    p, l = records[0].windows[0].p, records[0].windows[0].l
    if args.k:
        ks = tuple(_parse_k(t) for t in args.k.split(","))
        for k in ks:
            _check_k(k, p, l)
    else:
        h = stack_factor(p, l)
        full = min(h * p, l - h)
        ks = tuple(k for k in DEFAULT_KS if k == "full" or k <= full)
    ids = [r.subject_id for r in records]
    groups = [r.group for r in records]
    plans = make_plans(ids, groups, args.seed, args.repeats, args.folds, args.inner_folds)

    cache = FeatureCache(bands, args.normalize_counts, args.first_p_modes)
    cache.fill(records, kinds, ks, jobs=args.jobs)
    results = []
    for kind in kinds:
        grid_ks = (None,) if kind == "amplitude" else ks
        getter = cache.getter(kind)
        table = {(s, k): getter(s, k) for s in ids for k in grid_ks}
        results.append(nested_cv(ids, groups, kind, HyperGrid(costs, grid_ks), plans, table,
                                 jobs=args.jobs))

    out = _prepare_out(args.out)
    write_results_csv(out / "accuracy.csv", results)
    write_summary_csv(out / "summary.csv", results)
    write_confusion_json(out / "confusion.json", results)
    choice_rows = []
    for res in results:
        tally: dict[tuple, int] = {}
        for fr in res.folds:
            key = ("-" if res.kind == "amplitude" else fmt_k(fr.chosen_k), fr.chosen_c)
            tally[key] = tally.get(key, 0) + 1
        for (k, c), n in sorted(tally.items(), key=lambda kv: (kv[0][0], kv[0][1])):
            choice_rows.append([res.kind, k, _fmt(c), n])
    _write_rows(out / "hyperparameters.csv", ["kind", "k", "c", "times_chosen"], choice_rows)
    means, cis = [], []
    for res in results:
        accs = np.array(list(res.repeat_accuracies().values()))
        m, lo, _ = _mean_ci(accs[:, None])
        means.append(float(m[0]))
        cis.append(float(m[0] - lo[0]))
    accuracy_bars(out / "accuracy.svg", kinds, means, cis,
                  chance=1.0 / len(set(groups)))

    if args.sweep_k:
        sweep_rows, series = [], []
        for kind in kinds:
            if kind == "amplitude":
                continue
            getter = cache.getter(kind)
            curve = []
            for k in ks:
                table = {(s, k): getter(s, k) for s in ids}
                res = nested_cv(ids, groups, kind, HyperGrid(costs, (k,)), plans, table,
                                jobs=args.jobs)
                accs = np.array(list(res.repeat_accuracies().values()))
                m, lo, hi = _mean_ci(accs[:, None])
                sweep_rows.append([kind, fmt_k(k), _fmt(m[0]), _fmt(lo[0]), _fmt(hi[0])])
                curve.append((m[0], lo[0], hi[0]))
            if curve:
                arr = np.array(curve)
                series.append((kind, arr[:, 0], arr[:, 1], arr[:, 2]))
        _write_rows(out / "sweep_k.csv", ["kind", "k", "mean", "ci_low", "ci_high"], sweep_rows)
        if series:
            line_with_band(out / "sweep_k.svg", np.arange(len(ks)), series,
                           "SVD components (grid index)", "balanced accuracy")
    _write_manifest(out, "classify", {
        "data": str(args.data), "groups": str(args.groups), "kinds": kinds, "seed": args.seed,
        "repeats": args.repeats, "folds": args.folds, "inner_folds": args.inner_folds,
        "ks": [fmt_k(k) for k in ks], "costs": list(costs),
        "bands": [[b.name, b.lo, b.hi] for b in bands], "format": args.format,
        "drop_channels": _parse_list(args.drop_channels, str.strip) or [],
        "window_seconds": args.window_seconds, "normalize_counts": args.normalize_counts,
        "first_p_modes": args.first_p_modes, "sweep_k": args.sweep_k})


# --------------------------------------------------------------------------
# anova

def _subject_curve(task) -> np.ndarray:
    """Per-subject mean spectrum (DC dropped) or mean DM-frequency histogram."""
    path, windows, opt = task
    if path == "spectra":
        s = np.array([amplitude_spectra(w.data[opt : opt + 1])[0] for w in windows])
        return order_free_mean(s)[1:]
    k, normalize, first_p = opt
    hs = np.array([window_histogram(WindowDecomposition.from_window(w).mode_set(k, first_p),
                                    normalize) for w in windows])
    return order_free_mean(hs)


def cmd_anova(args) -> None:
    from .plotting import line_with_band

    records = _cohort(args)
    p, l = records[0].windows[0].p, records[0].windows[0].l
    channel = args.channel - 1
    if not 0 <= channel < p:
        raise UsageError(f"--channel must be in 1..{p}")
    if args.path == "spectra":
        freqs = spectrum_freqs(1.0 / records[0].windows[0].dt)[1:]
        m, ylabel = 256, "amplitude"
        tasks = [("spectra", r.windows, channel) for r in records]
    else:
        k = _parse_k(args.k)
        _check_k(k, p, l)
        freqs = np.arange(250, dtype=float)
        m, ylabel = 250, "modes per window"
        tasks = [("dm", r.windows, (k, args.normalize_counts, args.first_p_modes))
                 for r in records]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            curves = list(pool.map(_subject_curve, tasks))
    else:
        curves = [_subject_curve(t) for t in tasks]
    labels = sorted({r.group for r in records})
    mats = [np.array([c for c, r in zip(curves, records) if r.group == g]) for g in labels]
    for g, mat in zip(labels, mats):
        if mat.shape[0] < 2:
            raise DataError(f"group {g!r} needs at least two subjects for ANOVA")
    rows = per_frequency_anova(freqs, mats, m)
    out = _prepare_out(args.out)
    write_anova_csv(out / "anova.csv", rows)
    series = []
    for g, mat in zip(labels, mats):
        mean, lo, hi = _mean_ci(mat)
        series.append((g, mean, lo, hi))
    line_with_band(out / "anova.svg", freqs, series,
                   "frequency (Hz)", ylabel, f"groups: {', '.join(labels)}", xlim=(0, 50))
    _write_manifest(out, "anova", {"data": str(args.data), "groups": str(args.groups),
                                   "path": args.path, "k": args.k, "channel": args.channel,
                                   "m": m, "format": args.format,
                                   "drop_channels": _parse_list(args.drop_channels, str.strip) or [],
                                   "window_seconds": args.window_seconds,
                                   "normalize_counts": args.normalize_counts,
                                     "first_p_modes": args.first_p_modes})


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dmfreq", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, data=True):
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes")
        if data:
            sp.add_argument("--data", required=True, help="directory of recordings")
            sp.add_argument("--format", choices=sorted(FORMATS), default=None,
                            help="input format (default: detect by extension)")
            sp.add_argument("--drop-channels", default=None, help="comma-separated channel names")
            sp.add_argument("--window-seconds", type=float, default=1.0)
            sp.add_argument("--normalize-counts", action="store_true",
                            help="divide per-window mode counts by the number of modes")
            sp.add_argument("--first-p-modes", action="store_true",
                            help="keep only the leading P modes of each window")

    sp = sub.add_parser("simulate", help="generate the stationary/nonstationary trial sets")
    common(sp, data=False)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--format", choices=sorted(FORMATS), default="dmk1")
    sp.add_argument("--shared-phase", action="store_true",
                    help="use one phase for both sinusoids of a channel")
    sp.add_argument("--subjects", type=int, default=0,
                    help="also write a cohort with this many subjects per condition")
    sp.add_argument("--windows", type=int, default=60, help="one-second windows per subject")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("analyze", help="DM-frequency histogram, spectrum and sDM of a dataset")
    common(sp)
    sp.add_argument("--k", default="2", help="SVD components (integer or 'full')")
    sp.add_argument("--channel", type=int, default=1, help="1-based channel for the spectrum")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("classify", help="nested cross-validated classification")
    common(sp)
    sp.add_argument("--groups", required=True, help="CSV of subject_id,group")
    sp.add_argument("--kinds", default="amplitude,tfdm",
                    help="comma list of amplitude, sndm, sedm, tfdm, sdm+tfdm")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--repeats", type=int, default=10)
    sp.add_argument("--folds", type=int, default=10)
    sp.add_argument("--inner-folds", type=int, default=10)
    sp.add_argument("--k", default=None, help="comma list of SVD component counts")
    sp.add_argument("--costs", default=None, help="comma list of cost values")
    sp.add_argument("--bands", default=None, help="e.g. 0-1,1-4,4-8,8-13,13-30,30-80,80-250")
    sp.add_argument("--sweep-k", action="store_true",
                    help="also report accuracy at each fixed k")
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("anova", help="per-frequency one-way ANOVA between groups")
    common(sp)
    sp.add_argument("--groups", required=True, help="CSV of subject_id,group")
    sp.add_argument("--path", choices=("spectra", "dm"), default="spectra")
    sp.add_argument("--k", default="50", help="SVD components for the dm path")
    sp.add_argument("--channel", type=int, default=1)
    sp.set_defaults(func=cmd_anova)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            args.func(args)
    except UsageError as exc:
        print(f"dmfreq: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"dmfreq: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConvergenceError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"dmfreq: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"dmfreq: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
