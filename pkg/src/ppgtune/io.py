"""File formats: E4 exports, generic signal CSV, beats CSV and the dataset manifest.

E4 export layout: the first line holds the session start (Unix seconds), the
second the sampling rate in Hz, then one sample per line. Accelerometer
exports carry three comma-separated columns on every line.

Generic signal CSV: header ``time_ms,value``; the first time stamp sets the
start time and the sampling rate comes from the manifest (inferred from the
median spacing when absent).

Beats CSV: header ``time_ms`` then one integer millisecond per line.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .beats import BeatSeries, Source
from .errors import InvalidInput, ParseError, ValidationError
from .signals import Role, Signal, round_half_up

_ACC_ROLES = (Role.ACC_X, Role.ACC_Y, Role.ACC_Z)


def _read_lines(path) -> list[str]:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8-sig")
    except FileNotFoundError as e:
        raise InvalidInput(f"{p}: file not found") from e
    except OSError as e:
        raise InvalidInput(f"{p}: {e.strerror}") from e
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    return lines


def _floats(line: str, path, lineno: int, ncols: int | None = None) -> list[float]:
    parts = [s.strip() for s in line.split(",")]
    try:
        vals = [float(s) for s in parts]
    except ValueError:
        raise ParseError(f"non-numeric value in {line.strip()!r}", path, lineno) from None
    if ncols is not None and len(vals) != ncols:
        raise ParseError(f"expected {ncols} columns, found {len(vals)}", path, lineno)
    if not all(np.isfinite(vals)):
        raise ParseError("non-finite value", path, lineno)
    return vals


# ---------------------------------------------------------------------------
# E4


def read_e4_csv(path, role: Role = Role.PPG):
    """One ``Signal`` for single-column exports, a tuple of three for accelerometer files."""
    lines = _read_lines(path)
    if not lines:
        raise ParseError("empty file", path, 1)
    if len(lines) < 2:
        raise ParseError("missing sampling-rate line", path, 2)
    starts = _floats(lines[0], path, 1)
    ncols = len(starts)
    if ncols not in (1, 3):
        raise ParseError(f"header must have 1 or 3 columns, found {ncols}", path, 1)
    rates = _floats(lines[1], path, 2, ncols)
    if len(set(starts)) != 1:
        raise ParseError("start times differ between columns", path, 1)
    if len(set(rates)) != 1 or not rates[0] > 0:
        raise ParseError("sampling rate must be positive and equal across columns", path, 2)
    data = np.empty((len(lines) - 2, ncols))
    for i, line in enumerate(lines[2:]):
        data[i] = _floats(line, path, i + 3, ncols)
    start_ms = round_half_up(starts[0] * 1000.0)
    fs = rates[0]
    if ncols == 1:
        return Signal(data[:, 0], fs, start_ms, role)
    return tuple(Signal(data[:, k], fs, start_ms, _ACC_ROLES[k]) for k in range(3))


def _num(v: float) -> str:
    return repr(float(v))


def write_e4_csv(path, signal):
    """Writes one signal or a 3-tuple of accelerometer axes; samples are lossless."""
    sigs = (signal,) if isinstance(signal, Signal) else tuple(signal)
    if len(sigs) not in (1, 3):
        raise InvalidInput("E4 files hold one or three channels")
    if len({len(s) for s in sigs}) != 1 or len({s.fs for s in sigs}) != 1 or len({s.start_time for s in sigs}) != 1:
        raise InvalidInput("channels must share length, rate and start time")
    head = sigs[0]
    start = "%.6f" % (head.start_time / 1000.0)
    rate = "%.6f" % head.fs
    cols = np.column_stack([s.samples for s in sigs])
    out = [", ".join([start] * len(sigs)), ", ".join([rate] * len(sigs))]
    out.extend(",".join(_num(v) for v in row) for row in cols)
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# generic CSV


def read_signal_csv(path, fs: float | None = None, role: Role = Role.PPG) -> Signal:
    lines = _read_lines(path)
    if not lines:
        raise ParseError("empty file", path, 1)
    if [s.strip() for s in lines[0].split(",")] != ["time_ms", "value"]:
        raise ParseError("header must be 'time_ms,value'", path, 1)
    rows = np.array([_floats(line, path, i + 2, 2) for i, line in enumerate(lines[1:])]).reshape(-1, 2)
    if len(rows) == 0:
        raise ParseError("no samples", path, 2)
    t = rows[:, 0]
    if np.any(np.diff(t) <= 0):
        bad = int(np.flatnonzero(np.diff(t) <= 0)[0]) + 3
        raise ParseError("time_ms must be strictly increasing", path, bad)
    if fs is None:
        if len(t) < 2:
            raise ParseError("cannot infer the sampling rate from one sample", path, 2)
        fs = 1000.0 / float(np.median(np.diff(t)))
    return Signal(rows[:, 1], float(fs), round_half_up(t[0]), role)


def write_signal_csv(path, signal: Signal):
    t = signal.start_time + np.arange(len(signal)) * (1000.0 / signal.fs)
    out = ["time_ms,value"]
    out.extend(f"{ti:.3f},{_num(v)}" for ti, v in zip(t, signal.samples))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def read_any_signal(path, fs: float | None = None, role: Role = Role.PPG):
    """Generic CSV when the first line is the ``time_ms,value`` header, E4 otherwise."""
    lines = _read_lines(path)
    if lines and lines[0].replace(" ", "").lower().startswith("time_ms"):
        return read_signal_csv(path, fs, role)
    return read_e4_csv(path, role)


# ---------------------------------------------------------------------------
# beats


def read_beats_csv(path, source: Source = Source.ECG) -> BeatSeries:
    lines = _read_lines(path)
    if not lines or lines[0].strip() != "time_ms":
        raise ParseError("header must be 'time_ms'", path, 1)
    vals = []
    for i, line in enumerate(lines[1:]):
        v = _floats(line, path, i + 2, 1)[0]
        vals.append(round_half_up(v))
        if len(vals) > 1 and vals[-1] <= vals[-2]:
            raise ValidationError(f"{path}:{i + 2}: beat times must be strictly increasing")
    return BeatSeries(np.array(vals, dtype=np.int64), source)


def write_beats_csv(path, beats):
    t = beats.times_ms if isinstance(beats, BeatSeries) else np.asarray(beats, dtype=np.int64)
    Path(path).write_text("time_ms\n" + "".join(f"{int(v)}\n" for v in t), encoding="utf-8")


# ---------------------------------------------------------------------------
# manifest


@dataclass(frozen=True)
class ManifestEntry:
    participant_id: str
    task_id: str
    ppg_path: Path
    ecg_path: Path | None = None
    ecg_beats_path: Path | None = None
    acc_paths: tuple[Path, ...] = ()
    ppg_fs: float | None = None
    ecg_fs: float | None = None
    acc_fs: float | None = None
    acc_scale: float = 1.0
    ecg_start_ms: int | None = None


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...] = ()
    base_dir: Path = field(default_factory=Path)

    def __len__(self):
        return len(self.entries)


_ENTRY_KEYS = {
    "participant_id", "task_id", "ppg_path", "ecg_path", "ecg_beats_path", "acc_paths",
    "ppg_fs", "ecg_fs", "acc_fs", "acc_scale", "ecg_start_ms",
}


def _entry(raw: dict, base: Path, k: int) -> ManifestEntry:
    where = f"recording #{k + 1}"
    unknown = set(raw) - _ENTRY_KEYS
    if unknown:
        raise InvalidInput(f"{where}: unknown key {sorted(unknown)[0]!r}")
    for key in ("participant_id", "task_id", "ppg_path"):
        if not isinstance(raw.get(key), str) or not raw[key]:
            raise InvalidInput(f"{where}: {key} is required")
    has_ecg = "ecg_path" in raw
    has_beats = "ecg_beats_path" in raw
    if has_ecg == has_beats:
        raise InvalidInput(f"{where}: give exactly one of ecg_path or ecg_beats_path")
    acc = raw.get("acc_paths", [])
    if isinstance(acc, str):
        acc = [acc]
    if len(acc) not in (0, 1, 3):
        raise InvalidInput(f"{where}: acc_paths takes one 3-column file or three single-axis files")

    def path(v):
        return (base / v) if v is not None else None

    def rate(key):
        v = raw.get(key)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            raise InvalidInput(f"{where}: {key} must be a positive number")
        return float(v)

    scale = raw.get("acc_scale", 1.0)
    if isinstance(scale, bool) or not isinstance(scale, (int, float)):
        raise InvalidInput(f"{where}: acc_scale must be a number")
    start = raw.get("ecg_start_ms")
    if start is not None and (isinstance(start, bool) or not isinstance(start, int)):
        raise InvalidInput(f"{where}: ecg_start_ms must be an integer")
    return ManifestEntry(
        participant_id=raw["participant_id"],
        task_id=raw["task_id"],
        ppg_path=path(raw["ppg_path"]),
        ecg_path=path(raw.get("ecg_path")),
        ecg_beats_path=path(raw.get("ecg_beats_path")),
        acc_paths=tuple(base / a for a in acc),
        ppg_fs=rate("ppg_fs"),
        ecg_fs=rate("ecg_fs"),
        acc_fs=rate("acc_fs"),
        acc_scale=float(scale),
        ecg_start_ms=start,
    )


def loads_manifest(text: str, base_dir=".", source: str = "<manifest>") -> DatasetManifest:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ParseError(str(e), source, getattr(e, "lineno", None)) from e
    unknown = set(doc) - {"recording"}
    if unknown:
        raise InvalidInput(f"{source}: unknown manifest key {sorted(unknown)[0]!r}")
    raws = doc.get("recording", [])
    if not isinstance(raws, list):
        raise InvalidInput(f"{source}: use [[recording]] tables")
    base = Path(base_dir)
    entries = tuple(_entry(r, base, k) for k, r in enumerate(raws))
    seen = set()
    for e in entries:
        key = (e.participant_id, e.task_id)
        if key in seen:
            raise InvalidInput(f"{source}: duplicate recording for participant {key[0]!r}, task {key[1]!r}")
        seen.add(key)
    return DatasetManifest(entries, base)


def load_manifest(path) -> DatasetManifest:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise InvalidInput(f"cannot read manifest {p}: {e.strerror}") from e
    return loads_manifest(text, p.parent, str(p))


def dumps_manifest(entries, base_dir=".") -> str:
    base = Path(base_dir)

    def rel(p):
        p = Path(p)
        try:
            return p.relative_to(base).as_posix()
        except ValueError:
            return p.as_posix()

    blocks = []
    for e in entries:
        lines = ["[[recording]]", f'participant_id = "{e.participant_id}"', f'task_id = "{e.task_id}"']
        lines.append(f'ppg_path = "{rel(e.ppg_path)}"')
        if e.ppg_fs is not None:
            lines.append(f"ppg_fs = {e.ppg_fs!r}")
        if e.ecg_path is not None:
            lines.append(f'ecg_path = "{rel(e.ecg_path)}"')
        if e.ecg_beats_path is not None:
            lines.append(f'ecg_beats_path = "{rel(e.ecg_beats_path)}"')
        if e.ecg_fs is not None:
            lines.append(f"ecg_fs = {e.ecg_fs!r}")
        if e.ecg_start_ms is not None:
            lines.append(f"ecg_start_ms = {e.ecg_start_ms}")
        if e.acc_paths:
            lines.append("acc_paths = [" + ", ".join(f'"{rel(a)}"' for a in e.acc_paths) + "]")
        if e.acc_fs is not None:
            lines.append(f"acc_fs = {e.acc_fs!r}")
        if e.acc_scale != 1.0:
            lines.append(f"acc_scale = {e.acc_scale!r}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + ("\n" if blocks else "")


# ---------------------------------------------------------------------------
# loading recordings


@dataclass(frozen=True)
class LoadedRecording:
    """Channels of one manifest entry.

    ``ecg_start_ms`` is the epoch time of the ECG axis origin; beat times in
    ``ecg_beats`` are relative to it.
    """

    participant: str
    task: str
    ppg: Signal
    ecg: Signal | None
    ecg_beats: BeatSeries | None
    ecg_start_ms: int
    acc: tuple[Signal, Signal, Signal] | None


def _scaled(sig: Signal, scale: float) -> Signal:
    return sig if scale == 1.0 else sig.replace(samples=sig.samples * scale)


def load_entry(entry: ManifestEntry) -> LoadedRecording:
    ppg = read_any_signal(entry.ppg_path, entry.ppg_fs, Role.PPG)
    if not isinstance(ppg, Signal):
        raise InvalidInput(f"{entry.ppg_path}: PPG file has three columns")
    ecg = beats = None
    if entry.ecg_path is not None:
        ecg = read_any_signal(entry.ecg_path, entry.ecg_fs, Role.ECG)
        if not isinstance(ecg, Signal):
            raise InvalidInput(f"{entry.ecg_path}: ECG file has three columns")
        start = ecg.start_time
    else:
        beats = read_beats_csv(entry.ecg_beats_path)
        start = entry.ecg_start_ms if entry.ecg_start_ms is not None else ppg.start_time
    acc = None
    if len(entry.acc_paths) == 1:
        acc = read_any_signal(entry.acc_paths[0], entry.acc_fs, Role.ACC_X)
        if isinstance(acc, Signal):
            raise InvalidInput(f"{entry.acc_paths[0]}: a single accelerometer file needs three columns")
    elif len(entry.acc_paths) == 3:
        acc = tuple(read_any_signal(p, entry.acc_fs, r) for p, r in zip(entry.acc_paths, _ACC_ROLES))
        if not all(isinstance(a, Signal) for a in acc):
            raise InvalidInput("single-axis accelerometer files must have one column")
    if acc is not None:
        acc = tuple(_scaled(a, entry.acc_scale) for a in acc)
    return LoadedRecording(entry.participant_id, entry.task_id, ppg, ecg, beats, int(start), acc)


def load_recordings(manifest: DatasetManifest) -> list[LoadedRecording]:
    """Loads every entry; failures are collected and reported together."""
    out, errors = [], []
    for e in manifest.entries:
        try:
            out.append(load_entry(e))
        except ValidationError as err:
            errors.append(f"{e.participant_id}/{e.task_id}: {err}")
    if errors:
        raise ValidationError("failed to load recordings:\n  " + "\n  ".join(errors))
    return out


def write_synth_dataset(out_dir, recordings, generic: bool = False) -> Path:
    """Writes synthetic recordings plus ``manifest.toml``; returns the manifest path.

    Each recording gets PPG (E4 layout unless ``generic``), ECG as generic
    CSV, a 3-column accelerometer file and the ground-truth beat files.
    """
    root = Path(out_dir)
    entries = []
    for r in recordings:
        d = root / r.participant / r.task
        d.mkdir(parents=True, exist_ok=True)
        ppg_path = d / ("ppg.csv" if generic else "BVP.csv")
        if generic:
            write_signal_csv(ppg_path, r.ppg)
        else:
            write_e4_csv(ppg_path, r.ppg)
        write_signal_csv(d / "ecg.csv", r.ecg)
        write_e4_csv(d / "ACC.csv", r.acc)
        write_beats_csv(d / "truth_ecg_beats.csv", round_half_up(r.beats_ms))
        write_beats_csv(d / "truth_ppg_beats.csv", round_half_up(r.ppg_truth_ms))
        entries.append(
            ManifestEntry(
                r.participant, r.task, ppg_path, ecg_path=d / "ecg.csv", acc_paths=(d / "ACC.csv",),
                ppg_fs=r.ppg.fs if generic else None, ecg_fs=r.ecg.fs,
            )
        )
    manifest = root / "manifest.toml"
    manifest.write_text(dumps_manifest(entries, root), encoding="utf-8")
    return manifest
