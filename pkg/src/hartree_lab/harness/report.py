"""Reports: checks, tables and fits, written as a JSON manifest, CSV files and PNG plots."""

import csv
import hashlib
import io
import json
import os
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import __version__
from ..errors import LabError

CHECKPOINT_MAGIC = b"HLCK"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Check:
    name: str
    invariant: str
    tolerance: str
    value: float
    passed: bool


@dataclass
class Table:
    name: str
    columns: list
    rows: list
    x: str = None             # plot axes (None: not plotted)
    y: tuple = ()
    logx: bool = False
    logy: bool = False

    def series(self):
        """Long-format rows ``(series, x, y)`` for the plot columns."""
        if self.x is None:
            return []
        ix = self.columns.index(self.x)
        out = []
        for name in self.y:
            iy = self.columns.index(name)
            out += [(name, r[ix], r[iy]) for r in self.rows]
        return out


@dataclass(frozen=True)
class FitRecord:
    name: str
    slope: float
    intercept: float
    r_squared: float
    ci_low: float
    ci_high: float
    points: int
    excluded: int = 0


@dataclass
class Report:
    experiment: str
    config: dict
    checks: list = field(default_factory=list)
    tables: list = field(default_factory=list)
    fits: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def extend(self, other: "Report"):
        self.checks += other.checks
        self.tables += other.tables
        self.fits += other.fits
        self.notes += other.notes

    def check(self, name: str, invariant: str, tolerance: str, value, passed) -> bool:
        self.checks.append(Check(name, invariant, tolerance, float(value), bool(passed)))
        return bool(passed)

    def fit(self, name: str, fit, points: int, excluded: int = 0):
        lo, hi = fit.interval()
        rec = FitRecord(name, fit.slope, fit.intercept, fit.r_squared, lo, hi, points, excluded)
        self.fits.append(rec)
        return rec

    def table(self, *args, **kw) -> Table:
        t = Table(*args, **kw)
        self.tables.append(t)
        return t


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    if isinstance(v, complex):
        return f"{v.real:.12g}{v.imag:+.12g}j"
    return str(v)


def table_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def plotdata_csv(tables) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(["table", "series", "x", "y"])
    for t in tables:
        for s, x, y in t.series():
            w.writerow([t.name, s, _cell(x), _cell(y)])
    return buf.getvalue()


def manifest(report: Report) -> dict:
    return {
        "experiment": report.experiment,
        "config_hash": config_hash(report.config),
        "code_version": __version__,
        "wall_time": round(report.wall_time, 3),
        "passed": report.passed,
        "checks": [asdict(c) for c in report.checks],
        "fits": [asdict(f) for f in report.fits],
        "tables": [f"{t.name}.csv" for t in report.tables],
        "notes": list(report.notes),
        "config": report.config,
    }


def _write(path: str, text: str):
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as err:
        raise LabError(f"cannot write {path}: {err}") from err


def emit_report(report: Report, path: str, plots: bool = True):
    """Manifest, one CSV per table, the long-format plot data and PNG figures (overwrites)."""
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as err:
        raise LabError(f"cannot create {path}: {err}") from err
    _write(os.path.join(path, "manifest.json"), json.dumps(manifest(report), indent=2, default=_cell) + "\n")
    if not report.tables:
        return
    for t in report.tables:
        _write(os.path.join(path, f"{t.name}.csv"), table_csv(t))
    _write(os.path.join(path, "plotdata.csv"), plotdata_csv(report.tables))
    if plots:
        from .plots import plot_tables
        plot_tables(report.tables, path)


def save_checkpoint(path: str, arrays: dict, meta: dict = None):
    """Binary container: magic, version, JSON header length, JSON header, then an npz payload."""
    header = json.dumps({"meta": meta or {}, "keys": sorted(arrays)}, sort_keys=True).encode()
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    try:
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC + struct.pack("<HI", CHECKPOINT_VERSION, len(header)) + header)
            fh.write(buf.getvalue())
    except OSError as err:
        raise LabError(f"cannot write checkpoint {path}: {err}") from err


def load_checkpoint(path: str):
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise LabError(f"{path} is not a checkpoint container")
    version, size = struct.unpack("<HI", data[4:10])
    if version != CHECKPOINT_VERSION:
        raise LabError(f"checkpoint version {version} not supported")
    header = json.loads(data[10:10 + size])
    with np.load(io.BytesIO(data[10 + size:])) as z:
        arrays = {k: z[k] for k in header["keys"]}
    return arrays, header["meta"]
