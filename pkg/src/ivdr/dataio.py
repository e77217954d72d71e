"""Dataset container, column specification, CSV ingestion and curve output."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import MissingColumn, NonNumericColumn

log = logging.getLogger(__name__)

TRANSFORMS = ("identity", "log", "square")

# cell values treated as missing rather than malformed
_NA_MARKERS = {"", ".", "na", "nan", "n/a", "null"}


@dataclass(frozen=True)
class Dataset:
    """Estimation sample: outcome, endogenous regressor, exogenous block, instruments.

    The exogenous block carries an explicit leading intercept column of ones;
    evaluation vectors passed to curve APIs must match that layout.
    """

    outcome: np.ndarray
    endogenous: np.ndarray
    exogenous: np.ndarray
    instruments: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "outcome", _column(self.outcome, "outcome"))
        object.__setattr__(self, "endogenous", _column(self.endogenous, "endogenous"))
        object.__setattr__(self, "exogenous", _block(self.exogenous, "exogenous"))
        object.__setattr__(self, "instruments", _block(self.instruments, "instruments"))
        n = self.outcome.shape[0]
        for name in ("endogenous", "exogenous", "instruments"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"{name} has {getattr(self, name).shape[0]} rows, outcome has {n}")
        if not np.all(self.exogenous[:, 0] == 1.0):
            raise ValueError("first exogenous column must be the intercept (all ones)")
        if self.instruments.shape[1] < 1:
            raise ValueError("at least one instrument column is required")
        if np.ptp(self.endogenous) == 0.0:
            raise ValueError("endogenous regressor is constant")
        if n < self.k + self.l + 3:
            raise ValueError(
                f"need at least k + l + 3 = {self.k + self.l + 3} rows, got {n}"
            )

    @property
    def n(self) -> int:
        return self.outcome.shape[0]

    @property
    def k(self) -> int:
        return self.exogenous.shape[1]

    @property
    def l(self) -> int:
        return self.instruments.shape[1]

    def take(self, indices: np.ndarray) -> "Dataset":
        """Row subset (bootstrap resampling)."""
        return Dataset(
            outcome=self.outcome[indices],
            endogenous=self.endogenous[indices],
            exogenous=self.exogenous[indices],
            instruments=self.instruments[indices],
        )


def _column(a, name: str) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=float)).ravel()
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def _block(a, name: str) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=float))
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


# --- column specification ----------------------------------------------------


@dataclass(frozen=True)
class ColumnSpec:
    """Maps CSV columns onto model roles, with a per-entry transform.

    Each entry is ``(column, transform)`` where transform is one of
    "identity", "log", "square". A source column may appear several times in
    the exogenous list under different transforms (e.g. a level and its
    square); across roles the source columns must be distinct.
    """

    outcome: tuple[str, str]
    endogenous: tuple[str, str]
    exogenous: tuple[tuple[str, str], ...]
    instruments: tuple[tuple[str, str], ...]

    def __post_init__(self):
        object.__setattr__(self, "outcome", _entry(self.outcome))
        object.__setattr__(self, "endogenous", _entry(self.endogenous))
        object.__setattr__(self, "exogenous", tuple(_entry(e) for e in self.exogenous))
        object.__setattr__(self, "instruments", tuple(_entry(e) for e in self.instruments))
        if not self.exogenous:
            raise ValueError("at least one exogenous entry is required")
        if not self.instruments:
            raise ValueError("at least one instrument entry is required")
        roles = {
            "outcome": {self.outcome[0]},
            "endogenous": {self.endogenous[0]},
            "exogenous": {c for c, _ in self.exogenous},
            "instruments": {c for c, _ in self.instruments},
        }
        names = list(roles)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                shared = roles[a] & roles[b]
                if shared:
                    raise ValueError(
                        f"column {sorted(shared)[0]!r} appears in both {a} and {b}"
                    )

    @property
    def referenced_columns(self) -> tuple[str, ...]:
        seen: list[str] = []
        for col, _ in (self.outcome, self.endogenous, *self.exogenous, *self.instruments):
            if col not in seen:
                seen.append(col)
        return tuple(seen)

    @property
    def exogenous_labels(self) -> tuple[str, ...]:
        return ("const",) + tuple(_label(e) for e in self.exogenous)


def _entry(e) -> tuple[str, str]:
    if isinstance(e, str):
        col, _, tf = e.partition(":")
        e = (col, tf or "identity")
    col, tf = e
    col = col.strip()
    tf = (tf or "identity").strip()
    if not col:
        raise ValueError("empty column name in specification")
    if tf not in TRANSFORMS:
        raise ValueError(f"unknown transform {tf!r} (expected one of {TRANSFORMS})")
    return (col, tf)


def _label(entry: tuple[str, str]) -> str:
    col, tf = entry
    return col if tf == "identity" else f"{col}:{tf}"


def parse_colspec_file(path) -> ColumnSpec:
    """Read a flat key=value column specification.

    Keys: outcome, endogenous, exogenous, instruments. Values are comma lists
    of ``column`` or ``column:transform``. Lines starting with '#' are ignored.
    """
    fields: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, eq, value = line.partition("=")
            if not eq:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            fields[key.strip()] = value.strip()
    missing = [k for k in ("outcome", "endogenous", "exogenous", "instruments") if k not in fields]
    if missing:
        raise ValueError(f"column specification is missing keys: {', '.join(missing)}")
    split = lambda v: tuple(s.strip() for s in v.split(",") if s.strip())
    outcome = split(fields["outcome"])
    endogenous = split(fields["endogenous"])
    if len(outcome) != 1 or len(endogenous) != 1:
        raise ValueError("outcome and endogenous must each name exactly one column")
    return ColumnSpec(
        outcome=outcome[0],
        endogenous=endogenous[0],
        exogenous=split(fields["exogenous"]),
        instruments=split(fields["instruments"]),
    )


# --- CSV ingestion ------------------------------------------------------------


def load_csv(path, spec: ColumnSpec) -> Dataset:
    """Load an estimation sample from a CSV file.

    Rows where any referenced column is missing (empty, '.', 'NA', ...) are
    dropped and the count is logged. Any other non-numeric cell raises
    NonNumericColumn with its location; so does a log transform applied to a
    nonpositive value.
    """
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    absent = [c for c in spec.referenced_columns if c not in frame.columns]
    if absent:
        raise MissingColumn(f"{path}: missing columns: {', '.join(absent)}")

    numeric: dict[str, np.ndarray] = {}
    missing_mask = np.zeros(len(frame), dtype=bool)
    for col in spec.referenced_columns:
        raw = frame[col].str.strip()
        is_na = raw.str.lower().isin(_NA_MARKERS)
        values = pd.to_numeric(raw.where(~is_na), errors="coerce")
        bad = values.isna() & ~is_na
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise NonNumericColumn(
                f"{path}: column {col!r}, row {row + 2}: "
                f"cannot parse {raw.iloc[row]!r} as a number"
            )
        numeric[col] = values.to_numpy(dtype=float)
        missing_mask |= is_na.to_numpy()

    keep = ~missing_mask
    dropped = int(missing_mask.sum())
    if dropped:
        log.info("%s: dropped %d row(s) with missing values, kept %d", path, dropped, int(keep.sum()))
    if not keep.any():
        raise ValueError(f"{path}: no usable rows after dropping missing values")
    numeric = {c: v[keep] for c, v in numeric.items()}

    def transformed(entry: tuple[str, str]) -> np.ndarray:
        col, tf = entry
        values = numeric[col]
        if tf == "identity":
            return values
        if tf == "square":
            return values * values
        bad = np.flatnonzero(values <= 0.0)
        if bad.size:
            raise NonNumericColumn(
                f"{path}: column {col!r}: log transform needs positive values, "
                f"found {values[bad[0]]} in kept row {bad[0]}"
            )
        return np.log(values)

    n_kept = int(keep.sum())
    exogenous = np.column_stack(
        [np.ones(n_kept)] + [transformed(e) for e in spec.exogenous]
    )
    instruments = np.column_stack([transformed(e) for e in spec.instruments])
    return Dataset(
        outcome=transformed(spec.outcome),
        endogenous=transformed(spec.endogenous),
        exogenous=exogenous,
        instruments=instruments,
    )


# --- curve output -------------------------------------------------------------

_CURVE_HEADER = ("name", "y", "value", "lower", "upper", "rejected")


def write_curves(curves, path) -> None:
    """Write named curves and bands to one CSV.

    ``curves`` maps a name to an object with ``grid`` and either ``values``
    (plain curve) or ``point``/``lower``/``upper``/``rejected`` (band). Floats
    are written with shortest round-trip precision.
    """
    if not isinstance(curves, dict):
        curves = dict(curves)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_CURVE_HEADER)
        for name, curve in curves.items():
            grid = np.asarray(getattr(curve.grid, "values", curve.grid), dtype=float)
            if hasattr(curve, "lower"):
                point = np.asarray(curve.point, dtype=float)
                lower = np.asarray(curve.lower, dtype=float)
                upper = np.asarray(curve.upper, dtype=float)
                rejected = np.asarray(curve.rejected, dtype=bool)
                for i, y in enumerate(grid):
                    writer.writerow([name, repr(float(y)), repr(float(point[i])),
                                     repr(float(lower[i])), repr(float(upper[i])),
                                     int(rejected[i])])
            else:
                values = np.asarray(curve.values, dtype=float)
                for i, y in enumerate(grid):
                    writer.writerow([name, repr(float(y)), repr(float(values[i])), "", "", ""])


def read_curves(path) -> dict[str, dict[str, np.ndarray]]:
    """Read a curve CSV back into arrays keyed by curve name.

    Each entry holds ``y`` and ``value`` arrays, plus ``lower``/``upper``/
    ``rejected`` for band rows. Values round-trip write_curves exactly.
    """
    rows: dict[str, list[list[str]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != _CURVE_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for row in reader:
            rows.setdefault(row[0], []).append(row)
    out: dict[str, dict[str, np.ndarray]] = {}
    for name, entries in rows.items():
        data: dict[str, np.ndarray] = {
            "y": np.array([float(r[1]) for r in entries]),
            "value": np.array([float(r[2]) for r in entries]),
        }
        if entries[0][3] != "":
            data["lower"] = np.array([float(r[3]) for r in entries])
            data["upper"] = np.array([float(r[4]) for r in entries])
            data["rejected"] = np.array([bool(int(r[5])) for r in entries])
        out[name] = data
    return out
