"""CSV/JSON exchange formats.

All writers go through :func:`atomic_write` so an interrupted run never
leaves a half-written file under the final name.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .diskfunc import RadialProfile
from .rearrange import GridFunction2D

PROFILE_HEADER = ["r", "v"]
RATIO_HEADER = ["rho", "F_domain", "F_disk", "ratio"]


class ParseError(ValueError):
    def __init__(self, path, line, msg):
        super().__init__(f"{path}:{line}: {msg}")
        self.line = line


def atomic_write(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def format_float(x) -> str:
    return "" if x is None else repr(float(x))


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_float(x) if not isinstance(x, str) else x for x in row])
    return buf.getvalue()


def write_json(path, obj) -> None:
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- radial profiles ------------------------------------------------------------

def profile_csv_text(v: RadialProfile) -> str:
    return csv_text(PROFILE_HEADER, zip(v.grid, v.values))


def write_profile_csv(path, v: RadialProfile) -> None:
    atomic_write(path, profile_csv_text(v))


def read_profile_csv(path) -> RadialProfile:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != PROFILE_HEADER:
            raise ParseError(path, 1, f"expected header 'r,v', got {header!r}")
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(path, line, f"expected 2 fields, got {len(row)}: {row!r}")
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                raise ParseError(path, line, f"non-numeric row {row!r}") from None
    if len(rows) < 2:
        raise ParseError(path, 1, "profile needs at least two rows")
    arr = np.array(rows)
    try:
        return RadialProfile(arr[:, 0], arr[:, 1])
    except ValueError as exc:
        raise ParseError(path, 1, str(exc)) from None


# -- grid functions ---------------------------------------------------------------

def write_grid_function(path, f: GridFunction2D) -> None:
    """``x,y,value`` rows at every cell centre plus a ``<path>.json`` sidecar ``{"M": M}``."""
    from .rearrange import cell_centers

    x = cell_centers(f.M)
    X, Y = np.meshgrid(x, x)
    atomic_write(path, csv_text(["x", "y", "value"], zip(X.ravel(), Y.ravel(), f.values.ravel())))
    write_json(str(path) + ".json", {"M": f.M})


def read_grid_function(path) -> GridFunction2D:
    from .rearrange import cell_centers

    with open(str(path) + ".json") as fh:
        M = int(json.load(fh)["M"])
    x = cell_centers(M)
    vals = np.zeros((M, M))
    h = 2.0 / M
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            try:
                xi, yi, val = (float(c) for c in row)
            except ValueError:
                raise ParseError(path, reader.line_num, f"bad row {row!r}") from None
            j = int(round((xi + 1) / h - 0.5))
            i = int(round((yi + 1) / h - 0.5))
            if not (0 <= i < M and 0 <= j < M) or abs(x[j] - xi) > h / 4 or abs(x[i] - yi) > h / 4:
                raise ParseError(path, reader.line_num, f"({xi}, {yi}) is not a cell centre")
            vals[i, j] = val
    return GridFunction2D(vals)


# -- experiment series ------------------------------------------------------------

def ratio_csv_text(rows) -> str:
    return csv_text(RATIO_HEADER, [(r.rho, r.F_domain, r.F_disk, r.ratio) for r in rows])


def reports_json(reports) -> list:
    return [r.to_dict() for r in reports]
