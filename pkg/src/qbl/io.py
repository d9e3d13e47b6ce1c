"""Plain-text formats: complex matrices and trajectory CSV."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

import numpy as np

from . import hilbert as hb

CSV_COLUMNS = (
    "time_internal", "time_ps", "region",
    "pop1", "pop2", "pop3", "pop4", "pop5", "pop6",
    "energy_cm1", "ergotropy_cm1", "n_expect", "purity", "trace_dev", "min_eig",
)


class FormatError(ValueError):
    pass


def _num(x: float) -> str:
    return f"{x:.12g}"


def format_complex(z: complex) -> str:
    z = complex(z)
    return f"{z.real:.12g}{z.imag:+.12g}i"


def parse_complex(token: str) -> complex:
    t = token.strip()
    if not t.endswith("i"):
        raise ValueError(f"complex entry {token!r} must end in 'i' (format a+bi)")
    z = complex(t[:-1] + "j")
    if not np.isfinite(z.real) or not np.isfinite(z.imag):
        raise ValueError(f"non-finite complex entry {token!r}")
    return z


def write_matrix(path, m: np.ndarray, header: Iterable[str] = ()) -> Path:
    """One row per line, whitespace-separated ``a+bi`` entries.

    ``header`` lines are written first as ``#`` comments.
    """
    path = Path(path)
    lines = [f"# {h}" for h in header]
    lines += [" ".join(format_complex(z) for z in row) for row in np.asarray(m)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_matrix(path, dim: int = hb.DIM, hermitian: bool = True, tol: float = 1e-10) -> np.ndarray:
    path = Path(path)
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        text = line.strip()
        if not text or text.startswith("#"):
            continue
        try:
            row = [parse_complex(tok) for tok in text.split()]
        except ValueError as exc:
            raise FormatError(f"{path}:{lineno}: {exc}") from None
        if len(row) != dim:
            raise FormatError(f"{path}:{lineno}: expected {dim} entries, found {len(row)}")
        rows.append(row)
    if len(rows) != dim:
        raise FormatError(f"{path}: expected {dim} rows, found {len(rows)}")
    m = np.array(rows, dtype=complex)
    if hermitian and not hb.is_hermitian(m, tol):
        dev = hb.fro(m - m.conj().T)
        raise FormatError(f"{path}: matrix is not Hermitian (||M - M^dag||_F = {dev:.3g})")
    return m


def read_matrix_header(path) -> dict[str, str]:
    """``key = value`` pairs from the comment header of a matrix file."""
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.startswith("#"):
            break
        body = line[1:].strip()
        if "=" in body:
            k, v = body.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def trajectory_rows(traj) -> list[list[str]]:
    rows = []
    for k in range(len(traj.times)):
        rows.append(
            [_num(traj.times[k]), _num(traj.time_ps[k]), traj.regions[k]]
            + [_num(x) for x in traj.populations[k]]
            + [_num(v[k]) for v in (traj.energy, traj.ergotropy, traj.n_expect,
                                    traj.purity, traj.trace_dev, traj.min_eig)]
        )
    return rows


def write_trajectory_csv(path, traj) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        w.writerows(trajectory_rows(traj))
    return path


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    """Columns of a trajectory CSV; ``region`` stays a string array."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise FormatError(f"{path}: unexpected header {header}")
        rows = list(reader)
    cols = {}
    for j, name in enumerate(CSV_COLUMNS):
        vals = [r[j] for r in rows]
        cols[name] = np.array(vals) if name == "region" else np.array(vals, dtype=float)
    return cols


def write_rows_csv(path, header: Iterable[str], rows: Iterable[Iterable]) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header))
        for r in rows:
            w.writerow([_num(x) if isinstance(x, (float, np.floating)) else x for x in r])
    return path
