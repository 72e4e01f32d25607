"""Centroid-based metrics and the per-run trajectory container."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np


def centroids(state, p):
    """Perron-weighted team centroids ``(x_c, y_c)``."""
    return p.p1 @ state.X1, p.p2 @ state.Y2


def consensus_error(state, x_c, y_c) -> float:
    """Squared deviations of all four blocks from the repeated centroids."""
    return float(
        np.sum((state.X1 - x_c) ** 2)
        + np.sum((state.Y2 - y_c) ** 2)
        + np.sum((state.X2 - x_c) ** 2)
        + np.sum((state.Y1 - y_c) ** 2)
    )


def perturbation_diag(z_c_prev, z_c, mu, F) -> float:
    """``||z_c - z_c_prev + mu F(z_c_prev)||^2``: how far one step is from a mean-gradient step."""
    z_c_prev = np.asarray(z_c_prev, float)
    d = np.asarray(z_c, float) - z_c_prev + mu * np.asarray(F(z_c_prev))
    return float(d @ d)


@dataclass
class Record:
    iteration: int
    x_c: np.ndarray
    y_c: np.ndarray
    consensus_error: float
    mse: float | None
    grad_norm: float
    d_norm_sq: float | None
    extras: dict = field(default_factory=dict)


SCALAR_FIELDS = ("consensus_err", "mse", "grad_norm", "d_norm_sq")
_ATTR = {"consensus_err": "consensus_error", "mse": "mse", "grad_norm": "grad_norm", "d_norm_sq": "d_norm_sq"}


def _fmt(v) -> str:
    # repr of a Python float is the shortest string that round-trips
    return "" if v is None else repr(float(v))


def _parse(s: str):
    return None if s == "" else float(s)


@dataclass
class Trajectory:
    M1: int
    M2: int
    extra_fields: tuple = ()
    records: list = field(default_factory=list)

    def append(self, rec: Record) -> None:
        if self.records and rec.iteration <= self.records[-1].iteration:
            raise ValueError("iteration indices must be strictly increasing")
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def field(self, name: str) -> np.ndarray:
        """Column as a float array; missing values become NaN."""
        if name == "iter":
            vals = [r.iteration for r in self.records]
        elif name in _ATTR:
            vals = [getattr(r, _ATTR[name]) for r in self.records]
        elif name in self.extra_fields:
            vals = [r.extras.get(name) for r in self.records]
        else:
            raise KeyError(name)
        return np.array([np.nan if v is None else v for v in vals], dtype=float)

    def header(self) -> list[str]:
        return (["iter"] + [f"x_c{j}" for j in range(self.M1)] + [f"y_c{j}" for j in range(self.M2)]
                + list(SCALAR_FIELDS) + list(self.extra_fields))

    def rows(self):
        for r in self.records:
            yield ([str(r.iteration)] + [_fmt(v) for v in r.x_c] + [_fmt(v) for v in r.y_c]
                   + [_fmt(r.consensus_error), _fmt(r.mse), _fmt(r.grad_norm), _fmt(r.d_norm_sq)]
                   + [_fmt(r.extras.get(k)) for k in self.extra_fields])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        w.writerows(self.rows())
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Trajectory":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        M1 = sum(h.startswith("x_c") for h in header)
        M2 = sum(h.startswith("y_c") for h in header)
        extras = tuple(header[1 + M1 + M2 + len(SCALAR_FIELDS):])
        traj = cls(M1, M2, extras)
        for row in reader:
            vals = row[1 + M1 + M2:]
            traj.append(Record(
                iteration=int(row[0]),
                x_c=np.array([float(v) for v in row[1:1 + M1]]),
                y_c=np.array([float(v) for v in row[1 + M1:1 + M1 + M2]]),
                consensus_error=float(vals[0]), mse=_parse(vals[1]), grad_norm=float(vals[2]),
                d_norm_sq=_parse(vals[3]),
                extras={k: _parse(v) for k, v in zip(extras, vals[4:])},
            ))
        return traj


def steady_state(trajectory: Trajectory, field_name: str, window_fraction: float = 0.5) -> float:
    """Mean of ``field_name`` over the last ``window_fraction`` of the records."""
    if not 0 < window_fraction <= 1:
        raise ValueError("window_fraction must lie in (0, 1]")
    n_keep = int(len(trajectory) * window_fraction)
    if n_keep == 0:
        raise ValueError("steady-state window is empty")
    vals = trajectory.field(field_name)[-n_keep:]
    vals = vals[~np.isnan(vals)]
    if vals.size == 0:
        raise ValueError(f"field {field_name!r} has no values in the window")
    return float(vals.mean())


def first_hit(trajectory: Trajectory, field_name: str, threshold: float) -> int | None:
    """Iteration of the first record with ``field <= threshold``, or ``None``."""
    vals = trajectory.field(field_name)
    idx = np.flatnonzero(vals <= threshold)
    return None if idx.size == 0 else int(trajectory.records[idx[0]].iteration)
