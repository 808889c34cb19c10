"""File formats: trajectory CSV, observation CSV with JSON sidecar, impulse JSON.

Floats in the CSV formats are written with 17 significant digits so that a
write/read round trip reproduces every value bit for bit.  JSON payloads rely
on Python's shortest round-trip float representation, which is also lossless.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .model import ObservedData, Trajectory
from .realization import ImpulseResponse

__all__ = [
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_observed_csv",
    "read_observed_csv",
    "write_impulse_json",
    "read_impulse_json",
]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Write states as CSV with header ``t,x1,...,xn`` and rows ``t = 1..T``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x{i + 1}" for i in range(traj.n)])
        for k in range(traj.T):
            w.writerow([k + 1] + [_fmt(v) for v in traj.states[k]])


def read_trajectory_csv(path) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0] != "t":
        raise ValueError(f"{path}: expected header starting with 't'")
    n = len(rows[0]) - 1
    if n < 1 or rows[0][1:] != [f"x{i + 1}" for i in range(n)]:
        raise ValueError(f"{path}: malformed trajectory header {rows[0]}")
    states = []
    for k, row in enumerate(rows[1:]):
        if len(row) != n + 1:
            raise ValueError(f"{path}: row {k + 2} has {len(row)} fields, expected {n + 1}")
        if int(row[0]) != k + 1:
            raise ValueError(f"{path}: row {k + 2} has t={row[0]}, expected {k + 1}")
        states.append([float(v) for v in row[1:]])
    return Trajectory(np.array(states))


def write_observed_csv(data: ObservedData, csv_path, sidecar_path) -> None:
    """Write observations ``t = 2..T`` as CSV plus a JSON sidecar.

    The sidecar carries the known initial state ``x``, the output map ``C``
    (row-major), and the dimensions, since the CSV alone cannot reconstruct
    the identification problem.
    """
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"y{i + 1}" for i in range(data.p)])
        for k in range(data.T - 1):
            w.writerow([k + 2] + [_fmt(v) for v in data.observations[k]])
    sidecar = {
        "x": data.x.tolist(),
        "C": data.C.tolist(),
        "n": data.n,
        "p": data.p,
        "T": data.T,
    }
    with open(sidecar_path, "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_observed_csv(csv_path, sidecar_path) -> ObservedData:
    with open(sidecar_path) as fh:
        sidecar = json.load(fh)
    for key in ("x", "C", "n", "p", "T"):
        if key not in sidecar:
            raise ValueError(f"{sidecar_path}: sidecar is missing '{key}'")
    n, p, T = int(sidecar["n"]), int(sidecar["p"]), int(sidecar["T"])
    C = np.array(sidecar["C"], dtype=float)
    if C.shape != (p, n):
        raise ValueError(f"{sidecar_path}: C has shape {C.shape}, sidecar says ({p}, {n})")
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["t"] + [f"y{i + 1}" for i in range(p)]:
        raise ValueError(f"{csv_path}: malformed observation header")
    if len(rows) - 1 != T - 1:
        raise ValueError(f"{csv_path}: found {len(rows) - 1} observation rows, sidecar says {T - 1}")
    Y = []
    for k, row in enumerate(rows[1:]):
        if int(row[0]) != k + 2:
            raise ValueError(f"{csv_path}: row {k + 2} has t={row[0]}, expected {k + 2}")
        Y.append([float(v) for v in row[1:]])
    return ObservedData(x=np.array(sidecar["x"], dtype=float), C=C, observations=np.array(Y))


def write_impulse_json(g: ImpulseResponse, path) -> None:
    """Write impulse response blocks as JSON ``{"m", "p", "blocks"}``."""
    payload = {"m": g.m, "p": g.p, "blocks": [G.tolist() for G in g.blocks]}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_impulse_json(path) -> ImpulseResponse:
    with open(path) as fh:
        payload = json.load(fh)
    for key in ("m", "p", "blocks"):
        if key not in payload:
            raise ValueError(f"{path}: impulse JSON is missing '{key}'")
    blocks = tuple(np.array(G, dtype=float) for G in payload["blocks"])
    return ImpulseResponse(m=int(payload["m"]), p=int(payload["p"]), blocks=blocks)
