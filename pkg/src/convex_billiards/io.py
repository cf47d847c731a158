"""Reading domain specs and writing reports, tables and plot data."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInput
from .geometry import (DEFAULT_K, EllipseParams, SupportFunction, boundary_points,
                       circle_support, ellipse_support, s_of_psi)

DOMAIN_SCHEMA = "billiard-domain/1"
REPORT_SCHEMA = "billiard-report/1"
ORBIT_HEADER = ["n", "s", "theta", "phi", "p", "x", "y", "lift"]


# domain specs ---------------------------------------------------------------

def polygon_centroid(points: np.ndarray) -> np.ndarray:
    """Area centroid of a closed polygon given by its vertices."""
    x, y = points[:, 0], points[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    A = 0.5 * cross.sum()
    if abs(A) < 1e-300:
        raise InvalidInput("boundary encloses no area")
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * A)


def support_from_boundary(points, K: int = DEFAULT_K, recenter: bool = True) -> SupportFunction:
    """Support function of a densely sampled convex boundary.

    ``h(psi) = max_i <p_i, n(psi)>`` on a uniform grid, then truncated to
    ``K`` modes.  The origin is moved to the area centroid first.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 16:
        raise InvalidInput("boundary must be an (n, 2) array with n >= 16")
    if recenter:
        pts = pts - polygon_centroid(pts)
    M = max(1024, 8 * K)
    psi = 2 * np.pi * np.arange(M) / M
    n = np.stack([np.cos(psi), np.sin(psi)])
    vals = (pts @ n).max(axis=0)
    return SupportFunction.from_samples(vals, K=K)


def domain_from_dict(spec: dict) -> SupportFunction:
    """Build a support function from a domain spec.

    Kinds: ``circle`` {R}, ``ellipse`` {a, b}, ``fourier`` {modes: {k: [re, im]}},
    ``boundary`` {points: [[x, y], ...]}, and ``perturbed`` {base, terms:
    [[k, amplitude, phase], ...]}.  Optional ``K`` sets the truncation.
    """
    if spec.get("schema", DOMAIN_SCHEMA) != DOMAIN_SCHEMA:
        raise InvalidInput(f"unsupported domain schema {spec.get('schema')!r}")
    kind = spec.get("kind")
    K = int(spec.get("K", DEFAULT_K))
    if kind == "circle":
        return circle_support(float(spec.get("R", 1.0)), K)
    if kind == "ellipse":
        return ellipse_support(EllipseParams(float(spec["a"]), float(spec["b"])), K)
    if kind == "fourier":
        modes = {int(k): complex(*v) if isinstance(v, list) else complex(v)
                 for k, v in spec["modes"].items()}
        return SupportFunction.from_modes(modes, K)
    if kind == "boundary":
        return support_from_boundary(spec["points"], K)
    if kind == "perturbed":
        base = domain_from_dict(spec["base"])
        return base.perturbed([tuple(t) for t in spec["terms"]])
    raise InvalidInput(f"unknown domain kind {kind!r}")


def load_domain(path) -> SupportFunction:
    try:
        spec = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read domain file {path}: {exc}") from exc
    return domain_from_dict(spec)


# JSON -------------------------------------------------------------------------

def _plain(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return _plain(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [_plain(obj.real), _plain(obj.imag)]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _fmt(x: float) -> str:
    return format(x, ".17g")


def dumps_report(payload: dict, kind: str) -> str:
    """Versioned, deterministic JSON with floats at 17 significant digits."""
    doc = {"schema": REPORT_SCHEMA, "kind": kind, **_plain(payload)}

    def enc(v, ind):
        pad = "  " * ind
        if isinstance(v, dict):
            if not v:
                return "{}"
            items = [f'{pad}  {json.dumps(k)}: {enc(x, ind + 1)}' for k, x in v.items()]
            return "{\n" + ",\n".join(items) + f"\n{pad}}}"
        if isinstance(v, list):
            return "[" + ", ".join(enc(x, ind + 1) for x in v) + "]"
        if isinstance(v, float):
            return _fmt(v)
        return json.dumps(v)

    return enc(doc, 0) + "\n"


def write_report(path, payload: dict, kind: str) -> Path:
    path = Path(path)
    path.write_text(dumps_report(payload, kind))
    return path


# CSV ----------------------------------------------------------------------------

def write_csv(path, header, columns) -> Path:
    path = Path(path)
    rows = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def read_csv(path) -> dict:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float)
    return {k: data[:, i] for i, k in enumerate(header)}


def orbit_columns(h: SupportFunction, psi, theta) -> list:
    """Columns of the orbit dump for unwrapped normal angles and angles."""
    psi = np.asarray(psi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    P = h.perimeter
    lift = np.floor(psi / (2 * np.pi))
    s = np.asarray(s_of_psi(h, psi)) - lift * P
    phi = np.mod(psi + theta, 2 * np.pi)
    hd = h.derivatives(psi)
    p = hd[0] * np.cos(theta) + hd[1] * np.sin(theta)
    xy = boundary_points(h, psi)
    return [np.arange(psi.size), s, theta, phi, p, xy[:, 0], xy[:, 1], lift]


def write_orbit(path, h: SupportFunction, psi, theta) -> Path:
    return write_csv(path, ORBIT_HEADER, orbit_columns(h, psi, theta))


def write_loop_table(out_dir, table, summary) -> tuple:
    """``loop_table.csv`` (psi,d,Psi,mu,h) and ``loop_table.json``."""
    out_dir = Path(out_dir)
    c = write_csv(out_dir / "loop_table.csv", ["psi", "d", "Psi", "mu", "h"],
                  [table.psis, table.d, table.Psi, table.mu, table.h])
    j = write_report(out_dir / "loop_table.json", summary, "loop-table")
    return c, j


def write_action_table(path, grid) -> tuple:
    """Raw little-endian float64 matrix ``An`` plus a JSON sidecar."""
    path = Path(path)
    np.ascontiguousarray(grid.An, dtype="<f8").tofile(path)
    side = path.with_suffix(path.suffix + ".json")
    write_report(side, {"N": grid.N, "c": grid.c, "n": grid.n,
                        "theta_band": list(grid.theta_band), "dtype": "<f8"}, "action-table")
    return path, side


def read_action_table(path) -> tuple:
    path = Path(path)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    N = int(meta["N"])
    return np.fromfile(path, dtype="<f8").reshape(N, N), meta
