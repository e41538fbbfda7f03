"""File formats.

Sites (JSON)::

    {"sites": [{"x": 0.1, "y": -0.2, "radius": 0.3}, ...],
     "domain": [[x, y], ...]}            # optional, counterclockwise disk polygon

``radius`` may be replaced by ``height`` (``phi = ln cosh r``, any sign);
both default to zero.

Target (JSON)::

    {"masses": [m_0, m_1, ...]}          # or {"mode": "uniform"}

Metric sidecar (JSON), next to a Wavefront OBJ with the mesh faces::

    {"genus": 2,
     "edges": [[u, v, length], ...],     # 0-based vertex indices
     "boundary": [{"label": "a1", "path": [v0, v1, ...]}, ...]}

The boundary lists the sides of the cut-open surface counterclockwise; a side
labelled ``x^-1`` runs over the mesh edges of side ``x`` in reverse.

All floats are written with 17 significant digits.
"""
from __future__ import annotations

import json
import math
import os

import numpy as np

from .errors import InputError

# ----------------------------------------------------------------- JSON output


def _num(x) -> str:
    x = float(x)
    if not math.isfinite(x):
        return "null"
    if x == int(x) and abs(x) < 1e15:
        return format(x, ".1f")
    return format(x, ".17g")


def dumps(obj, indent: int | None = 1) -> str:
    """JSON text with floats at 17 significant digits; deterministic."""

    def enc(o, level):
        pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
        end = "" if indent is None else "\n" + " " * (indent * level)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [pad + json.dumps(str(k)) + ": " + enc(v, level + 1) for k, v in o.items()]
            return "{" + ",".join(items) + end + "}"
        if isinstance(o, (list, tuple, np.ndarray)):
            if len(o) == 0:
                return "[]"
            if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in o):
                return "[" + ", ".join(enc(v, level + 1) for v in o) + "]"
            return "[" + ",".join(pad + enc(v, level + 1) for v in o) + end + "]"
        if isinstance(o, (bool, np.bool_)):
            return "true" if o else "false"
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return _num(o)
        if o is None:
            return "null"
        return json.dumps(o)

    return enc(obj, 0) + "\n"


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


# ----------------------------------------------------------------- sites, targets


def parse_sites(data, source="sites"):
    """``(disk points (n, 2), heights (n,), domain polygon or None)``."""
    if not isinstance(data, dict) or "sites" not in data:
        raise InputError(f"{source}: expected an object with a 'sites' list")
    rows = data["sites"]
    if not isinstance(rows, list) or not rows:
        raise InputError(f"{source}: 'sites' must be a nonempty list")
    pts, heights = [], []
    for k, row in enumerate(rows):
        try:
            if isinstance(row, dict):
                x, y = float(row["x"]), float(row["y"])
                if "height" in row:
                    h = float(row["height"])
                else:
                    r = float(row.get("radius", 0.0))
                    if r < 0:
                        raise ValueError("negative radius")
                    h = math.log(math.cosh(r))
            else:
                x, y = float(row[0]), float(row[1])
                h = math.log(math.cosh(float(row[2]))) if len(row) > 2 else 0.0
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise InputError(f"{source}: site {k} is malformed ({exc})") from exc
        pts.append((x, y))
        heights.append(h)
    domain = data.get("domain")
    if domain is not None:
        try:
            domain = np.array(domain, dtype=float).reshape(-1, 2)
        except (TypeError, ValueError) as exc:
            raise InputError(f"{source}: domain must be a list of [x, y] pairs") from exc
    return np.array(pts), np.array(heights), domain


def read_sites(path):
    return parse_sites(read_json(path), str(path))


def sites_to_dict(points, radii=None, domain=None) -> dict:
    out = {"sites": []}
    for k, (x, y) in enumerate(np.asarray(points, dtype=float)):
        row = {"x": float(x), "y": float(y)}
        if radii is not None:
            row["radius"] = float(radii[k])
        out["sites"].append(row)
    if domain is not None:
        out["domain"] = np.asarray(domain, dtype=float).tolist()
    return out


def read_target(path):
    """``(mode, masses or None)`` from a target file."""
    data = read_json(path)
    if isinstance(data, list):
        data = {"masses": data}
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected an object")
    if "masses" in data:
        try:
            m = np.array(data["masses"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise InputError(f"{path}: masses must be numbers") from exc
        if m.ndim != 1:
            raise InputError(f"{path}: masses must be a flat list")
        return "file", m
    if "mode" in data:
        return str(data["mode"]), None
    raise InputError(f"{path}: expected 'masses' or 'mode'")


# ----------------------------------------------------------------- meshes


def read_obj(path):
    """Vertex positions and triangle faces (0-based) of a Wavefront OBJ file."""
    verts, faces = [], []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from exc
    with fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            try:
                if parts[0] == "v":
                    verts.append([float(t) for t in parts[1:4]])
                elif parts[0] == "f":
                    idx = [int(t.split("/")[0]) for t in parts[1:]]
                    idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                    if len(idx) < 3:
                        raise ValueError("face with fewer than three vertices")
                    for k in range(1, len(idx) - 1):
                        faces.append([idx[0], idx[k], idx[k + 1]])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc
    if not faces:
        raise InputError(f"{path}: no faces")
    v = np.array(verts, dtype=float).reshape(-1, 3)
    f = np.array(faces, dtype=np.int64)
    if f.min() < 0 or f.max() >= len(v):
        raise InputError(f"{path}: face index out of range")
    return v, f


def write_obj(path, positions, faces, uv=None):
    """OBJ text; with ``uv`` each face corner also references its texture coordinate."""
    lines = []
    for p in np.asarray(positions, dtype=float):
        p = list(p) + [0.0] * (3 - len(p))
        lines.append("v " + " ".join(_num(x) for x in p))
    if uv is not None:
        for t in np.asarray(uv, dtype=float):
            lines.append("vt " + " ".join(_num(x) for x in t))
    for f in np.asarray(faces) + 1:
        if uv is None:
            lines.append("f " + " ".join(str(int(i)) for i in f))
        else:
            lines.append("f " + " ".join(f"{int(i)}/{int(i)}" for i in f))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def sidecar_path(obj_path) -> str:
    base, _ = os.path.splitext(str(obj_path))
    return base + ".metric.json"


def read_metric_mesh(obj_path, sidecar=None):
    from .fuchsian import MetricMesh

    positions, faces = read_obj(obj_path)
    side = sidecar or sidecar_path(obj_path)
    if not os.path.exists(side):
        raise InputError(f"metric sidecar {side} not found")
    data = read_json(side)
    try:
        genus = int(data["genus"])
        edges = np.array([[int(e[0]), int(e[1])] for e in data["edges"]], dtype=np.int64)
        lengths = np.array([float(e[2]) for e in data["edges"]])
        boundary = [(str(b["label"]), [int(v) for v in b["path"]]) for b in data["boundary"]]
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise InputError(f"{side}: malformed metric sidecar ({exc})") from exc
    try:
        return MetricMesh(faces, edges, lengths, genus, boundary, positions)
    except Exception as exc:
        raise InputError(f"{side}: {exc}") from exc


def metric_to_dict(mesh) -> dict:
    return {
        "genus": int(mesh.genus),
        "edges": [[int(u), int(v), float(l)] for (u, v), l in zip(mesh.edges, mesh.lengths)],
        "boundary": [{"label": lab, "path": [int(v) for v in path]} for lab, path in mesh.boundary],
    }


def write_metric_mesh(obj_path, mesh, positions=None):
    """OBJ geometry plus its metric sidecar."""
    pos = mesh.positions if positions is None else positions
    if pos is None:
        pos = np.zeros((mesh.n_vertices, 3))
    write_obj(obj_path, pos, mesh.faces)
    write_json(sidecar_path(obj_path), metric_to_dict(mesh))
