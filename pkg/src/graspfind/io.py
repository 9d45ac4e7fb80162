"""ASCII mesh and point-cloud file formats.

Point clouds: ASCII PLY with x y z and optional nx ny nz properties.
Meshes: OFF and OBJ (v/f records only) readers, OFF writer.
Floats are written with 9 significant digits.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .cloud import PointCloud
from .meshes import TriangleMesh

__all__ = ["FormatError", "load_ply", "save_ply", "load_off", "save_off", "load_obj", "load_mesh"]

FLOAT_FMT = "{:.9g}"


class FormatError(Exception):
    pass


def _fmt_row(values) -> str:
    return " ".join(FLOAT_FMT.format(v) for v in values)


def save_ply(path, cloud: PointCloud) -> None:
    with_normals = cloud.normals is not None
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(cloud)}",
        "property float x",
        "property float y",
        "property float z",
    ]
    if with_normals:
        lines += ["property float nx", "property float ny", "property float nz"]
    if cloud.viewpoint is not None:
        lines.append("comment viewpoint " + _fmt_row(cloud.viewpoint))
    lines.append("end_header")
    rows = (
        np.hstack([cloud.points, cloud.normals]) if with_normals else cloud.points
    )
    body = [_fmt_row(row) for row in rows]
    Path(path).write_text("\n".join(lines + body) + "\n")


def load_ply(path) -> PointCloud:
    text = Path(path).read_text().splitlines()
    if not text or text[0].strip() != "ply":
        raise FormatError("not a PLY file")
    n_vertex = None
    properties: list[str] = []
    viewpoint = None
    body_start = None
    in_vertex_element = False
    for i, raw in enumerate(text[1:], start=1):
        line = raw.strip()
        if line.startswith("comment viewpoint"):
            viewpoint = np.array([float(x) for x in line.split()[2:5]])
            continue
        if line.startswith("comment"):
            continue
        if line.startswith("format"):
            if "ascii" not in line:
                raise FormatError("only ascii PLY is supported")
            continue
        if line.startswith("element"):
            parts = line.split()
            in_vertex_element = parts[1] == "vertex"
            if in_vertex_element:
                n_vertex = int(parts[2])
            continue
        if line.startswith("property") and in_vertex_element:
            properties.append(line.split()[-1])
            continue
        if line == "end_header":
            body_start = i + 1
            break
    if n_vertex is None or body_start is None:
        raise FormatError("malformed PLY header")
    expected = ["x", "y", "z"]
    has_normals = properties[:6] == ["x", "y", "z", "nx", "ny", "nz"]
    if not has_normals and properties[:3] != expected:
        raise FormatError(f"unsupported vertex properties {properties}")
    n_cols = 6 if has_normals else 3
    rows = text[body_start:body_start + n_vertex]
    if len(rows) < n_vertex:
        raise FormatError("vertex data truncated")
    data = np.array([[float(x) for x in r.split()[:n_cols]] for r in rows])
    data = data.reshape(n_vertex, n_cols) if n_vertex else data.reshape(0, n_cols)
    normals = data[:, 3:6] if has_normals else None
    return PointCloud(data[:, :3], normals, viewpoint)


def save_off(path, mesh: TriangleMesh) -> None:
    lines = ["OFF", f"{len(mesh.vertices)} {len(mesh.triangles)} 0"]
    lines += [_fmt_row(v) for v in mesh.vertices]
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


def load_off(path) -> TriangleMesh:
    tokens: list[str] = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            tokens += line.split()
    if not tokens or tokens[0] != "OFF":
        raise FormatError("not an OFF file")
    try:
        nv, nf = int(tokens[1]), int(tokens[2])
        pos = 4  # skip edge count
        verts = np.array([float(x) for x in tokens[pos:pos + 3 * nv]]).reshape(nv, 3)
        pos += 3 * nv
        tris = []
        for _ in range(nf):
            arity = int(tokens[pos])
            face = [int(x) for x in tokens[pos + 1:pos + 1 + arity]]
            pos += 1 + arity
            for k in range(1, arity - 1):  # fan-triangulate polygons
                tris.append([face[0], face[k], face[k + 1]])
    except (ValueError, IndexError) as exc:
        raise FormatError(f"malformed OFF file: {exc}") from exc
    return TriangleMesh(verts, np.array(tris, dtype=np.int32))


def load_obj(path) -> TriangleMesh:
    verts: list[list[float]] = []
    tris: list[list[int]] = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if line.startswith("v "):
            parts = line.split()
            verts.append([float(x) for x in parts[1:4]])
        elif line.startswith("f "):
            idx = []
            for token in line.split()[1:]:
                # f supports v, v/vt, v/vt/vn, v//vn references
                i = int(token.split("/")[0])
                idx.append(i - 1 if i > 0 else len(verts) + i)
            for k in range(1, len(idx) - 1):
                tris.append([idx[0], idx[k], idx[k + 1]])
    if not verts or not tris:
        raise FormatError("OBJ file has no usable v/f records")
    return TriangleMesh(np.array(verts), np.array(tris, dtype=np.int32))


def load_mesh(path) -> TriangleMesh:
    suffix = Path(path).suffix.lower()
    if suffix == ".off":
        return load_off(path)
    if suffix == ".obj":
        return load_obj(path)
    raise FormatError(f"unsupported mesh format {suffix!r}")
