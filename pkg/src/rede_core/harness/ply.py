"""Minimal ASCII PLY ingestion for object models."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..exceptions import PlyParseError
from ..geometry import PointCloud, cloud_diameter

__all__ = ["load_ply", "save_ply"]

_NUMERIC = {
    "char", "uchar", "int8", "uint8",
    "short", "ushort", "int16", "uint16",
    "int", "uint", "int32", "uint32",
    "float", "float32", "double", "float64",
}


def load_ply(path) -> PointCloud:
    """Parse an ASCII PLY with at least x, y, z vertex float properties.

    Faces and extra vertex properties (colors, normals) are ignored; the
    returned cloud carries its exact diameter.  Malformed input raises
    :class:`PlyParseError` with the offending line number.
    """
    lines = Path(path).read_text(encoding="utf-8").splitlines()

    def fail(lineno: int, msg: str):
        raise PlyParseError(f"{path}:{lineno}: {msg}")

    if not lines or lines[0].strip() != "ply":
        fail(1, "missing 'ply' magic line")

    vertex_count = None
    vertex_props: list[str] = []
    elements: list[tuple[str, int]] = []
    current_element = None
    data_start = None
    fmt_seen = False
    for i, raw in enumerate(lines[1:], start=2):
        tokens = raw.split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] != "ascii":
                fail(i, "only 'format ascii' is supported")
            fmt_seen = True
        elif tokens[0] == "element":
            if len(tokens) != 3:
                fail(i, "malformed element line")
            try:
                count = int(tokens[2])
            except ValueError:
                fail(i, f"element count {tokens[2]!r} is not an integer")
            current_element = tokens[1]
            elements.append((current_element, count))
            if current_element == "vertex":
                vertex_count = count
        elif tokens[0] == "property":
            if current_element == "vertex":
                if tokens[1] == "list":
                    fail(i, "list properties are not supported on vertices")
                if len(tokens) != 3 or tokens[1] not in _NUMERIC:
                    fail(i, "malformed vertex property line")
                vertex_props.append(tokens[2])
        elif tokens[0] == "end_header":
            data_start = i
            break
        else:
            fail(i, f"unexpected header line {raw!r}")
    if data_start is None:
        fail(len(lines), "header never ends (no 'end_header')")
    if not fmt_seen:
        fail(data_start, "missing 'format' line")
    if vertex_count is None:
        fail(data_start, "no 'element vertex' declaration")
    for axis in ("x", "y", "z"):
        if axis not in vertex_props:
            fail(data_start, f"vertex element lacks property {axis!r}")
    if elements[0][0] != "vertex":
        fail(data_start, "vertex element must be declared first")
    cols = [vertex_props.index(a) for a in ("x", "y", "z")]

    data_rows = [
        (no, ln)
        for no, ln in enumerate(lines[data_start:], start=data_start + 1)
        if ln.strip()
    ]
    if len(data_rows) < vertex_count:
        fail(
            len(lines),
            f"expected {vertex_count} vertex lines, found {len(data_rows)}",
        )
    if vertex_count == 0:
        raise PlyParseError(f"{path}: vertex element is empty")
    pts = np.empty((vertex_count, 3))
    for row, (lineno, raw) in enumerate(data_rows[:vertex_count]):
        tokens = raw.split()
        if len(tokens) < len(vertex_props):
            fail(lineno, f"expected {len(vertex_props)} values, found {len(tokens)}")
        try:
            pts[row] = [float(tokens[c]) for c in cols]
        except ValueError:
            fail(lineno, "non-numeric vertex coordinate")
    return PointCloud(pts, cloud_diameter(pts))


def save_ply(path, points) -> None:
    """Write points as a minimal ASCII PLY (x, y, z float properties)."""
    pts = np.asarray(points, dtype=np.float64)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {pts.shape[0]}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        fh.write("end_header\n")
        for p in pts:
            fh.write(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")
