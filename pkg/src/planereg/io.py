"""File formats: PLY clouds, JSON transforms/planes/matches/correspondences, CSV rows."""

import csv
import json
import math
import os
import sys

import numpy as np

from ._validation import check_unit_vector
from .exceptions import NoHorizontalPlane, ParseError, UnsupportedFormat
from .geometry import RigidMotion
from .metrics import CorrespondenceSet

UP_MAX_ANGLE = math.radians(30.0)

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


# -- PLY -----------------------------------------------------------------------

class _Element:
    def __init__(self, name, count):
        self.name = name
        self.count = count
        self.props = []  # (name, dtype) or (name, ("list", count_dtype, item_dtype))

    @property
    def has_list(self):
        return any(isinstance(t, tuple) for _, t in self.props)


def _parse_header(f):
    """Read the header; returns ``(format, elements, header_lines, header_bytes)``."""
    first = f.readline()
    if first.rstrip(b"\r\n") != b"ply":
        raise ParseError("missing 'ply' magic", 1)
    fmt = None
    elements = []
    line_no = 1
    nbytes = len(first)
    while True:
        raw = f.readline()
        if not raw:
            raise ParseError("unexpected end of file in header", line_no + 1)
        line_no += 1
        nbytes += len(raw)
        try:
            tokens = raw.decode("ascii").split()
        except UnicodeDecodeError:
            raise ParseError("non-ASCII header line", line_no) from None
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        key = tokens[0]
        if key == "end_header":
            break
        if key == "format":
            if len(tokens) != 3:
                raise ParseError("malformed format line", line_no)
            fmt = tokens[1]
            if fmt == "binary_big_endian":
                raise UnsupportedFormat("big-endian PLY is not supported")
            if fmt not in ("ascii", "binary_little_endian"):
                raise ParseError(f"unknown PLY format {fmt!r}", line_no)
        elif key == "element":
            if len(tokens) != 3:
                raise ParseError("malformed element line", line_no)
            try:
                count = int(tokens[2])
            except ValueError:
                raise ParseError("element count is not an integer", line_no) from None
            elements.append(_Element(tokens[1], count))
        elif key == "property":
            if not elements:
                raise ParseError("property before any element", line_no)
            if len(tokens) == 5 and tokens[1] == "list":
                if tokens[2] not in _PLY_TYPES or tokens[3] not in _PLY_TYPES:
                    raise ParseError("unknown list property type", line_no)
                elements[-1].props.append((tokens[4], ("list", _PLY_TYPES[tokens[2]], _PLY_TYPES[tokens[3]])))
            elif len(tokens) == 3:
                if tokens[1] not in _PLY_TYPES:
                    raise ParseError(f"unknown property type {tokens[1]!r}", line_no)
                elements[-1].props.append((tokens[2], _PLY_TYPES[tokens[1]]))
            else:
                raise ParseError("malformed property line", line_no)
        else:
            raise ParseError(f"unknown header keyword {key!r}", line_no)
    if fmt is None:
        raise ParseError("missing format line", line_no)
    return fmt, elements, line_no, nbytes


def _vertex_fields(elem):
    names = [n for n, _ in elem.props]
    for axis in "xyz":
        if axis not in names:
            raise ParseError(f"vertex element lacks property {axis!r}")
    has_color = all(c in names for c in ("red", "green", "blue"))
    return names, has_color


def _read_ascii(f, elements, line_no):
    lines = f.read().decode("ascii", errors="replace").splitlines()
    pos = 0
    for elem in elements:
        if elem.name == "vertex":
            break
        pos += elem.count
    else:
        raise ParseError("no vertex element")
    vertex = elem
    names, has_color = _vertex_fields(vertex)
    if vertex.has_list:
        raise UnsupportedFormat("list properties on vertices are not supported")
    body = lines[pos:pos + vertex.count]
    first_line = line_no + pos + 1
    if len(body) < vertex.count:
        raise ParseError(f"expected {vertex.count} vertex lines, found {len(body)}", first_line + len(body))
    rows = []
    width = len(names)
    for k, text in enumerate(body):
        tokens = text.split()
        if len(tokens) != width:
            raise ParseError(f"expected {width} values, got {len(tokens)}", first_line + k)
        try:
            rows.append([float(t) for t in tokens])
        except ValueError:
            raise ParseError("non-numeric vertex value", first_line + k) from None
    data = np.array(rows, dtype=np.float64).reshape(-1, width)
    return data, names, has_color


def _read_binary(f, elements, header_bytes):
    offset = header_bytes
    for elem in elements:
        if elem.name == "vertex":
            break
        if elem.has_list:
            raise UnsupportedFormat("list-valued elements before the vertex element are not supported")
        offset += elem.count * np.dtype([(n, "<" + t) for n, t in elem.props]).itemsize
    else:
        raise ParseError("no vertex element")
    if elem.has_list:
        raise UnsupportedFormat("list properties on vertices are not supported")
    names, has_color = _vertex_fields(elem)
    dtype = np.dtype([(n, "<" + t) for n, t in elem.props])
    f.seek(offset)
    need = elem.count * dtype.itemsize
    buf = f.read(need)
    if len(buf) < need:
        raise ParseError(f"truncated vertex data: expected {need} bytes, got {len(buf)}", offset + len(buf))
    return np.frombuffer(buf, dtype=dtype, count=elem.count), names, has_color


def read_ply(path):
    """Read vertex positions and optional ``red/green/blue`` colors from a PLY file.

    Returns:
        ``(points, colors)``: float64 ``(n, 3)`` and uint8 ``(n, 3)`` or None.

    Raises:
        ParseError: malformed file; ``offset`` is a line number for ASCII
            content and a byte offset for binary content.
        UnsupportedFormat: big-endian files or list properties on vertices.
    """
    with open(path, "rb") as f:
        fmt, elements, line_no, header_bytes = _parse_header(f)
        if fmt == "ascii":
            data, names, has_color = _read_ascii(f, elements, line_no)
            col = {n: data[:, k] for k, n in enumerate(names)}
        else:
            data, names, has_color = _read_binary(f, elements, header_bytes)
            col = {n: data[n] for n in names}
    points = np.column_stack([np.asarray(col[a], dtype=np.float64) for a in "xyz"])
    points = np.ascontiguousarray(points.reshape(-1, 3))
    colors = None
    if has_color:
        rgb = np.column_stack([np.asarray(col[c], dtype=np.float64) for c in ("red", "green", "blue")])
        colors = np.clip(np.rint(rgb), 0, 255).astype(np.uint8).reshape(-1, 3)
    return points, colors


def write_ply(path, points, colors=None, *, binary=False):
    """Write points (as doubles) and optional uchar colors; ASCII uses round-trip float repr."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if colors is not None:
        colors = np.asarray(colors, dtype=np.uint8).reshape(-1, 3)
        if len(colors) != len(points):
            raise ValueError("colors must match points")
    fmt = "binary_little_endian" if binary else "ascii"
    header = ["ply", f"format {fmt} 1.0", f"element vertex {len(points)}",
              "property double x", "property double y", "property double z"]
    if colors is not None:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append("end_header")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fields = [("x", "<f8"), ("y", "<f8"), ("z", "<f8")]
            if colors is not None:
                fields += [("red", "u1"), ("green", "u1"), ("blue", "u1")]
            rec = np.empty(len(points), dtype=fields)
            rec["x"], rec["y"], rec["z"] = points.T
            if colors is not None:
                rec["red"], rec["green"], rec["blue"] = colors.T
            f.write(rec.tobytes())
        else:
            out = []
            for k, p in enumerate(points):
                row = [repr(float(v)) for v in p]
                if colors is not None:
                    row += [str(int(c)) for c in colors[k]]
                out.append(" ".join(row))
            f.write(("\n".join(out) + ("\n" if out else "")).encode("ascii"))


# -- JSON ----------------------------------------------------------------------

def _load_json(path):
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON in {path}: {exc.msg}", exc.lineno) from None


def _dump_json(obj, path):
    if path is None or path == "-":
        json.dump(obj, sys.stdout, indent=2)
        sys.stdout.write("\n")
        return
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2)
        f.write("\n")


def motion_to_json(motion):
    return {"matrix": motion.as_matrix().tolist()}


def motion_from_json(obj, tol=1e-6):
    if not isinstance(obj, dict) or "matrix" not in obj:
        raise ParseError("transform JSON must be an object with a 'matrix' key")
    try:
        M = np.array(obj["matrix"], dtype=np.float64)
    except (TypeError, ValueError):
        raise ParseError("transform matrix must be numeric") from None
    return RigidMotion.from_matrix(M, tol)


def write_transform(path, motion):
    """Write ``{"matrix": 4x4}``; Python float repr makes the round trip bit-exact."""
    _dump_json(motion_to_json(motion), path)


def read_transform(path, tol=1e-6):
    """Read a 4x4 transform, rejecting a bad last row or a non-orthonormal rotation."""
    return motion_from_json(_load_json(path), tol)


def planes_to_json(planes):
    return [
        {
            "normal": p.normal.tolist(),
            "offset": float(p.offset),
            "centroid": p.centroid.tolist(),
            "inliers": int(p.n_inliers),
        }
        for p in planes
    ]


def write_planes(path, planes):
    _dump_json({"planes": planes_to_json(planes)}, path)


def matches_to_json(match_set):
    return {
        "matches": [list(m) for m in match_set.matches],
        "classes": [c.name.lower() for c in match_set.classes],
        "distances": [float(d) for d in match_set.distances],
    }


def write_matches(path, match_set):
    _dump_json(matches_to_json(match_set), path)


def read_correspondences(path):
    """Read ``[[ax, ay, az, bx, by, bz], ...]``."""
    rows = _load_json(path)
    try:
        arr = np.array(rows, dtype=np.float64)
    except (TypeError, ValueError):
        raise ParseError("correspondences must be a list of 6-number arrays") from None
    if arr.size == 0:
        arr = arr.reshape(0, 6)
    if arr.ndim != 2 or arr.shape[1] != 6:
        raise ParseError("correspondences must be a list of 6-number arrays")
    return CorrespondenceSet.from_rows(arr)


def write_correspondences(path, corr):
    _dump_json(corr.to_rows().tolist(), path)


def read_manifest(path):
    """Batch-eval manifest: list of ``{"transform", "correspondences", "elapsed_ms"}``.

    ``transform`` may be null or name a missing file for an unregistered pair.
    Relative paths are resolved against the manifest's directory.
    """
    entries = _load_json(path)
    if not isinstance(entries, list):
        raise ParseError("manifest must be a JSON list")
    base = os.path.dirname(os.path.abspath(path))
    out = []
    for k, e in enumerate(entries):
        if not isinstance(e, dict) or "correspondences" not in e:
            raise ParseError(f"manifest entry {k} lacks 'correspondences'")
        t = e.get("transform")
        out.append({
            "transform": None if t is None else os.path.join(base, t),
            "correspondences": os.path.join(base, e["correspondences"]),
            "elapsed_ms": float(e.get("elapsed_ms", 0.0)),
        })
    return out


# -- CSV -----------------------------------------------------------------------

def write_benchmark_csv(rows, out):
    """Write BenchmarkRows with the toy-benchmark column schema to a path or file object."""
    from .toy import CSV_COLUMNS

    def emit(f):
        w = csv.DictWriter(f, fieldnames=list(CSV_COLUMNS), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r.as_csv_row())

    if hasattr(out, "write"):
        emit(out)
    else:
        with open(out, "w", newline="", encoding="utf-8") as f:
            emit(f)


# -- Up ------------------------------------------------------------------------

def _parse_vector_text(text):
    try:
        values = json.loads(text)
    except json.JSONDecodeError:
        values = text.replace(",", " ").split()
    try:
        return np.array(values, dtype=np.float64).reshape(-1)
    except (TypeError, ValueError):
        raise ParseError(f"cannot read a 3-vector from {text!r}") from None


def resolve_up(spec, planes=()):
    """Up vector from ``"from-planes"``, an explicit 3-vector or ``"file:<path>"``.

    ``"from-planes"`` takes the normal of the plane with the most inliers
    among those within 30 degrees of +Y, sign-aligned to +Y. Strings such
    as ``"0,1,0"`` are read as explicit vectors.

    Raises:
        NoHorizontalPlane: ``"from-planes"`` finds no qualifying plane.
        ValueError: a zero or malformed vector.
    """
    if isinstance(spec, str):
        if spec == "from-planes":
            best = None
            min_cos = math.cos(UP_MAX_ANGLE)
            for p in planes:
                if abs(p.normal[1]) > min_cos and (best is None or p.n_inliers > best.n_inliers):
                    best = p
            if best is None:
                raise NoHorizontalPlane("no detected plane within 30 degrees of +Y")
            n = np.array(best.normal, dtype=np.float64)
            return n if n[1] >= 0 else -n
        if spec.startswith("file:"):
            with open(spec[5:], encoding="utf-8") as f:
                v = _parse_vector_text(f.read().strip())
        else:
            v = _parse_vector_text(spec)
    else:
        v = spec
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape != (3,) or not np.all(np.isfinite(v)) or not np.linalg.norm(v) > 0:
        raise ValueError("Up must be a finite non-zero 3-vector")
    return check_unit_vector(v, "up")
