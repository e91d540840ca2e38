"""Mesh export (binary STL, legacy ASCII VTK) and dataset archiving."""

from __future__ import annotations

import struct
import tarfile
from pathlib import Path

import numpy as np

from .errors import DataError
from .stent import StentMesh

#: 50-byte binary STL facet record (packed little-endian)
_STL_RECORD = np.dtype([("normal", "<f4", 3), ("verts", "<f4", (3, 3)), ("attr", "<u2")])


def write_stl(path, vertices: np.ndarray, triangles: np.ndarray) -> None:
    """Binary STL (little-endian, normals recomputed per facet)."""
    v = np.asarray(vertices, dtype=float)
    t = np.asarray(triangles, dtype=np.int64)
    if t.ndim != 2 or t.shape[1] != 3:
        raise DataError("triangles must be an (n, 3) index array")
    p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    n = np.cross(p1 - p0, p2 - p0)
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    norm[norm == 0] = 1.0
    n /= norm
    rec = np.zeros(len(t), dtype=_STL_RECORD)
    rec["normal"] = n
    rec["verts"][:, 0] = p0
    rec["verts"][:, 1] = p1
    rec["verts"][:, 2] = p2
    with open(path, "wb") as fh:
        fh.write(b"\0" * 80)
        fh.write(struct.pack("<I", len(t)))
        fh.write(rec.tobytes())


def read_stl(path) -> tuple[np.ndarray, np.ndarray]:
    """Read a binary STL back into (vertices, triangles) without welding."""
    raw = Path(path).read_bytes()
    (n_tri,) = struct.unpack("<I", raw[80:84])
    rec = np.frombuffer(raw[84:], dtype=_STL_RECORD, count=n_tri)
    verts = rec["verts"].reshape(-1, 3).astype(float)
    tris = np.arange(len(verts), dtype=np.int64).reshape(-1, 3)
    return verts, tris


def write_vtk_surface(path, vertices: np.ndarray, triangles: np.ndarray, name: str = "surface") -> None:
    """Legacy ASCII VTK PolyData with triangle cells."""
    v = np.asarray(vertices, dtype=float)
    t = np.asarray(triangles, dtype=np.int64)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{name}\nASCII\nDATASET POLYDATA\n")
        fh.write(f"POINTS {len(v)} double\n")
        for p in v:
            fh.write(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")
        fh.write(f"POLYGONS {len(t)} {4 * len(t)}\n")
        for tri in t:
            fh.write(f"3 {tri[0]} {tri[1]} {tri[2]}\n")


def write_vtk_stent(path, mesh: StentMesh, displacements: np.ndarray | None = None, name: str = "stent") -> None:
    """Legacy ASCII VTK of the stent wires (line cells), with optional
    nodal displacement vectors as point data."""
    nodes = mesh.nodes
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{name}\nASCII\nDATASET POLYDATA\n")
        fh.write(f"POINTS {len(nodes)} double\n")
        u = None
        if displacements is not None:
            u = np.asarray(displacements, dtype=float).reshape(-1, 3)
            if len(u) != len(nodes):
                raise DataError("displacement count does not match node count")
        pos = nodes if u is None else nodes + u
        for p in pos:
            fh.write(f"{p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")
        fh.write(f"LINES {len(mesh.beams)} {3 * len(mesh.beams)}\n")
        for a, b in mesh.beams:
            fh.write(f"2 {a} {b}\n")
        if u is not None:
            fh.write(f"POINT_DATA {len(nodes)}\nVECTORS displacement double\n")
            for d in u:
                fh.write(f"{d[0]:.9g} {d[1]:.9g} {d[2]:.9g}\n")


def export_dataset_archive(dataset_dir, archive_path) -> None:
    """Pack a campaign directory into one reproducible .tar.gz archive."""
    root = Path(dataset_dir)
    if not (root / "manifest.json").exists():
        raise DataError(f"{root}: not a campaign directory (no manifest)")
    with tarfile.open(archive_path, "w:gz") as tar:
        for p in sorted(root.rglob("*")):
            tar.add(p, arcname=p.relative_to(root))


def import_dataset_archive(archive_path, dataset_dir) -> None:
    """Unpack an archive produced by export_dataset_archive."""
    dest = Path(dataset_dir)
    dest.mkdir(parents=True, exist_ok=True)
    with tarfile.open(archive_path, "r:gz") as tar:
        for member in tar.getmembers():
            target = dest / member.name
            if not target.resolve().is_relative_to(dest.resolve()):
                raise DataError("archive contains paths outside the destination")
        tar.extractall(dest)
    if not (dest / "manifest.json").exists():
        raise DataError(f"{archive_path}: archive holds no campaign manifest")
