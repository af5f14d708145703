"""Test meshes (circles, flat tori, icosahedral spheres) and their JSON files.

Mesh file layout::

    {"dimension": n,
     "vertices": [[x, y, ...], ...],          # optional when edge lengths given
     "top_cells": [[i, j, ...], ...],
     "regions": {"U": [top-cell indices]},
     "edge_lengths": {"i,j": length, ...}}    # optional

Tensor-product meshes are stored as ``{"kind": "tensor", "factors": [...]}``
with one mesh object per factor.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import permutations
from pathlib import Path

import numpy as np

from .complex import Subdomain, TensorProductComplex, build_complex, point_complex
from .metric import MetricData, TensorMetric


@dataclass
class Mesh:
    complex: object
    metric: object
    regions: dict = field(default_factory=dict)
    vertices: np.ndarray | None = None
    centroids: np.ndarray | None = None
    name: str = "mesh"

    @property
    def dim(self):
        return self.complex.dim

    @property
    def is_tensor(self):
        return isinstance(self.complex, TensorProductComplex)

    def subdomain(self, region="U"):
        if region not in self.regions:
            raise KeyError(f"mesh has no region {region!r}")
        return Subdomain(self.complex, self.regions[region])

    def with_region(self, name, predicate):
        """Add a region made of the top cells whose centroid satisfies ``predicate``."""
        mask = np.array([bool(predicate(c)) for c in self.centroids])
        self.regions[name] = np.flatnonzero(mask)
        return self


def _periodic_mesh(cells, unwrapped, vertices, name):
    """Mesh from cells with unwrapped corner coordinates (lengths from those)."""
    cx = build_complex(cells)
    lengths = {}
    for ids, pts in zip(cells, unwrapped):
        for a in range(len(ids)):
            for b in range(a + 1, len(ids)):
                key = (min(ids[a], ids[b]), max(ids[a], ids[b]))
                ell = float(np.linalg.norm(pts[a] - pts[b]))
                if key in lengths and abs(lengths[key] - ell) > 1e-12:
                    raise ValueError(f"inconsistent periodic edge {key}")
                lengths[key] = ell
    metric = MetricData.from_edge_dict(cx, lengths)
    centroids = np.array([np.mean(p, axis=0) for p in unwrapped])
    return Mesh(cx, metric, {}, np.asarray(vertices, dtype=float), centroids, name)


def circle(k, length=1.0):
    """Cycle graph with ``k`` edges of equal length, total length ``length``."""
    if k < 3:
        raise ValueError("a simplicial circle needs at least 3 edges")
    h = length / k
    cells = [(i, (i + 1) % k) for i in range(k)]
    unwrapped = [np.array([[i * h], [(i + 1) * h]]) for i in range(k)]
    verts = [[i * h] for i in range(k)]
    return _periodic_mesh(cells, unwrapped, verts, f"circle{k}")


def torus2(k, size=1.0, m=None):
    """Triangulated flat torus on a ``k x m`` vertex grid, 2·k·m triangles."""
    m = k if m is None else m
    if k < 3 or m < 3:
        raise ValueError("torus grid needs at least 3 vertices per direction")
    hx, hy = size / k, size / m

    def vid(i, j):
        return (i % k) + k * (j % m)

    cells, unwrapped = [], []
    for j in range(m):
        for i in range(k):
            c = [np.array([i * hx, j * hy]), np.array([(i + 1) * hx, j * hy]),
                 np.array([(i + 1) * hx, (j + 1) * hy]), np.array([i * hx, (j + 1) * hy])]
            ids = [vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]
            cells.append((ids[0], ids[1], ids[2]))
            unwrapped.append(np.array([c[0], c[1], c[2]]))
            cells.append((ids[0], ids[2], ids[3]))
            unwrapped.append(np.array([c[0], c[2], c[3]]))
    verts = [[(v % k) * hx, (v // k) * hy] for v in range(k * m)]
    return _periodic_mesh(cells, unwrapped, verts, f"torus2_{k}x{m}")


def torus3(k, size=1.0):
    """Flat 3-torus, ``k^3`` cubes each cut into 6 tetrahedra (Kuhn triangulation)."""
    if k < 3:
        raise ValueError("torus grid needs at least 3 vertices per direction")
    h = size / k

    def vid(p):
        return (p[0] % k) + k * (p[1] % k) + k * k * (p[2] % k)

    cells, unwrapped = [], []
    eye = np.eye(3, dtype=int)
    for z in range(k):
        for y in range(k):
            for x in range(k):
                base = np.array([x, y, z])
                for perm in permutations(range(3)):
                    path = [base]
                    for axis in perm:
                        path.append(path[-1] + eye[axis])
                    cells.append(tuple(vid(p) for p in path))
                    unwrapped.append(np.array(path, dtype=float) * h)
    verts = [[(v % k) * h, ((v // k) % k) * h, (v // (k * k)) * h] for v in range(k ** 3)]
    return _periodic_mesh(cells, unwrapped, verts, f"torus3_{k}")


def torus_tensor(dims, lengths=None):
    """Flat torus as an iterated tensor product of circles."""
    dims = list(dims)
    if not dims:
        raise ValueError("need at least one factor")
    lengths = [1.0] * len(dims) if lengths is None else list(lengths)
    meshes = [circle(k, ell) for k, ell in zip(dims, lengths)]
    out = meshes[0]
    for other in meshes[1:]:
        out = tensor_mesh(out, other)
    out.name = "torus_tensor_" + "x".join(map(str, dims))
    return out


def point_mesh():
    """The one-point mesh, unit for :func:`tensor_mesh`."""
    cx = point_complex()
    return Mesh(cx, MetricData(cx, np.zeros(0)), {}, np.zeros((1, 0)), np.zeros((1, 0)), "point")


def tensor_mesh(a, b):
    cx = TensorProductComplex(a.complex, b.complex)
    return Mesh(cx, TensorMetric(cx, a.metric, b.metric), {}, None, None, f"{a.name}*{b.name}")


def sphere_ico(level, radius=1.0):
    """Icosahedral sphere subdivided ``level`` times (``10*4^level + 2`` vertices)."""
    if level < 0:
        raise ValueError("level must be >= 0")
    t = (1 + 5 ** 0.5) / 2
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0), (0, -1, t), (0, 1, t),
             (0, -1, -t), (0, 1, -t), (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11), (1, 5, 9), (5, 11, 4),
             (11, 10, 2), (10, 7, 6), (7, 1, 8), (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8),
             (3, 8, 9), (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(level):
        mid = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in mid:
                v = verts[a] + verts[b]
                verts.append(v / np.linalg.norm(v))
                mid[key] = len(verts) - 1
            return mid[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    coords = np.array(verts) * radius
    cx = build_complex(faces)
    metric = MetricData.from_coordinates(cx, coords)
    centroids = coords[np.array(faces)].mean(axis=1)
    return Mesh(cx, metric, {}, coords, centroids, f"sphere_ico{level}")


def disk_in_torus(k, radius=0.25, size=1.0):
    """Triangulated torus with region ``U`` = cells whose centroid lies in a centred disk."""
    mesh = torus2(k, size)
    centre = np.array([size / 2, size / 2])
    mesh.with_region("U", lambda c: np.linalg.norm(c - centre) < radius)
    mesh.name = f"disk_in_torus_{k}_r{radius}"
    return mesh


def band_on_sphere(level, half_width=0.3):
    """Icosahedral sphere with region ``U`` = equatorial band ``|z| < half_width``."""
    mesh = sphere_ico(level)
    mesh.with_region("U", lambda c: abs(c[2]) < half_width)
    mesh.name = f"band_on_sphere_{level}"
    return mesh


def strip_in_torus(k, lo=0.25, hi=0.75):
    """Triangulated torus with region ``U`` = horizontal strip ``lo < y < hi`` (an annulus)."""
    mesh = torus2(k)
    mesh.with_region("U", lambda c: lo < c[1] < hi)
    return mesh


def boxes_in_torus3(k, boxes=None):
    """3-torus with region ``U`` = union of boxes of whole cubes.

    ``boxes`` lists per box a ``(lo, hi)`` cube-index range per axis (``hi``
    exclusive). The default is two cubical boxes separated by one layer of
    cubes in every direction, so ``U`` has two components.
    """
    mesh = torus3(k)
    if boxes is None:
        half = k // 2
        boxes = [[(0, half - 1)] * 3, [(half, k - 1)] * 3]
    h = 1.0 / k

    def inside(c):
        cube = np.floor(np.asarray(c) / h).astype(int)
        return any(all(lo <= x < hi for x, (lo, hi) in zip(cube, box)) for box in boxes)

    mesh.with_region("U", inside)
    mesh.name = f"boxes_in_torus3_{k}"
    return mesh


GENERATORS = {
    "point": point_mesh,
    "circle": circle,
    "torus2": torus2,
    "torus3": torus3,
    "torus_tensor": torus_tensor,
    "sphere_ico": sphere_ico,
    "disk_in_torus": disk_in_torus,
    "band_on_sphere": band_on_sphere,
    "strip_in_torus": strip_in_torus,
    "boxes_in_torus3": boxes_in_torus3,
}


# --------------------------------------------------------------------- JSON


def mesh_to_dict(mesh):
    if mesh.is_tensor:
        a, b = mesh.complex.factors
        ma, mb = mesh.metric.factors
        return {"kind": "tensor", "dimension": mesh.dim, "name": mesh.name,
                "factors": [mesh_to_dict(Mesh(a, ma)), mesh_to_dict(Mesh(b, mb))]}
    cx = mesh.complex
    out = {"dimension": cx.dim, "name": mesh.name}
    if mesh.vertices is not None:
        out["vertices"] = np.asarray(mesh.vertices).tolist()
    out["top_cells"] = cx.simplices[cx.dim].tolist()
    out["regions"] = {k: np.asarray(v).tolist() for k, v in mesh.regions.items()}
    out["edge_lengths"] = {f"{i},{j}": float(v) for (i, j), v in mesh.metric.edge_dict().items()}
    return out


def metric_from_dict(complex_, data, vertices=None):
    if "edge_lengths" in data:
        mapping = {}
        for key, val in data["edge_lengths"].items():
            i, j = (int(x) for x in key.split(","))
            mapping[(i, j)] = float(val)
        return MetricData.from_edge_dict(complex_, mapping)
    if vertices is None:
        raise ValueError("mesh has neither edge lengths nor vertex coordinates")
    return MetricData.from_coordinates(complex_, vertices)


def mesh_from_dict(data, metric=None):
    if data.get("kind") == "tensor":
        a, b = (mesh_from_dict(f) for f in data["factors"])
        out = tensor_mesh(a, b)
        out.name = data.get("name", out.name)
        return out
    cells = data["top_cells"]
    cx = build_complex(cells)
    if "dimension" in data and int(data["dimension"]) != cx.dim:
        raise ValueError(f"declared dimension {data['dimension']} does not match cells of dimension {cx.dim}")
    verts = np.asarray(data["vertices"], dtype=float) if data.get("vertices") else None
    geom = metric if metric is not None else data
    mdata = metric_from_dict(cx, geom, verts)
    regions = {k: np.asarray(v, dtype=np.int64) for k, v in data.get("regions", {}).items()}
    centroids = None
    if verts is not None:
        centroids = verts[np.asarray(cells)].mean(axis=1)
    return Mesh(cx, mdata, regions, verts, centroids, data.get("name", "mesh"))


def save_mesh(mesh, path):
    Path(path).write_text(json.dumps(mesh_to_dict(mesh)))


def load_mesh(path, metric_path=None):
    data = json.loads(Path(path).read_text())
    metric = json.loads(Path(metric_path).read_text()) if metric_path else None
    return mesh_from_dict(data, metric)


def generate(kind, **params):
    if kind not in GENERATORS:
        raise ValueError(f"unknown mesh kind {kind!r}; choose from {sorted(GENERATORS)}")
    return GENERATORS[kind](**params)
