"""Piecewise-flat metrics, conformal factors and Whitney-form mass matrices.

A metric assigns a constant flat inner product to every top simplex, given
either by vertex coordinates or by edge lengths. A conformal factor ``f`` is
constant per top cell and rescales the metric to ``f^2 g``; on p-forms this
weights the element mass by ``f^(n - 2p)``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import combinations
from math import factorial

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .complex import OrientedSimplicialComplex, TensorProductComplex
from .kernels import whitney_local_mass

SPD_PIVOT_RATIO = 1e-12


class MetricData:
    """Per-top-simplex flat geometry.

    Attributes
    ----------
    edge_lengths : (N_1,) array
    cell_gram : (N_n, n, n) array
        Gram matrix of the edge vectors ``x_i - x_0`` of each top cell.
    volumes : (N_n,) array
    bary_gram : (N_n, n+1, n+1) array
        Inner products of barycentric coordinate gradients.
    """

    def __init__(self, complex_, edge_lengths):
        self.complex = complex_
        n = complex_.dim
        lengths = np.asarray(edge_lengths, dtype=float)
        if lengths.shape != (complex_.num_cells(1),):
            raise ValueError(f"expected {complex_.num_cells(1)} edge lengths, got {lengths.shape}")
        if np.any(~(lengths > 0)):
            raise ValueError("edge lengths must be positive")
        self.edge_lengths = lengths
        tops = complex_.simplices[n]
        n_top = len(tops)
        if n == 0:
            self.cell_gram = np.zeros((n_top, 0, 0))
            self.volumes = np.ones(n_top)
            self.bary_gram = np.zeros((n_top, 1, 1))
            return
        edge_faces = complex_.top_cell_faces[1]
        local_edges = list(combinations(range(n + 1), 2))
        sq = np.zeros((n_top, n + 1, n + 1))
        for f, (i, j) in enumerate(local_edges):
            sq[:, i, j] = sq[:, j, i] = lengths[edge_faces[:, f]] ** 2
        # E_ij = (l_0i^2 + l_0j^2 - l_ij^2) / 2 for i, j = 1..n
        e = 0.5 * (sq[:, 0, 1:, None] + sq[:, 0, None, 1:] - sq[:, 1:, 1:])
        dets = np.linalg.det(e)
        eig_min = np.linalg.eigvalsh(e)[:, 0]
        scale = np.max(np.abs(e), axis=(1, 2))
        bad = np.flatnonzero(~(eig_min > 1e-12 * scale))
        if bad.size:
            t = int(bad[0])
            raise ValueError(f"degenerate top simplex {t} {tuple(tops[t])}: edge lengths violate strict simplex inequalities")
        self.cell_gram = e
        self.volumes = np.sqrt(dets) / factorial(n)
        einv = np.linalg.inv(e)
        proj = np.zeros((n, n + 1))
        proj[:, 0] = -1.0
        proj[:, 1:] = np.eye(n)
        self.bary_gram = np.einsum("ai,tab,bj->tij", proj, einv, proj)

    @classmethod
    def from_coordinates(cls, complex_, coords):
        """Metric induced by an embedding; ``coords[label]`` is the position of a vertex."""
        coords = np.asarray(coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        edges = complex_.simplices[1] if complex_.dim >= 1 else np.zeros((0, 2), dtype=np.int64)
        lengths = np.linalg.norm(coords[edges[:, 1]] - coords[edges[:, 0]], axis=1)
        return cls(complex_, lengths)

    @classmethod
    def from_edge_dict(cls, complex_, mapping):
        """Metric from ``{(i, j): length}`` covering every edge of the complex."""
        lengths = np.empty(complex_.num_cells(1))
        for k, (i, j) in enumerate(complex_.simplices[1]):
            key = (int(i), int(j))
            if key in mapping:
                lengths[k] = mapping[key]
            elif key[::-1] in mapping:
                lengths[k] = mapping[key[::-1]]
            else:
                raise ValueError(f"missing edge length for edge {key}")
        return cls(complex_, lengths)

    def restrict(self, subdomain):
        """The metric on the closure of a subdomain."""
        sub = subdomain.complex
        return MetricData(sub, self.edge_lengths[subdomain.global_index[1]])

    def edge_dict(self):
        return {(int(i), int(j)): float(v) for (i, j), v in zip(self.complex.simplices[1], self.edge_lengths)}


class TensorMetric:
    """Product metric on a :class:`TensorProductComplex`, one metric per factor."""

    def __init__(self, complex_, metric_a, metric_b):
        self.complex = complex_
        self.factors = (metric_a, metric_b)


@dataclass
class ConformalField:
    """Positive conformal factor, constant on each top cell."""

    factor: np.ndarray
    profile: str = "custom"

    def __post_init__(self):
        self.factor = np.asarray(self.factor, dtype=float)
        if np.any(~(self.factor > 0)):
            raise ValueError("conformal factor must be positive")

    def __mul__(self, c):
        return ConformalField(self.factor * float(c), self.profile)

    __rmul__ = __mul__


def unit_field(complex_):
    return ConformalField(np.ones(complex_.num_cells(complex_.dim)), "unit")


def _cell_weights(complex_, conformal, p):
    n = complex_.dim
    if conformal is None:
        return np.ones(complex_.num_cells(n))
    f = conformal.factor
    if f.shape != (complex_.num_cells(n),):
        raise ValueError("conformal field does not match the number of top cells")
    return f ** (n - 2 * p)


def element_masses(complex_, metric, p, conformal=None):
    """Weighted element mass matrices, shape (N_n, C(n+1,p+1), C(n+1,p+1))."""
    n = complex_.dim
    local = np.array(list(combinations(range(n + 1), p + 1)), dtype=np.int64)
    vols = metric.volumes * _cell_weights(complex_, conformal, p)
    return whitney_local_mass(metric.bary_gram, vols, local, n)


def mass_matrix(complex_, metric, p, conformal=None):
    """Whitney-form mass matrix on p-cochains.

    Entry (s, t) is the sum over top cells T of ``f(T)^(n-2p)`` times the
    integral of ``<W_s, W_t>`` over T. For tensor-product complexes this is
    the block-diagonal graded tensor product of the factor masses.
    """
    if isinstance(complex_, TensorProductComplex):
        if conformal is not None:
            raise ValueError("conformal fields are not supported on tensor-product complexes")
        return _tensor_mass(complex_, metric, p)
    n = complex_.dim
    if p < 0 or p > n:
        raise ValueError(f"degree {p} outside [0, {n}]")
    loc = element_masses(complex_, metric, p, conformal)
    faces = complex_.top_cell_faces[p]
    k = faces.shape[1]
    rows = np.repeat(faces, k, axis=1).ravel()
    cols = np.tile(faces, (1, k)).ravel()
    size = complex_.num_cells(p)
    mat = sp.csr_matrix((loc.ravel(), (rows, cols)), shape=(size, size))
    return ((mat + mat.T) * 0.5).tocsr()


def _tensor_mass(complex_, metric, p):
    a, b = complex_.factors
    ma, mb = metric.factors
    blocks = [sp.kron(mass_matrix(a, ma, q), mass_matrix(b, mb, r))
              for q, r, _, _ in complex_.blocks(p)]
    if not blocks:
        return sp.csr_matrix((0, 0))
    return sp.block_diag(blocks, format="csr")


def volume(complex_, metric, conformal=None):
    """Total volume ``sum_T f(T)^n vol(T)``."""
    if isinstance(complex_, TensorProductComplex):
        a, b = complex_.factors
        return volume(a, metric.factors[0]) * volume(b, metric.factors[1])
    w = _cell_weights(complex_, conformal, 0)
    return float(np.sum(w * metric.volumes))


def check_spd(mat, ratio=SPD_PIVOT_RATIO):
    """Attempt an unpivoted sparse LU; SPD iff every pivot exceeds ``ratio`` times the largest.

    Returns the pivot ratio; raises ``np.linalg.LinAlgError`` on failure.
    """
    mat = sp.csc_matrix(mat)
    if mat.shape[0] == 0:
        return 1.0
    if abs(mat - mat.T).max() > 1e-12 * abs(mat).max():
        raise np.linalg.LinAlgError("mass matrix is not symmetric")
    try:
        lu = spla.splu(mat, permc_spec="NATURAL", diag_pivot_thresh=0.0,
                       options={"SymmetricMode": True})
    except RuntimeError as exc:
        raise np.linalg.LinAlgError(f"factorization failed: {exc}") from exc
    piv = lu.U.diagonal()
    if np.any(piv <= ratio * np.max(np.abs(piv))):
        raise np.linalg.LinAlgError("matrix is not positive definite")
    return float(np.min(piv) / np.max(piv))


def squeeze_field(complex_, subdomain, eps):
    """Conformal factor 1 on the top cells of ``U`` and ``eps`` elsewhere."""
    if not eps > 0:
        raise ValueError(f"squeeze parameter must be positive, got {eps}")
    if eps > 1:
        raise ValueError(f"squeeze parameter must be at most 1, got {eps}")
    f = np.full(complex_.num_cells(complex_.dim), float(eps))
    f[subdomain.top_cells] = 1.0
    return ConformalField(f, "sharp")


def cell_distance(complex_, subdomain):
    """Combinatorial distance (vertex adjacency) of every top cell from ``U``."""
    adj = complex_.top_adjacency
    dist = np.full(adj.shape[0], -1, dtype=np.int64)
    queue = deque()
    for t in subdomain.top_cells:
        dist[t] = 0
        queue.append(t)
    indptr, indices = adj.indptr, adj.indices
    while queue:
        t = queue.popleft()
        for s in indices[indptr[t]:indptr[t + 1]]:
            if dist[s] < 0:
                dist[s] = dist[t] + 1
                queue.append(s)
    dist[dist < 0] = np.iinfo(np.int64).max // 2  # unreachable components
    return dist


def smoothing_sequence(complex_, subdomain, eps, j, width=6):
    """Decreasing approximations of the sharp field ``1_U + eps 1_{M\\U}``.

    ``f_j = eps ** min(1, dist * j / width)`` with ``dist`` the combinatorial
    distance from ``U``: equal to 1 on ``U``, geometric decay across a
    transition layer ``width / j`` cells thick, equal to the sharp field
    once ``j >= width``.
    """
    if j < 1:
        raise ValueError("smoothing index must be >= 1")
    if not 0 < eps <= 1:
        raise ValueError(f"squeeze parameter must lie in (0, 1], got {eps}")
    dist = cell_distance(complex_, subdomain).astype(float)
    expo = np.minimum(1.0, dist * j / width)
    return ConformalField(float(eps) ** expo, f"geometric(width={width})")
