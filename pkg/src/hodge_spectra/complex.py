"""Oriented simplicial complexes, subdomains, tensor products and exact cohomology.

Simplices are stored with ascending vertex labels; the orientation of an input
top simplex is kept separately as the sign of the permutation that sorts it.
All ranks are computed over the rationals by fraction-free elimination.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .kernels import exact_rank, independent_columns


def permutation_sign(seq):
    """Sign of the permutation sorting ``seq`` (entries assumed distinct)."""
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


@dataclass(frozen=True)
class Simplex:
    vertices: tuple

    def __post_init__(self):
        if len(set(self.vertices)) != len(self.vertices):
            raise ValueError(f"repeated vertex in simplex {self.vertices}")

    @property
    def dim(self):
        return len(self.vertices) - 1

    @property
    def orientation(self):
        return permutation_sign(self.vertices)

    def canonical(self):
        return tuple(sorted(self.vertices))


@dataclass
class Cochain:
    """A real p-cochain on the p-simplices of some carrier complex."""

    degree: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def __len__(self):
        return len(self.values)


class OrientedSimplicialComplex:
    """Pure simplicial complex generated by a list of top simplices.

    Attributes
    ----------
    dim : int
        Top dimension ``n``.
    simplices : list of (N_p, p+1) int arrays
        Sorted vertex labels of the p-simplices, rows in lexicographic order.
    top_orientation : (N_n,) int array
        +1/-1 permutation sign of each top simplex as it was supplied.
    """

    def __init__(self, top_simplices):
        tops = [tuple(int(v) for v in s) for s in top_simplices]
        if not tops:
            raise ValueError("a complex needs at least one top simplex")
        sizes = {len(s) for s in tops}
        if len(sizes) != 1:
            raise ValueError(f"inconsistent vertex counts among top simplices: {sorted(sizes)}")
        n = sizes.pop() - 1
        canon = []
        signs = []
        for s in tops:
            simplex = Simplex(s)
            canon.append(simplex.canonical())
            signs.append(simplex.orientation)
        if len(set(canon)) != len(canon):
            raise ValueError("duplicate top simplex")
        self.dim = n
        self._top_input_order = canon
        self.top_orientation = np.array(signs, dtype=np.int64)

        skeleta = [set() for _ in range(n + 1)]
        for s in canon:
            for p in range(n + 1):
                skeleta[p].update(combinations(s, p + 1))
        self.simplices = []
        self._index = []
        for p in range(n + 1):
            if p == n:
                rows = canon  # keep the caller's cell order for top cells
            else:
                rows = sorted(skeleta[p])
            arr = np.array(rows, dtype=np.int64).reshape(len(rows), p + 1)
            self.simplices.append(arr)
            self._index.append({r: i for i, r in enumerate(rows)})
        self.vertex_labels = self.simplices[0][:, 0].copy()
        self._cob = {}

    # ------------------------------------------------------------------ shape
    def num_cells(self, p):
        if p < 0 or p > self.dim:
            return 0
        return len(self.simplices[p])

    @property
    def f_vector(self):
        return tuple(self.num_cells(p) for p in range(self.dim + 1))

    @property
    def euler_characteristic(self):
        return sum((-1) ** p * c for p, c in enumerate(self.f_vector))

    def index_of(self, simplex):
        """Index of a simplex given by any ordering of its vertex labels."""
        key = tuple(sorted(int(v) for v in simplex))
        return self._index[len(key) - 1][key]

    def has_simplex(self, simplex):
        key = tuple(sorted(int(v) for v in simplex))
        return 0 < len(key) <= self.dim + 1 and key in self._index[len(key) - 1]

    # -------------------------------------------------------------- operators
    def boundary(self, p):
        """Integer boundary matrix from p-chains to (p-1)-chains, shape (N_{p-1}, N_p)."""
        if p <= 0 or p > self.dim:
            return sp.csr_matrix((self.num_cells(p - 1), self.num_cells(p)), dtype=np.int64)
        return self.coboundary(p - 1).T.tocsr()

    def coboundary(self, p):
        """Integer coboundary d_p from p- to (p+1)-cochains, shape (N_{p+1}, N_p)."""
        if p in self._cob:
            return self._cob[p]
        n_lo, n_hi = self.num_cells(p), self.num_cells(p + 1)
        if p < 0 or p >= self.dim:
            mat = sp.csr_matrix((n_hi, n_lo), dtype=np.int64)
        else:
            hi = self.simplices[p + 1]
            rows, cols, vals = [], [], []
            index = self._index[p]
            for j, s in enumerate(map(tuple, hi)):
                for i in range(p + 2):
                    rows.append(j)
                    cols.append(index[s[:i] + s[i + 1:]])
                    vals.append(-1 if i % 2 else 1)
            mat = sp.csr_matrix((vals, (rows, cols)), shape=(n_hi, n_lo), dtype=np.int64)
        self._cob[p] = mat
        return mat

    def d(self, p, x):
        """Apply the coboundary to a p-cochain (array or Cochain)."""
        vals = x.values if isinstance(x, Cochain) else x
        return self.coboundary(p) @ vals

    @cached_property
    def top_cell_faces(self):
        """Per degree p, (N_n, C(n+1, p+1)) global indices of each top cell's p-faces.

        Local faces are enumerated as ascending combinations of the cell's
        (sorted) vertices, so every local face is positively oriented.
        """
        out = []
        tops = self.simplices[self.dim]
        for p in range(self.dim + 1):
            local = list(combinations(range(self.dim + 1), p + 1))
            idx = self._index[p]
            arr = np.empty((len(tops), len(local)), dtype=np.int64)
            for t, cell in enumerate(map(tuple, tops)):
                for f, loc in enumerate(local):
                    arr[t, f] = idx[tuple(cell[i] for i in loc)]
            out.append(arr)
        return out

    @cached_property
    def _cofaces_top(self):
        """For each (n-1)-simplex, the list of top cells containing it."""
        faces = self.top_cell_faces[self.dim - 1] if self.dim > 0 else None
        cof = [[] for _ in range(self.num_cells(self.dim - 1))]
        if faces is not None:
            for t, row in enumerate(faces):
                for f in row:
                    cof[f].append(t)
        return cof

    def boundary_skeleton(self):
        """Per degree, indices of simplices on the combinatorial boundary.

        A facet is on the boundary when it has exactly one top coface; the
        skeleton is the closure of those facets.
        """
        if self.dim == 0:
            return [np.zeros(0, dtype=np.int64)]
        facets = [i for i, c in enumerate(self._cofaces_top) if len(c) == 1]
        return self._closure_of(self.dim - 1, facets)

    def _closure_of(self, q, idx):
        """Per degree p <= dim, indices of all faces of the given q-simplices."""
        sets = [set() for _ in range(self.dim + 1)]
        for i in idx:
            s = tuple(self.simplices[q][i])
            for p in range(q + 1):
                for f in combinations(s, p + 1):
                    sets[p].add(self._index[p][f])
        return [np.array(sorted(s), dtype=np.int64) for s in sets]

    @cached_property
    def top_adjacency(self):
        """Sparse top-cell adjacency through shared vertices."""
        vt = self.top_cell_faces[0]
        n_top = len(vt)
        rows = np.repeat(np.arange(n_top), vt.shape[1])
        inc = sp.csr_matrix((np.ones(rows.size), (rows, vt.ravel())),
                            shape=(n_top, self.num_cells(0)))
        adj = (inc @ inc.T).tocsr()
        adj.setdiag(0)
        adj.eliminate_zeros()
        return adj

    def __repr__(self):
        return f"OrientedSimplicialComplex(dim={self.dim}, f_vector={self.f_vector})"


def build_complex(top_simplices):
    """Build an oriented simplicial complex from its top simplices."""
    return OrientedSimplicialComplex(top_simplices)


class Subdomain:
    """A union ``U`` of top cells of a complex ``M``, with its closure and boundary."""

    def __init__(self, complex_, top_cells):
        top_cells = np.unique(np.asarray(top_cells, dtype=np.int64))
        if top_cells.size == 0:
            raise ValueError("subdomain needs at least one top cell")
        if top_cells.min() < 0 or top_cells.max() >= complex_.num_cells(complex_.dim):
            raise ValueError("top-cell index out of range")
        self.parent = complex_
        self.top_cells = top_cells
        n = complex_.dim
        self.closure = complex_._closure_of(n, top_cells)
        inside = np.zeros(complex_.num_cells(n), dtype=bool)
        inside[top_cells] = True
        self._inside = inside
        if n == 0:
            self.boundary_skeleton = [np.zeros(0, dtype=np.int64)]
        else:
            closure_facets = self.closure[n - 1]
            bnd = [f for f in closure_facets
                   if not all(inside[t] for t in complex_._cofaces_top[f])]
            self.boundary_skeleton = complex_._closure_of(n - 1, bnd)

    @property
    def dim(self):
        return self.parent.dim

    @property
    def inside(self):
        """Boolean mask over the parent's top cells."""
        return self._inside

    @cached_property
    def complex(self):
        """The closure of ``U`` as a standalone complex (same vertex labels)."""
        tops = self.parent.simplices[self.dim][self.top_cells]
        return OrientedSimplicialComplex(tops)

    @cached_property
    def global_index(self):
        """Per degree, parent index of each simplex of ``self.complex``."""
        sub = self.complex
        return [np.array([self.parent.index_of(s) for s in sub.simplices[p]], dtype=np.int64)
                for p in range(self.dim + 1)]

    def __repr__(self):
        return f"Subdomain({len(self.top_cells)} of {self.parent.num_cells(self.dim)} top cells)"


def restrict_cochain(cochain, subdomain):
    """Restrict a cochain on ``M`` to the closure of ``U`` (ordered as ``U.complex``)."""
    idx = subdomain.global_index[cochain.degree]
    return Cochain(cochain.degree, cochain.values[idx])


class TensorProductComplex:
    """Cubical tensor product of two cell complexes at the cochain level.

    p-cochains are ``⊕_{q+r=p} C^q(A) ⊗ C^r(B)``, blocks ordered by increasing
    ``q``; a basis element ``a⊗b`` sits at ``offset + ia * N_r(B) + ib``. The
    coboundary is ``d(a⊗b) = da⊗b + (-1)^q a⊗db``.
    """

    def __init__(self, a, b):
        self.factors = (a, b)
        self.dim = a.dim + b.dim
        self._cob = {}

    def blocks(self, p):
        """List of (q, r, offset, size) for degree p."""
        a, b = self.factors
        out = []
        off = 0
        for q in range(max(0, p - b.dim), min(p, a.dim) + 1):
            r = p - q
            size = a.num_cells(q) * b.num_cells(r)
            out.append((q, r, off, size))
            off += size
        return out

    def num_cells(self, p):
        if p < 0 or p > self.dim:
            return 0
        return sum(blk[3] for blk in self.blocks(p))

    @property
    def f_vector(self):
        return tuple(self.num_cells(p) for p in range(self.dim + 1))

    @property
    def euler_characteristic(self):
        return sum((-1) ** p * c for p, c in enumerate(self.f_vector))

    def coboundary(self, p):
        if p in self._cob:
            return self._cob[p]
        a, b = self.factors
        n_lo, n_hi = self.num_cells(p), self.num_cells(p + 1)
        if p < 0 or p >= self.dim:
            mat = sp.csr_matrix((n_hi, n_lo), dtype=np.int64)
        else:
            hi = {(q, r): (off, size) for q, r, off, size in self.blocks(p + 1)}
            pieces = []
            for q, r, off, size in self.blocks(p):
                if (q + 1, r) in hi:
                    blk = sp.kron(a.coboundary(q), sp.identity(b.num_cells(r), dtype=np.int64))
                    pieces.append((hi[(q + 1, r)][0], off, blk))
                if (q, r + 1) in hi:
                    sign = -1 if q % 2 else 1
                    blk = sign * sp.kron(sp.identity(a.num_cells(q), dtype=np.int64), b.coboundary(r))
                    pieces.append((hi[(q, r + 1)][0], off, blk))
            mat = sp.lil_matrix((n_hi, n_lo), dtype=np.int64)
            coo_r, coo_c, coo_v = [], [], []
            for r0, c0, blk in pieces:
                blk = sp.coo_matrix(blk)
                coo_r.append(blk.row + r0)
                coo_c.append(blk.col + c0)
                coo_v.append(blk.data)
            if coo_r:
                mat = sp.csr_matrix((np.concatenate(coo_v), (np.concatenate(coo_r), np.concatenate(coo_c))),
                                    shape=(n_hi, n_lo), dtype=np.int64)
            else:
                mat = sp.csr_matrix((n_hi, n_lo), dtype=np.int64)
        self._cob[p] = mat
        return mat

    def d(self, p, x):
        vals = x.values if isinstance(x, Cochain) else x
        return self.coboundary(p) @ vals

    def __repr__(self):
        return f"TensorProductComplex(dim={self.dim}, f_vector={self.f_vector})"


def tensor_product_complex(a, b):
    return TensorProductComplex(a, b)


def point_complex():
    """The one-point complex, unit for the tensor product."""
    return OrientedSimplicialComplex([(0,)])


# --------------------------------------------------------------------------
# exact cohomology


@dataclass
class CohomologySummary:
    betti: tuple
    relative_dims: tuple | None = None


def _rank(mat):
    return exact_rank(mat) if mat.nnz else 0


def coboundary_ranks(complex_, dofs=None):
    """Exact ranks of d_p for p = 0..n, optionally restricted to DOF subsets.

    ``dofs`` is a per-degree list of index arrays; the restricted coboundary
    keeps rows and columns in those subsets.
    """
    ranks = []
    for p in range(complex_.dim + 1):
        mat = complex_.coboundary(p)
        if dofs is not None and p < complex_.dim:
            mat = mat[dofs[p + 1]][:, dofs[p]]
        ranks.append(_rank(mat) if p < complex_.dim else 0)
    return ranks


def betti_numbers(complex_, dofs=None):
    """Rational Betti numbers ``b_p = dim ker d_p - rank d_{p-1}``.

    With ``dofs`` this is the cohomology of the sub-cochain-complex spanned by
    the given simplices (e.g. interior simplices for relative cohomology).
    """
    ranks = coboundary_ranks(complex_, dofs)
    out = []
    for p in range(complex_.dim + 1):
        n_p = complex_.num_cells(p) if dofs is None else len(dofs[p])
        prev = ranks[p - 1] if p > 0 else 0
        out.append(n_p - ranks[p] - prev)
    return tuple(out)


def image_basis_columns(coboundary, rows=None, cols=None):
    """Column indices of ``coboundary`` forming a basis of its image, found exactly."""
    mat = sp.csc_matrix(coboundary)
    if rows is not None:
        mat = mat[rows]
    if cols is not None:
        mat = mat[:, cols]
    if mat.shape[1] == 0 or mat.nnz == 0:
        return np.zeros(0, dtype=np.int64)
    return np.flatnonzero(independent_columns(mat))


def relative_cohomology_dim(complex_, subdomain, p):
    """Dimension of H^p(U/M): closed cochains on U modulo restrictions of closed cochains of M.

    Uses dim R(Z_M) = dim Z_M - dim(Z_M ∩ ker R), where R restricts to the
    closure of U; exact cochains of U are restrictions of exact cochains of M,
    so they already lie in R(Z_M).
    """
    n = complex_.dim
    if p < 0 or p > n:
        raise ValueError(f"degree {p} outside [0, {n}]")
    sub = subdomain.complex
    z_u = sub.num_cells(p) - (_rank(sub.coboundary(p)) if p < n else 0)
    d_m = complex_.coboundary(p)
    z_m = complex_.num_cells(p) - (_rank(d_m) if p < n else 0)
    outside = np.setdiff1d(np.arange(complex_.num_cells(p)), subdomain.closure[p])
    if p < n and outside.size:
        z_m_off = outside.size - _rank(d_m[:, outside])
    else:
        z_m_off = outside.size
    return int(z_u - (z_m - z_m_off))


def cohomology_summary(complex_, subdomain=None):
    betti = betti_numbers(complex_)
    rel = None
    if subdomain is not None:
        rel = tuple(relative_cohomology_dim(complex_, subdomain, p) for p in range(complex_.dim + 1))
    return CohomologySummary(betti=betti, relative_dims=rel)
