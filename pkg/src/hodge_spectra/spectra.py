"""Coexact Hodge spectra on p-cochains, Hodge decomposition and minimal primitives.

The degree-p problem is the pencil ``K x = mu M x`` with ``K = d^T M_{p+1} d``
and ``M = M_p``. Its nonzero eigenvalues are the coexact spectrum ``mu_{p,i}``.
The kernel ``ker d`` is removed by constraining to the M-orthogonal complement
of ``im d_{p-1}``. The spanning columns of ``d_{p-1}`` are chosen by exact
elimination. What remains of the kernel is harmonic. Its dimension is checked
against the exact Betti number.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .complex import TensorProductComplex, betti_numbers, image_basis_columns
from .kernels import exact_rank
from .metric import mass_matrix

DENSE_MAX = 1500
KERNEL_ABS = 1e-8
KERNEL_REL = 1e-6
BLOCK_MARGIN = 5


class BoundaryCondition(str, Enum):
    ABSOLUTE = "absolute"
    RELATIVE = "relative"


class KernelMismatchError(RuntimeError):
    """Numerical kernel dimension disagrees with the exact Betti number."""


class SolverError(RuntimeError):
    pass


class NotExactError(ValueError):
    def __init__(self, residual):
        super().__init__(f"cochain is not exact: relative residual {residual:.3e}")
        self.residual = residual


def _boundary_dofs(complex_, p):
    if isinstance(complex_, TensorProductComplex):
        return np.zeros(0, dtype=np.int64)
    return complex_.boundary_skeleton()[p]


def degree_dofs(complex_, p, bc):
    """Indices of p-simplices carrying degrees of freedom under ``bc``."""
    size = complex_.num_cells(p)
    if p < 0 or p > complex_.dim:
        return np.zeros(0, dtype=np.int64)
    if BoundaryCondition(bc) is BoundaryCondition.ABSOLUTE:
        return np.arange(size)
    return np.setdiff1d(np.arange(size), _boundary_dofs(complex_, p))


def _sub(mat, rows, cols):
    return sp.csr_matrix(mat)[rows][:, cols]


@dataclass
class GeneralizedEigenproblem:
    degree: int
    bc: BoundaryCondition
    stiffness: sp.csr_matrix
    mass: sp.csr_matrix
    mass_up: sp.csr_matrix
    d: sp.csr_matrix
    d_down: sp.csr_matrix
    dofs: np.ndarray
    image_cols: np.ndarray
    kernel_dim: int
    dim: int
    _harmonic: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self):
        return self.mass.shape[0]

    @property
    def image_basis(self):
        """Basis of im d_{p-1} on this problem's DOFs (float sparse, exact column choice)."""
        return self.d_down[:, self.image_cols].astype(float).tocsc()

    def harmonic_basis(self):
        """M-orthonormal basis of closed cochains M-orthogonal to im d_{p-1}."""
        if self._harmonic is None:
            rep = coexact_spectrum(self, 0)
            self._harmonic = rep.kernel_vectors
        return self._harmonic

    def closed_basis(self):
        """Dense basis of ker d: image columns followed by harmonic vectors."""
        z = self.image_basis.toarray()
        return np.hstack([z, self.harmonic_basis()])


def assemble(complex_, metric, p, bc=BoundaryCondition.ABSOLUTE, conformal=None):
    """Build the degree-p pencil for the given boundary condition."""
    n = complex_.dim
    if p < 0 or p > n - 1:
        raise ValueError(f"degree {p} outside [0, {n - 1}]")
    bc = BoundaryCondition(bc)
    dofs = [degree_dofs(complex_, q, bc) for q in range(n + 1)]
    m_p = _sub(mass_matrix(complex_, metric, p, conformal), dofs[p], dofs[p])
    m_up = _sub(mass_matrix(complex_, metric, p + 1, conformal), dofs[p + 1], dofs[p + 1])
    d = _sub(complex_.coboundary(p), dofs[p + 1], dofs[p])
    k = (d.T @ m_up @ d).tocsr()
    k = ((k + k.T) * 0.5).tocsr()
    if p > 0:
        d_down = _sub(complex_.coboundary(p - 1), dofs[p], dofs[p - 1])
    else:
        d_down = sp.csr_matrix((len(dofs[p]), 0), dtype=np.int64)
    cols = image_basis_columns(d_down)
    rank_d = exact_rank(d) if d.nnz else 0
    kernel = len(dofs[p]) - rank_d - len(cols)
    return GeneralizedEigenproblem(p, bc, k, m_p, m_up, d, d_down, dofs[p], cols, kernel, n)


def cluster_multiplicities(values, rel_tol):
    """Greedy clustering: a value joins the current cluster iff its gap to the
    previous value is at most ``rel_tol`` times the cluster mean.

    Returns a list of ``(mean, multiplicity)``.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    clusters = []
    current = []
    for v in values:
        if current and (v - current[-1]) <= rel_tol * abs(np.mean(current)):
            current.append(v)
        else:
            if current:
                clusters.append(current)
            current = [v]
    if current:
        clusters.append(current)
    return [(float(np.mean(c)), len(c)) for c in clusters]


@dataclass
class SpectrumReport:
    degree: int
    bc: str
    eigenvalues: np.ndarray
    clusters: list
    kernel_dim: int
    truncated: bool = False
    cluster_tol: float = 1e-6
    metadata: dict = field(default_factory=dict)
    eigenvectors: np.ndarray | None = field(default=None, repr=False)
    kernel_vectors: np.ndarray | None = field(default=None, repr=False)

    def cluster_ids(self):
        ids = []
        for cid, (_, mult) in enumerate(self.clusters):
            ids += [cid] * mult
        return ids

    def to_dict(self):
        return {
            "degree": self.degree,
            "bc": str(BoundaryCondition(self.bc).value),
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "clusters": [{"value": v, "multiplicity": m} for v, m in self.clusters],
            "kernel_dim": int(self.kernel_dim),
            "truncated": bool(self.truncated),
            "cluster_tol": self.cluster_tol,
            "metadata": self.metadata,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_rows(self):
        ids = self.cluster_ids()
        mults = [self.clusters[c][1] for c in ids]
        eps = self.metadata.get("epsilon", "")
        vol = self.metadata.get("volume", "")
        bc = BoundaryCondition(self.bc).value
        return [[self.degree, bc, i + 1, repr(float(v)), ids[i], mults[i], eps, vol]
                for i, v in enumerate(self.eigenvalues)]

    def to_csv(self):
        return rows_to_csv(self.csv_rows())


CSV_HEADER = ["degree", "bc", "index", "eigenvalue", "cluster_id", "multiplicity", "epsilon", "volume"]


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(rows)
    return buf.getvalue()


def _kernel_threshold(vals, expected):
    first = vals[expected] if len(vals) > expected else None
    thr = KERNEL_ABS
    if first is not None and first > 0:
        thr = max(thr, KERNEL_REL * first)
    return thr


def _dense_solve(problem):
    k = problem.stiffness.toarray()
    m = problem.mass.toarray()
    z = problem.image_basis
    if z.shape[1]:
        c = sla.null_space((m @ z.toarray()).T)
        kc = c.T @ k @ c
        mc = c.T @ m @ c
    else:
        c = None
        kc, mc = k, m
    if kc.shape[0] == 0:
        return np.zeros(0), np.zeros((problem.size, 0))
    vals, vecs = sla.eigh((kc + kc.T) / 2, (mc + mc.T) / 2)
    if c is not None:
        vecs = c @ vecs
    return vals, vecs


def _saddle(problem, shift, extra=None):
    """Sparse constrained operator ``[[K + shift*M, M C], [C^T M, 0]]``."""
    m = problem.mass
    cols = [problem.image_basis]
    if extra is not None and extra.shape[1]:
        cols.append(sp.csc_matrix(extra))
    c = sp.hstack(cols).tocsc() if cols else None
    top = problem.stiffness + shift * m
    if c is None or c.shape[1] == 0:
        return sp.csc_matrix(top), 0
    mc = (m @ c).tocsc()
    s = sp.bmat([[top, mc], [mc.T, None]], format="csc")
    return s, c.shape[1]


def _sparse_solve(problem, nreq, seed):
    n = problem.size
    m = problem.mass
    tau = 1e-6 * problem.stiffness.diagonal().sum() / m.diagonal().sum()
    if not tau > 0:
        tau = 1e-6
    s, r = _saddle(problem, tau)
    try:
        lu = spla.splu(s)
    except RuntimeError as exc:
        raise SolverError(f"factorization failed at shift {-tau:.3e}: {exc}") from exc

    def apply(x):
        rhs = np.zeros(n + r)
        rhs[:n] = x
        return lu.solve(rhs)[:n]

    op = spla.LinearOperator((n, n), matvec=apply, dtype=float)
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    ncv = min(n - 1, max(2 * nreq + 1, nreq + 20))
    try:
        vals, vecs = spla.eigsh(problem.stiffness, k=nreq, M=m, sigma=-tau, which="LM",
                                OPinv=op, v0=v0, ncv=ncv, tol=0)
    except spla.ArpackError as exc:
        raise SolverError(f"eigensolver failed at shift {-tau:.3e}: {exc}") from exc
    # Rayleigh-Ritz on the returned block restores M-orthonormality inside clusters
    kr = vecs.T @ (problem.stiffness @ vecs)
    mr = vecs.T @ (m @ vecs)
    vals, y = sla.eigh((kr + kr.T) / 2, (mr + mr.T) / 2)
    return vals, vecs @ y


def coexact_spectrum(problem, k, cluster_tol=1e-6, seed=0, method="auto"):
    """The ``k`` smallest coexact eigenvalues of a degree-p problem.

    The harmonic kernel is detected with the threshold
    ``max(1e-8, 1e-6 * first nonzero)`` and must match the exact Betti number.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    expected = problem.kernel_dim
    available = problem.size - len(problem.image_cols)
    nonkernel = available - expected
    want = min(k, nonkernel)
    nreq = min(available, expected + want + BLOCK_MARGIN)
    if method == "auto":
        method = "dense" if problem.size <= DENSE_MAX or nreq >= available - 1 else "sparse"
    if nreq == 0:
        vals, vecs = np.zeros(0), np.zeros((problem.size, 0))
    elif method == "dense":
        vals, vecs = _dense_solve(problem)
    else:
        vals, vecs = _sparse_solve(problem, nreq, seed)
    thr = _kernel_threshold(vals, expected)
    n_kernel = int(np.sum(vals < thr))
    if n_kernel != expected:
        raise KernelMismatchError(
            f"degree {problem.degree}: numerical kernel {n_kernel} != exact Betti number {expected}")
    mu = vals[n_kernel:n_kernel + want]
    report = SpectrumReport(
        degree=problem.degree,
        bc=problem.bc.value,
        eigenvalues=np.asarray(mu),
        clusters=cluster_multiplicities(mu, cluster_tol) if len(mu) else [],
        kernel_dim=n_kernel,
        truncated=want < k,
        cluster_tol=cluster_tol,
        eigenvectors=vecs[:, n_kernel:n_kernel + want],
        kernel_vectors=vecs[:, :n_kernel],
    )
    if problem._harmonic is None:
        problem._harmonic = report.kernel_vectors
    return report


def spectrum(complex_, metric, p, k, bc=BoundaryCondition.ABSOLUTE, conformal=None, **kw):
    """Assemble and solve in one call."""
    return coexact_spectrum(assemble(complex_, metric, p, bc, conformal), k, **kw)


def full_spectrum(complex_, metric, p, k, bc=BoundaryCondition.ABSOLUTE, conformal=None,
                  cluster_tol=1e-6, seed=0):
    """Lowest ``k`` eigenvalues of the full degree-p Laplacian, zeros included.

    The nonzero part is the sorted union of the coexact spectra in degrees
    ``p`` and ``p - 1``; the zero eigenvalue has multiplicity ``b_p``.
    """
    n = complex_.dim
    if p < 0 or p > n:
        raise ValueError(f"degree {p} outside [0, {n}]")
    bc = BoundaryCondition(bc)
    parts = []
    if p <= n - 1:
        rep = spectrum(complex_, metric, p, k, bc, conformal, seed=seed)
        kernel = rep.kernel_dim
        parts.append(rep.eigenvalues)
    else:
        dofs = [degree_dofs(complex_, q, bc) for q in range(n + 1)]
        kernel = betti_numbers(complex_, dofs)[p]
    if p >= 1:
        parts.append(spectrum(complex_, metric, p - 1, k, bc, conformal, seed=seed).eigenvalues)
    merged = np.sort(np.concatenate([np.zeros(kernel)] + parts))[:k]
    return SpectrumReport(p, bc.value, merged, cluster_multiplicities(merged[merged > 0], cluster_tol),
                          kernel, len(merged) < k, cluster_tol)


# --------------------------------------------------------------------------
# Hodge decomposition and primitives


def hodge_decompose(problem, omega):
    """Split a p-cochain into M-orthogonal exact, harmonic and coexact parts."""
    omega = np.asarray(omega, dtype=float)
    m = problem.mass
    z = problem.image_basis
    if z.shape[1]:
        g = (z.T @ m @ z).tocsc()
        a = spla.spsolve(g, z.T @ (m @ omega))
        exact = z @ np.atleast_1d(a)
    else:
        exact = np.zeros_like(omega)
    h = problem.harmonic_basis()
    harmonic = h @ (h.T @ (m @ omega)) if h.shape[1] else np.zeros_like(omega)
    coexact = omega - exact - harmonic
    return exact, harmonic, coexact


def minimal_primitive(problem, omega, tol=1e-9):
    """The primitive of an exact (p+1)-cochain with least M_p-norm.

    Solves ``K phi = d^T M_{p+1} omega`` with ``phi`` M-orthogonal to all closed
    p-cochains; raises :class:`NotExactError` when ``d phi`` misses ``omega``.
    """
    omega = np.asarray(omega, dtype=float)
    n = problem.size
    rhs_top = problem.d.T @ (problem.mass_up @ omega)
    s, r = _saddle(problem, 0.0, extra=problem.harmonic_basis())
    rhs = np.zeros(n + r)
    rhs[:n] = rhs_top
    if n == 0:
        phi = np.zeros(0)
    else:
        phi = spla.spsolve(sp.csc_matrix(s), rhs)[:n]
    res = problem.d @ phi - omega
    mu = problem.mass_up
    denom = float(np.sqrt(max(omega @ (mu @ omega), 0.0)))
    resid = float(np.sqrt(max(res @ (mu @ res), 0.0)))
    rel = resid / denom if denom > 0 else resid
    if rel > tol:
        raise NotExactError(rel)
    return phi


def exact_spectrum_down(problem, k=None):
    """Nonzero spectrum of the down-Laplacian on exact (p+1)-cochains.

    Uses ``A = M_{p+1} d M_p^{-1} d^T M_{p+1}`` restricted to a basis of
    ``im d``; independent of the constrained p-form solve, dense.
    """
    d = problem.d
    cols = image_basis_columns(d)
    if cols.size == 0:
        return np.zeros(0)
    # orthonormal basis of im d; raw coboundary columns are badly conditioned
    b, _ = np.linalg.qr(d[:, cols].astype(float).toarray())
    mu = problem.mass_up.toarray()
    mp = problem.mass.toarray()
    mb = mu @ b
    inner = d.T.toarray() @ mb
    a = inner.T @ sla.solve(mp, inner, assume_a="pos")
    g = b.T @ mb
    vals = sla.eigh((a + a.T) / 2, (g + g.T) / 2, eigvals_only=True)
    return vals if k is None else vals[:k]


def minmax_check(problem, i, trials=10_000, seed=0, max_dim=200):
    """Randomized min-max over i-dimensional subspaces of exact (p+1)-cochains.

    Oracle only: the closed cochains are found by a dense SVD null space of
    ``d`` and primitives are minimized by M-orthogonal projection. Returns a
    dict with the trial values, the reference ``mu_i`` and the value on the
    span of the first ``i`` eigenvectors.
    """
    n = problem.size
    if n > max_dim:
        raise ValueError(f"min-max oracle limited to dimension {max_dim}, got {n}")
    d = problem.d.toarray().astype(float)
    k = problem.stiffness.toarray()
    m = problem.mass.toarray()
    closed = sla.null_space(d) if d.shape[0] else np.eye(n)
    comp = sla.null_space((m @ closed).T) if closed.shape[1] else np.eye(n)
    if comp.shape[1] < i:
        raise ValueError(f"only {comp.shape[1]} coexact directions, asked for i={i}")
    vals, vecs = sla.eigh(comp.T @ k @ comp, comp.T @ m @ comp)
    eig_vecs = comp @ vecs
    proj = comp @ sla.solve(comp.T @ m @ comp, comp.T @ m)

    def value(psi):
        phi = proj @ psi
        return float(sla.eigh(phi.T @ k @ phi, phi.T @ m @ phi, eigvals_only=True)[-1])

    rng = np.random.default_rng(seed)
    out = np.empty(trials)
    span = eig_vecs[:, :i]
    scales = np.logspace(-6, 1, 8)
    for t in range(trials):
        noise = rng.standard_normal((n, i))
        if t % 2:
            psi = span + scales[(t // 2) % len(scales)] * noise
        else:
            psi = noise
        out[t] = value(psi)
    return {"values": out, "mu_i": float(vals[i - 1]), "span_value": value(span),
            "spectrum": vals}
