"""Spatial weight matrices for regular lattices and irregular point sets.

A weight matrix W is an n x n zero-diagonal matrix encoding which sites
influence which. Constructors cover Queen/Rook lattice contiguity,
k-nearest neighbours, inverse distance, and the lower-triangular time-shift
matrix that recovers directional (time-series style) models. Row
standardisation bounds the spectral radius at 1, which keeps operators of
the form I - a*W invertible for |a| < 1.

``WeightMatrix`` objects are immutable after construction. The dense
eigendecomposition is computed lazily, once per matrix, and shared by all
fractional-operator and likelihood code (the eigenvalues enter the
log-determinant as sum(log(1 - a*lambda_i)), the Ord method, so they are
needed once per matrix regardless of how many (a, d) points are evaluated).
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path
from scipy.spatial.distance import cdist

from .errors import (DegenerateInputError, NumericalError, ParseError,
                     UnsupportedMatrixError)

TRIPLET_SCHEMA_VERSION = 1

# Absolute tolerance for declaring an eigenvalue's imaginary part noise.
IMAG_TOL = 1e-8

# Count of dense eigendecompositions performed, for cache-reuse assertions.
_eigen_decompositions = 0


def eigendecomposition_count() -> int:
    """Number of dense eigendecompositions performed so far (all matrices)."""
    return _eigen_decompositions


class Eigensystem(NamedTuple):
    """Dense eigendecomposition W = V diag(values) V^{-1}, sorted ascending.

    ``inverse`` is None when the eigenbasis is numerically singular
    (defective matrices such as the nilpotent time-shift matrix);
    ``condition`` is then inf and spectral fractional powers must fall
    back to the binomial series.
    """

    values: np.ndarray
    vectors: np.ndarray
    inverse: np.ndarray | None
    condition: float


@dataclass(frozen=True)
class SiteSet:
    """n sites in R^q, either an enumerated regular grid or free coordinates.

    For ``layout == "regular_grid"`` the coordinates enumerate the integer
    lattice row-major: site i sits at (i // cols, i % cols).
    """

    coords: np.ndarray
    layout: str = "irregular"
    rows: int | None = None
    cols: int | None = None

    def __post_init__(self):
        coords = np.atleast_2d(np.asarray(self.coords, dtype=float))
        if not np.isfinite(coords).all():
            raise ValueError("site coordinates must be finite")
        object.__setattr__(self, "coords", coords)
        if self.layout == "regular_grid":
            if self.rows is None or self.cols is None:
                raise ValueError("regular_grid layout requires rows and cols")
            if len(coords) != self.rows * self.cols:
                raise ValueError("regular_grid requires n = rows * cols sites")
        elif self.layout != "irregular":
            raise ValueError(f"unknown layout {self.layout!r}")

    @property
    def n(self) -> int:
        return len(self.coords)

    @property
    def q(self) -> int:
        return self.coords.shape[1]

    @classmethod
    def regular_grid(cls, rows: int, cols: int) -> "SiteSet":
        if rows < 1 or cols < 1:
            raise ValueError("grid dimensions must be positive")
        r = np.repeat(np.arange(rows), cols)
        c = np.tile(np.arange(cols), rows)
        coords = np.column_stack([r, c]).astype(float)
        return cls(coords=coords, layout="regular_grid", rows=rows, cols=cols)

    @classmethod
    def irregular(cls, coords) -> "SiteSet":
        return cls(coords=coords, layout="irregular")


class WeightMatrix:
    """Immutable sparse spatial weight matrix with zero diagonal.

    Parameters
    ----------
    entries : array_like or sparse matrix, shape (n, n)
        Weights; the diagonal must be exactly zero and all entries finite.
    standardized : {"raw", "row_standardized"}
    provenance : str
        Human-readable constructor tag, kept in serialisation sidecars.
    """

    def __init__(self, entries, standardized="raw", provenance="custom",
                 _sym_rowsums=None):
        mat = sp.csr_matrix(entries, dtype=float, copy=True)
        if mat.shape[0] != mat.shape[1]:
            raise ValueError(f"weight matrix must be square, got {mat.shape}")
        if mat.shape[0] < 1:
            raise ValueError("weight matrix must have at least one site")
        if not np.isfinite(mat.data).all():
            raise ValueError("weight matrix entries must be finite")
        if np.any(mat.diagonal() != 0.0):
            raise ValueError("weight matrix diagonal must be exactly zero")
        if standardized not in ("raw", "row_standardized"):
            raise ValueError(f"unknown standardization state {standardized!r}")
        mat.eliminate_zeros()
        mat.sort_indices()
        for arr in (mat.data, mat.indices, mat.indptr):
            arr.flags.writeable = False
        self._entries = mat
        self._standardized = standardized
        self._provenance = provenance
        # Row sums of the symmetric raw matrix this one was standardized
        # from, when that applies; enables a well-conditioned real
        # eigendecomposition via similarity to a symmetric matrix.
        self._sym_rowsums = _sym_rowsums
        self._eig: Eigensystem | None = None

    @property
    def n(self) -> int:
        return self._entries.shape[0]

    @property
    def entries(self) -> sp.csr_matrix:
        """The weights as CSR. Treat as read-only; buffers are locked."""
        return self._entries

    @property
    def standardized(self) -> str:
        return self._standardized

    @property
    def provenance(self) -> str:
        return self._provenance

    def toarray(self) -> np.ndarray:
        return self._entries.toarray()

    def is_binary(self) -> bool:
        return bool(np.all(self._entries.data == 1.0))

    def __repr__(self):
        return (f"WeightMatrix(n={self.n}, nnz={self._entries.nnz}, "
                f"standardized={self._standardized!r}, "
                f"provenance={self._provenance!r})")

    # -- eigendecomposition cache ------------------------------------------

    def eigensystem(self) -> Eigensystem:
        """Dense eigendecomposition, computed once and cached.

        Raises
        ------
        UnsupportedMatrixError
            If any eigenvalue has imaginary part above ``IMAG_TOL``.
        NumericalError
            If the eigensolver does not converge.
        """
        if self._eig is None:
            self._eig = _compute_eigensystem(self)
        return self._eig

    def eigenvalues(self) -> np.ndarray:
        """All n eigenvalues, real, ascending. Cached with the eigensystem.

        The cached values satisfy the residual check
        ||(W - lambda_i I) v_i|| <= 1e-8 * max(1, ||W||_inf) column-wise.
        """
        return self.eigensystem().values


def _compute_eigensystem(w: WeightMatrix) -> Eigensystem:
    global _eigen_decompositions
    _eigen_decompositions += 1
    dense = w.toarray()

    if np.array_equal(dense, dense.T):
        vals, vecs = np.linalg.eigh(dense)
        return Eigensystem(vals, vecs, vecs.T.copy(), 1.0)

    if w._sym_rowsums is not None:
        # W = D^{-1} A with A symmetric: similar to the symmetric
        # S = D^{-1/2} A D^{-1/2}, so the spectrum is real and the
        # eigenbasis V = D^{-1/2} Q is well conditioned.
        d = np.asarray(w._sym_rowsums, dtype=float)
        sqrt_d = np.sqrt(d)
        a = dense * d[:, None]
        s = a / np.outer(sqrt_d, sqrt_d)
        vals, q = np.linalg.eigh(s)
        vectors = q / sqrt_d[:, None]
        inverse = q.T * sqrt_d[None, :]
        condition = float(np.sqrt(d.max() / d.min()))
        return Eigensystem(vals, vectors, inverse, condition)

    try:
        vals, vecs = np.linalg.eig(dense)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    if np.abs(vals.imag).max(initial=0.0) > IMAG_TOL:
        raise UnsupportedMatrixError(
            "weight matrix has a complex spectrum "
            f"(max |imag| = {np.abs(vals.imag).max():.3e}); "
            "fractional powers require a real spectrum")
    vals = vals.real
    vecs = vecs.real if not np.iscomplexobj(vecs) else vecs.real.copy()
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    try:
        inverse = np.linalg.inv(vecs)
        condition = float(np.linalg.cond(vecs))
    except np.linalg.LinAlgError:
        inverse, condition = None, np.inf
    if not np.isfinite(condition):
        inverse, condition = None, np.inf
    return Eigensystem(vals, vecs, inverse, condition)


def eigenvalues(w: WeightMatrix) -> np.ndarray:
    """Eigenvalues of ``w``, real and ascending, cached on the matrix."""
    return w.eigenvalues()


# -- constructors ----------------------------------------------------------


def _grid_contiguity(rows, cols, offsets, provenance):
    if rows < 1 or cols < 1:
        raise ValueError("grid dimensions must be at least 1")
    n = rows * cols
    if n < 2:
        raise ValueError("lattice needs at least two cells")
    r = np.repeat(np.arange(rows), cols)
    c = np.tile(np.arange(cols), rows)
    ii, jj = [], []
    for dr, dc in offsets:
        r2, c2 = r + dr, c + dc
        ok = (r2 >= 0) & (r2 < rows) & (c2 >= 0) & (c2 < cols)
        ii.append(r[ok] * cols + c[ok])
        jj.append(r2[ok] * cols + c2[ok])
    ii = np.concatenate(ii)
    jj = np.concatenate(jj)
    mat = sp.csr_matrix((np.ones(len(ii)), (ii, jj)), shape=(n, n))
    return WeightMatrix(mat, provenance=provenance)


_ROOK_OFFSETS = [(-1, 0), (1, 0), (0, -1), (0, 1)]
_QUEEN_OFFSETS = _ROOK_OFFSETS + [(-1, -1), (-1, 1), (1, -1), (1, 1)]


def queen_contiguity(rows: int, cols: int) -> WeightMatrix:
    """First-order Queen contiguity on a rows x cols lattice.

    Cells are adjacent iff their lattice coordinates differ by at most one
    in each axis (8-neighbourhood). Binary, symmetric, zero diagonal.
    """
    return _grid_contiguity(rows, cols, _QUEEN_OFFSETS,
                            f"queen({rows},{cols})")


def rook_contiguity(rows: int, cols: int) -> WeightMatrix:
    """First-order Rook contiguity (4-neighbourhood, shared edges only)."""
    return _grid_contiguity(rows, cols, _ROOK_OFFSETS,
                            f"rook({rows},{cols})")


def knn(sites: SiteSet, k: int) -> WeightMatrix:
    """k-nearest-neighbour weights: row i has ones at the k sites closest
    to site i. Distance ties are broken by the lowest site index, so the
    result is deterministic (and generally asymmetric)."""
    n = sites.n
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n, got k={k}, n={n}")
    dist = cdist(sites.coords, sites.coords)
    np.fill_diagonal(dist, np.inf)
    # Stable argsort keeps the lower index first among equal distances.
    nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
    ii = np.repeat(np.arange(n), k)
    mat = sp.csr_matrix((np.ones(n * k), (ii, nearest.ravel())), shape=(n, n))
    return WeightMatrix(mat, provenance=f"knn(k={k})")


def inverse_distance(sites: SiteSet, power: float,
                     cutoff: float | None = None) -> WeightMatrix:
    """Weights ||s_i - s_j||^(-power), zeroed beyond ``cutoff`` if given."""
    if power <= 0:
        raise ValueError("power must be positive")
    dist = cdist(sites.coords, sites.coords)
    off_diag = ~np.eye(sites.n, dtype=bool)
    if np.any(dist[off_diag] == 0.0):
        raise DegenerateInputError(
            "duplicate coordinates: inverse distance is undefined")
    with np.errstate(divide="ignore"):
        wmat = dist ** (-power)
    np.fill_diagonal(wmat, 0.0)
    if cutoff is not None:
        wmat[dist > cutoff] = 0.0
    return WeightMatrix(wmat, provenance=f"inverse_distance(power={power})")


def time_shift_matrix(t: int) -> WeightMatrix:
    """Lower-triangular t x t shift matrix: ones on the first subdiagonal.

    Nests directional one-dimensional models: with this matrix as the
    autoregressive weights, I - rho*B is the (truncated) backshift filter
    of a fractionally differenced time series. Strictly triangular, hence
    nilpotent: B^t = 0 and all eigenvalues are zero.
    """
    if t < 2:
        raise ValueError("time shift matrix needs t >= 2")
    mat = sp.csr_matrix((np.ones(t - 1), (np.arange(1, t), np.arange(t - 1))),
                        shape=(t, t))
    return WeightMatrix(mat, provenance=f"time_shift({t})")


def row_standardize(w: WeightMatrix) -> WeightMatrix:
    """Divide every nonzero row by its sum so rows sum to one.

    Rows of all zeros (isolated sites) are left as zeros and reported with
    a warning; the spectral radius of the result is 1.
    """
    if w.standardized != "raw":
        raise ValueError("matrix is already row-standardized")
    rowsums = np.asarray(w.entries.sum(axis=1)).ravel()
    isolated = rowsums == 0.0
    if isolated.any():
        warnings.warn(
            f"{int(isolated.sum())} isolated site(s) with no neighbours; "
            "their rows stay zero", UserWarning, stacklevel=2)
    scale = np.where(isolated, 1.0, rowsums)
    mat = sp.diags(1.0 / scale) @ w.entries
    dense_raw = w.toarray()
    symmetric = np.array_equal(dense_raw, dense_raw.T)
    sym_rowsums = rowsums if (symmetric and not isolated.any()) else None
    return WeightMatrix(mat, standardized="row_standardized",
                        provenance=w.provenance,
                        _sym_rowsums=sym_rowsums)


def lag_order_matrix(w: WeightMatrix, order: int) -> WeightMatrix:
    """Binary matrix of pairs at shortest-path distance exactly ``order``.

    ``order=1`` reproduces the support of ``w`` itself; pairs in different
    graph components never appear at any order. Orders 1..K are pairwise
    disjoint and union to the <=K-hop reachability set minus the diagonal.
    """
    if order < 1:
        raise ValueError("lag order must be >= 1")
    if w.standardized != "raw" or not w.is_binary():
        raise ValueError("lag_order_matrix requires a raw binary "
                         "contiguity matrix")
    hops = shortest_path(w.entries, method="D", unweighted=True)
    mask = hops == order
    np.fill_diagonal(mask, False)
    mat = sp.csr_matrix(mask.astype(float))
    return WeightMatrix(mat, provenance=f"lag_order({w.provenance}, {order})")


# -- serialization ---------------------------------------------------------


def _sidecar_path(path) -> Path:
    return Path(str(path) + ".meta.json")


def to_triplet_csv(w: WeightMatrix, path) -> None:
    """Write the nonzero entries as ``i,j,w`` rows (zero-based indices) plus
    a JSON metadata sidecar at ``<path>.meta.json``."""
    coo = w.entries.tocoo()
    order = np.lexsort((coo.col, coo.row))
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("i,j,w\n")
        for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write(f"{i},{j},{v:.17g}\n")
    meta = {
        "schema_version": TRIPLET_SCHEMA_VERSION,
        "n": w.n,
        "standardized": w.standardized,
        "provenance": w.provenance,
    }
    with _sidecar_path(path).open("w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def from_triplet_csv(path) -> WeightMatrix:
    """Read a weight matrix written by :func:`to_triplet_csv`."""
    path = Path(path)
    with _sidecar_path(path).open() as fh:
        meta = json.load(fh)
    n = int(meta["n"])
    rows, cols, vals = [], [], []
    with path.open() as fh:
        header = fh.readline().strip()
        if header != "i,j,w":
            raise ParseError(f"expected header 'i,j,w', got {header!r}", line=1)
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ParseError("expected 3 comma-separated fields",
                                 line=lineno)
            try:
                rows.append(int(parts[0]))
                cols.append(int(parts[1]))
                vals.append(float(parts[2]))
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    return WeightMatrix(mat, standardized=meta["standardized"],
                        provenance=meta.get("provenance", "custom"))
