"""The spARFIMA data-generating process.

A field Y observed at n sites follows

    (I - rho*W1)^d Y = alpha + (I - lam*W2) eps,    eps iid (0, sigma2),

so Y = (I - rho*W1)^{-d} [alpha + (I - lam*W2) eps]. The exponent d
shapes how far the autoregressive dependence reaches: d = 1 recovers the
classical SAR/SARMA models, d < 1 confines spill-overs locally, d > 1
extends them to higher-order neighbours while the process stays stationary
as long as every 1 - rho*lambda_i(W1) stays positive.

Closed-form moments:

    E(Y)   = (I - rho*W1)^{-d} alpha
    Cov(Y) = sigma2 (I - rho*W1)^{-d} (I - B2)(I - B2)' (I - rho*W1')^{-d}

with B2 = lam*W2. The moving-average term carries a minus sign; negate
lam to translate to the plus-sign MA convention. Simulation draws eps
from a counter-based Philox generator keyed by the seed, so results are
bit-reproducible for a fixed (spec, seed) pair and independent streams
are cheap to derive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import fracop
from .errors import (DomainError, UnsupportedLayoutError,
                     UnsupportedMatrixError)
from .fracop import _check_d, _spectral_power, apply_inverse_frac, spectrum_shift
from .weights import SiteSet, WeightMatrix


def generator(seed: int) -> np.random.Generator:
    """Philox (counter-based) generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)))


@dataclass(frozen=True)
class ModelSpec:
    """Full parameterization of a spARFIMA process.

    ``alpha`` may be a scalar (broadcast to alpha * ones, the estimable
    case) or a length-n vector of site-specific intercepts. ``covariates``
    carries an optional n x p design matrix for a regression mean; it is
    stored for simulation pipelines but its coefficients are not estimated
    here.
    """

    rho: float
    lam: float
    d: float
    sigma2: float
    w1: WeightMatrix
    w2: WeightMatrix
    alpha: float | np.ndarray = 0.0
    sites: SiteSet | None = None
    covariates: np.ndarray | None = None

    def __post_init__(self):
        _check_d(self.d)
        if self.sigma2 <= 0:
            raise DomainError(f"sigma2 must be positive, got {self.sigma2}")
        if self.w1.n != self.w2.n:
            raise ValueError("w1 and w2 must have the same dimension")
        spectrum_shift(self.w1, self.rho)
        spectrum_shift(self.w2, self.lam)
        if self.sites is not None and self.sites.n != self.w1.n:
            raise ValueError("sites and weight matrices disagree on n")

    @property
    def n(self) -> int:
        return self.w1.n

    def alpha_vector(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.alpha, dtype=float),
                               (self.n,)).copy()

    def site_set(self) -> SiteSet:
        if self.sites is not None:
            return self.sites
        return SiteSet.irregular(np.arange(self.n, dtype=float)[:, None])

    def to_json_dict(self) -> dict:
        alpha = self.alpha
        if isinstance(alpha, np.ndarray):
            alpha = alpha.tolist()
        return {
            "alpha": alpha,
            "rho": self.rho,
            "lambda": self.lam,
            "d": self.d,
            "sigma2": self.sigma2,
            "n": self.n,
            "w1": self.w1.provenance,
            "w2": self.w2.provenance,
        }


@dataclass(frozen=True)
class LatticeField:
    """Observed or simulated values, one per site."""

    sites: SiteSet
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or len(values) != self.sites.n:
            raise ValueError("values must be a length-n vector")
        if not np.isfinite(values).all():
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.sites.n


InnovationHook = Callable[[np.random.Generator, tuple], np.ndarray]


def _draw_innovations(spec: ModelSpec, rng: np.random.Generator, shape,
                      innovations: InnovationHook | None) -> np.ndarray:
    if innovations is None:
        return rng.standard_normal(shape) * np.sqrt(spec.sigma2)
    return np.asarray(innovations(rng, shape), dtype=float)


def _from_innovations(spec: ModelSpec, eps: np.ndarray) -> np.ndarray:
    """Map innovations to the field: (I - rho*W1)^{-d}[alpha + (I - lam*W2) eps]."""
    u = eps - spec.lam * (spec.w2.entries @ eps)
    alpha = spec.alpha_vector()
    u = u + (alpha[:, None] if eps.ndim == 2 else alpha)
    return apply_inverse_frac(spec.w1, spec.rho, spec.d, u)


def simulate(spec: ModelSpec, seed: int,
             innovations: InnovationHook | None = None) -> LatticeField:
    """Draw one exact realization of the process.

    ``innovations`` optionally replaces the Gaussian draw; it is called as
    ``innovations(rng, shape)`` and must return iid innovations with mean 0
    and variance ``spec.sigma2`` (the quasi-likelihood estimator stays
    valid for non-Gaussian draws).
    """
    rng = generator(seed)
    eps = _draw_innovations(spec, rng, (spec.n,), innovations)
    return LatticeField(spec.site_set(), _from_innovations(spec, eps))


def simulate_many(spec: ModelSpec, seed: int, reps: int,
                  innovations: InnovationHook | None = None) -> np.ndarray:
    """``reps`` independent realizations from one seeded stream, as columns
    of an (n, reps) array. Cheaper than repeated :func:`simulate` calls
    when only the values are needed (moment checks, calibration runs)."""
    rng = generator(seed)
    eps = _draw_innovations(spec, rng, (spec.n, reps), innovations)
    return _from_innovations(spec, eps)


def mean_vector(spec: ModelSpec) -> np.ndarray:
    """E(Y) = (I - rho*W1)^{-d} alpha."""
    return apply_inverse_frac(spec.w1, spec.rho, spec.d, spec.alpha_vector())


def covariance_matrix(spec: ModelSpec) -> np.ndarray:
    """Cov(Y) = sigma2 A (I - B2 - B2' + B2 B2') A' with A = (I - rho*W1)^{-d}.

    The inner factor is (I - B2)(I - B2)', consistent with the moving
    average term (I - lam*W2) eps of the process; negate ``lam`` to use
    the plus-sign MA convention.
    """
    n = spec.n
    b2 = (spec.lam * spec.w2.entries).toarray()
    inner = np.eye(n) - b2 - b2.T + b2 @ b2.T
    a = _spectral_power(spec.w1, spec.rho, -spec.d)
    return spec.sigma2 * (a @ inner @ a.T)


def influence_profile(spec: ModelSpec,
                      center_site: int) -> list[tuple[float, float]]:
    """Influence of one site on every site: pairs (distance, weight).

    The weight at site j is entry (j, center) of M = (I - rho*W1)^{-d},
    i.e. how strongly an innovation at the center moves site j. Pairs are
    sorted by Euclidean distance from the center (site index breaks ties),
    ready for plotting influence-decay curves.
    """
    sites = spec.sites
    if sites is None or sites.layout != "regular_grid":
        raise UnsupportedLayoutError(
            "influence_profile requires a regular-grid SiteSet")
    if not 0 <= center_site < spec.n:
        raise ValueError(f"center_site out of range: {center_site}")
    m = _spectral_power(spec.w1, spec.rho, -spec.d)
    col = m[:, center_site]
    dists = np.linalg.norm(sites.coords - sites.coords[center_site], axis=1)
    order = np.lexsort((np.arange(spec.n), dists))
    return [(float(dists[i]), float(col[i])) for i in order]


# -- composed autoregressive operators --------------------------------------


class ComposedOperator:
    """A composite invertible operator P = I - B usable where (I - rho*W)
    appears: supports dense materialization, fractional powers of the
    composite, and log-determinants (factorized when built from a product).
    """

    def __init__(self, matrix: np.ndarray, description: str,
                 logdet_factors: list[tuple[WeightMatrix, float]] | None = None):
        self._matrix = np.asarray(matrix, dtype=float)
        self._description = description
        self._logdet_factors = logdet_factors
        self._eig = None
        eigvals = np.linalg.eigvals(self._matrix)
        if np.abs(eigvals).min() <= 1e-12 * max(1.0, np.abs(eigvals).max()):
            raise DomainError(f"singular composite operator: {description}")

    @property
    def n(self) -> int:
        return self._matrix.shape[0]

    def matrix(self) -> np.ndarray:
        return self._matrix.copy()

    def _eigensystem(self):
        if self._eig is None:
            vals, vecs = np.linalg.eig(self._matrix)
            if np.abs(vals.imag).max(initial=0.0) > 1e-8:
                raise UnsupportedMatrixError(
                    "composite operator has a complex spectrum; fractional "
                    "powers are not supported")
            self._eig = (vals.real, vecs.real, np.linalg.inv(vecs.real))
        return self._eig

    def power(self, d: float) -> np.ndarray:
        """(I - B)^d for real d; requires a real, positive spectrum."""
        if d == 1.0:
            return self.matrix()
        vals, vecs, inv = self._eigensystem()
        if vals.min() <= 0.0:
            raise DomainError(
                "composite operator has a non-positive eigenvalue; no real "
                f"fractional power exists ({self._description})")
        return (vecs * vals ** d) @ inv

    def apply_power(self, d: float, v: np.ndarray) -> np.ndarray:
        return self.power(d) @ np.asarray(v, dtype=float)

    def log_det(self, d: float = 1.0) -> float:
        """log|(I - B)^d|; for product-form operators this is the sum of
        the per-factor eigenvalue log-determinant sums."""
        if self._logdet_factors is not None:
            return d * sum(fracop.log_det_frac(w, a)
                           for w, a in self._logdet_factors)
        vals, _, _ = self._eigensystem()
        if vals.min() <= 0.0:
            raise DomainError("composite operator determinant sign is not "
                              "positive; log-determinant undefined")
        return d * float(np.log(vals).sum())

    def __repr__(self):
        return f"ComposedOperator(n={self.n}, {self._description})"


def higher_order_operator(ws: Sequence[WeightMatrix],
                          rhos: Sequence[float]) -> ComposedOperator:
    """Additive composite I - sum_i rho_i W_i (lag matrices of increasing
    order, one coefficient each)."""
    if len(ws) != len(rhos) or not ws:
        raise ValueError("ws and rhos must be non-empty and equal length")
    n = ws[0].n
    if any(w.n != n for w in ws):
        raise ValueError("all component matrices must share n")
    total = np.eye(n)
    for w, rho in zip(ws, rhos):
        total = total - rho * w.toarray()
    label = " + ".join(f"{r}*{w.provenance}" for w, r in zip(ws, rhos))
    return ComposedOperator(total, f"I - ({label})")


def polynomial_operator(w_a: WeightMatrix, rho_a: float,
                        w_b: WeightMatrix, rho_b: float) -> ComposedOperator:
    """Product composite (I - rho_a W_a)(I - rho_b W_b), materialized via
    its expansion I - rho_a W_a - rho_b W_b + rho_a rho_b W_a W_b.

    Its determinant factorizes, so the log-determinant is the sum of the
    two per-factor eigenvalue sums.
    """
    if w_a.n != w_b.n:
        raise ValueError("component matrices must share n")
    n = w_a.n
    da, db = w_a.toarray(), w_b.toarray()
    mat = np.eye(n) - rho_a * da - rho_b * db + (rho_a * rho_b) * (da @ db)
    return ComposedOperator(
        mat,
        f"(I - {rho_a}*{w_a.provenance})(I - {rho_b}*{w_b.provenance})",
        logdet_factors=[(w_a, rho_a), (w_b, rho_b)])


# -- field serialization -----------------------------------------------------

FIELD_SCHEMA_VERSION = 1


def save_field(fld: LatticeField, path) -> None:
    """Write a field as long-format CSV: ``row,col,value`` for regular
    grids, ``x1,...,xq,value`` for irregular site sets. Values carry 17
    significant digits, enough to round-trip float64 exactly."""
    sites = fld.sites
    with open(path, "w", newline="") as fh:
        if sites.layout == "regular_grid":
            fh.write("row,col,value\n")
            for i, v in enumerate(fld.values):
                r, c = divmod(i, sites.cols)
                fh.write(f"{r},{c},{v:.17g}\n")
        else:
            header = ",".join(f"x{k+1}" for k in range(sites.q))
            fh.write(f"{header},value\n")
            for coord, v in zip(sites.coords, fld.values):
                cs = ",".join(f"{c:.17g}" for c in coord)
                fh.write(f"{cs},{v:.17g}\n")


def spec_to_json(spec: ModelSpec, path) -> None:
    with open(path, "w") as fh:
        json.dump(spec.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
