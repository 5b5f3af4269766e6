"""Quasi-maximum-likelihood estimation of spARFIMA/SARMA/SAR models.

For parameters theta = (alpha, rho, lam, d, sigma2) the residual map

    xi(y) = (I - lam*W2)^{-1} [ (I - rho*W1)^d y - alpha ]

recovers the innovations, and the Gaussian log-likelihood is

    L = -n/2 log(2*pi) - n/2 log(sigma2) - log|I - lam*W2|
        + d log|I - rho*W1| - xi(y)'xi(y) / (2*sigma2).

Both log-determinants come from the cached eigenvalues of the weight
matrices (one decomposition per matrix, shared across every evaluation),
so the optimizer pays a couple of dense matrix-vector products per point.

alpha and sigma2 have closed-form conditional maximizers, so the numeric
search runs over at most (rho, lam, d), each mapped to the real line by a
logistic transform of its box. A Nelder-Mead simplex from a small grid of
starting points gives the QML estimate; standard errors come from the
finite-difference Hessian of the full likelihood at the optimum.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit

from . import fracop
from .errors import DomainError, NumericalError
from .fracop import apply_power, condition_report, log_det_frac
from .model import LatticeField
from .weights import WeightMatrix

FIT_SCHEMA_VERSION = 1

#: Multi-start grid for the free coordinates (filtered per variant).
DEFAULT_START_GRID = {
    "rho": (0.0, 0.5),
    "d": (0.5, 1.0, 1.5),
    "lam": (0.0, 0.3),
}

#: Free coordinates searched numerically, by model variant. alpha and
#: sigma2 are always estimated (in closed form), so the parameter count
#: of a variant is len(free) + 2.
VARIANT_FREE = {
    "sar": ("rho",),
    "sarma": ("rho", "lam"),
    "sparfima-noma": ("rho", "d"),
    "sparfima": ("rho", "lam", "d"),
}

_BOUNDARY_TOL = 1e-4


@dataclass(frozen=True)
class Parameters:
    """One point in the full five-parameter space."""

    alpha: float
    rho: float
    lam: float
    d: float
    sigma2: float

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "rho": self.rho, "lambda": self.lam,
                "d": self.d, "sigma2": self.sigma2}


@dataclass(frozen=True)
class FitConfig:
    """Settings for :func:`fit_qml`.

    ``bounds`` maps coordinate names ("rho", "lam", "d") to (lo, hi)
    boxes; coordinates not listed get defaults derived from the weight
    matrix spectra: rho, lam in (max(-1, 1/lambda_min) + 1e-6, 1 - 1e-6)
    and d in [0.05, 5].
    """

    variant: str = "sparfima"
    bounds: dict | None = None
    max_iter: int = 2000
    tolerance: float = 1e-6
    starts: Sequence[dict] | None = None
    hessian_step: float = 1e-4
    compute_se: bool = True

    def __post_init__(self):
        if self.variant not in VARIANT_FREE:
            raise ValueError(f"unknown variant {self.variant!r}; expected "
                             f"one of {sorted(VARIANT_FREE)}")


@dataclass(frozen=True)
class StdErrorReport:
    """Hessian-based standard errors at the optimum.

    Entries are NaN for parameters the variant holds fixed, and all
    entries are NaN with ``negative_definite=False`` when the negative
    Hessian is not positive definite (never silently zero-filled).
    """

    values: Parameters
    negative_definite: bool
    gradient_max_abs: float

    def to_dict(self) -> dict:
        return {
            "values": {k: (None if math.isnan(v) else v)
                       for k, v in self.values.to_dict().items()},
            "negative_definite": self.negative_definite,
            "gradient_max_abs": self.gradient_max_abs,
        }


@dataclass(frozen=True)
class FitResult:
    variant: str
    estimates: Parameters
    std_errors: StdErrorReport | None
    loglik: float
    aic: float
    bic: float
    residuals: np.ndarray = field(repr=False)
    converged: bool
    iterations: int
    evaluations: int
    starts: int
    wall_time: float
    n: int
    p: int
    boundary_warnings: tuple
    operator_condition: dict

    def to_json_dict(self, include_residuals: bool = True,
                     include_timing: bool = False) -> dict:
        out = {
            "schema_version": FIT_SCHEMA_VERSION,
            "variant": self.variant,
            "n": self.n,
            "p": self.p,
            "estimates": self.estimates.to_dict(),
            "fixed": _fixed_for_variant(self.variant),
            "std_errors": (None if self.std_errors is None
                           else self.std_errors.to_dict()),
            "loglik": self.loglik,
            "aic": self.aic,
            "bic": self.bic,
            "converged": self.converged,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "starts": self.starts,
            "boundary_warnings": list(self.boundary_warnings),
            "operator_condition": self.operator_condition,
        }
        if include_residuals:
            out["residuals"] = [float(r) for r in self.residuals]
        if include_timing:
            out["wall_time_seconds"] = self.wall_time
        return out


def _fixed_for_variant(variant: str) -> dict:
    fixed = {}
    free = VARIANT_FREE[variant]
    if "d" not in free:
        fixed["d"] = 1.0
    if "lam" not in free:
        fixed["lambda"] = 0.0
    return fixed


def _values_of(y) -> np.ndarray:
    if isinstance(y, LatticeField):
        return y.values
    return np.asarray(y, dtype=float)


# -- likelihood pieces -------------------------------------------------------


def residual_map(theta: Parameters, y, w1: WeightMatrix,
                 w2: WeightMatrix) -> np.ndarray:
    """xi(y) = (I - lam*W2)^{-1} [ (I - rho*W1)^d y - alpha ].

    At the data-generating parameters this recovers the innovation draw
    used by the simulator (same seed) to floating-point accuracy.
    """
    vals = _values_of(y)
    z = apply_power(w1, theta.rho, theta.d, vals) - theta.alpha
    return apply_power(w2, theta.lam, -1.0, z)


def log_likelihood(theta: Parameters, y, w1: WeightMatrix,
                   w2: WeightMatrix) -> float:
    """Gaussian log-likelihood at an arbitrary parameter point."""
    if theta.sigma2 <= 0.0:
        raise DomainError(f"sigma2 must be positive, got {theta.sigma2}")
    vals = _values_of(y)
    n = len(vals)
    xi = residual_map(theta, vals, w1, w2)
    return (-0.5 * n * math.log(2.0 * math.pi)
            - 0.5 * n * math.log(theta.sigma2)
            - log_det_frac(w2, theta.lam)
            + log_det_frac(w1, theta.rho, theta.d)
            - float(xi @ xi) / (2.0 * theta.sigma2))


class _Workspace:
    """Precomputed pieces for fast concentrated-likelihood evaluations.

    Caches V^{-1} y and V^{-1} 1 per weight matrix so one evaluation costs
    two dense matrix-vector products when w1 and w2 coincide (four when
    they differ), plus O(n) for the eigenvalue log-determinant sums.
    """

    def __init__(self, values: np.ndarray, w1: WeightMatrix,
                 w2: WeightMatrix):
        self.y = np.asarray(values, dtype=float)
        self.n = len(self.y)
        self.w1, self.w2 = w1, w2
        self.shared = w1 is w2
        eig1 = w1.eigensystem()
        if eig1.inverse is None:
            raise NumericalError(
                "QML estimation needs a diagonalizable autoregressive "
                "weight matrix")
        self.vals1 = eig1.values
        self.v1, self.v1inv = eig1.vectors, eig1.inverse
        self.c_y = self.v1inv @ self.y
        if self.shared:
            self.vals2, self.v2, self.v2inv = self.vals1, self.v1, self.v1inv
        else:
            eig2 = w2.eigensystem()
            if eig2.inverse is None:
                raise NumericalError(
                    "QML estimation needs a diagonalizable moving-average "
                    "weight matrix")
            self.vals2 = eig2.values
            self.v2, self.v2inv = eig2.vectors, eig2.inverse
        self.c_one = self.v2inv @ np.ones(self.n)

    def _shifts(self, rho: float, lam: float):
        s1 = 1.0 - rho * self.vals1
        s2 = 1.0 - lam * self.vals2
        if s1.min() <= 0.0 or s2.min() <= 0.0:
            raise DomainError(
                f"spectrum violation at rho={rho}, lam={lam}")
        return s1, s2

    def concentrated(self, rho: float, lam: float, d: float):
        """Profile likelihood value and the closed-form (alpha, sigma2).

        With z = (I - rho*W1)^d y, m = (I - lam*W2)^{-1} 1 and
        u = (I - lam*W2)^{-1} z, the conditional maximizers are
        alpha = m'u / m'm and sigma2 = ||u - alpha*m||^2 / n.
        """
        s1, s2 = self._shifts(rho, lam)
        n = self.n
        gains = s1 ** d
        if lam == 0.0:
            u = self.v1 @ (gains * self.c_y)
            m = np.ones(n)
        elif self.shared:
            u = self.v1 @ (gains / s2 * self.c_y)
            m = self.v2 @ (self.c_one / s2)
        else:
            z = self.v1 @ (gains * self.c_y)
            u = self.v2 @ ((self.v2inv @ z) / s2)
            m = self.v2 @ (self.c_one / s2)
        mm = float(m @ m)
        alpha = float(m @ u) / mm
        xi = u - alpha * m
        sigma2 = float(xi @ xi) / n
        if sigma2 <= 0.0:
            raise DomainError("degenerate residuals: sigma2 estimate is 0")
        ll = (-0.5 * n * math.log(2.0 * math.pi)
              - 0.5 * n * math.log(sigma2)
              - float(np.log(s2).sum())
              + d * float(np.log(s1).sum())
              - 0.5 * n)
        return ll, alpha, sigma2, xi


def concentrated_log_likelihood(rho: float, lam: float, d: float, y,
                                w1: WeightMatrix, w2: WeightMatrix):
    """Profile log-likelihood over (rho, lam, d): alpha and sigma2 are
    replaced by their conditional maximizers. Returns
    ``(value, alpha_hat, sigma2_hat)``. Maximizing this over three
    coordinates is equivalent to maximizing the full likelihood over all
    five parameters."""
    ws = _Workspace(_values_of(y), w1, w2)
    ll, alpha, sigma2, _ = ws.concentrated(rho, lam, d)
    return ll, alpha, sigma2


# -- box reparameterization --------------------------------------------------


def to_unconstrained(value: float, lo: float, hi: float) -> float:
    """Map a box-interior value to the real line (logistic transform)."""
    if not lo < value < hi:
        raise ValueError(f"value {value} outside box ({lo}, {hi})")
    return float(logit((value - lo) / (hi - lo)))


def from_unconstrained(x: float, lo: float, hi: float) -> float:
    """Inverse of :func:`to_unconstrained`."""
    return float(lo + (hi - lo) * expit(x))


def _coefficient_bounds(w: WeightMatrix) -> tuple[float, float]:
    eigs = w.eigenvalues()
    lo = -np.inf if eigs.min() >= 0 else 1.0 / eigs.min()
    hi = np.inf if eigs.max() <= 0 else 1.0 / eigs.max()
    return (max(-1.0, lo) + 1e-6, min(1.0, hi) - 1e-6)


def default_bounds(w1: WeightMatrix, w2: WeightMatrix) -> dict:
    return {
        "rho": _coefficient_bounds(w1),
        "lam": _coefficient_bounds(w2),
        "d": (0.05, fracop.D_MAX),
    }


# -- fitting -----------------------------------------------------------------


def _start_points(free: tuple, bounds: dict,
                  config: FitConfig) -> list[dict]:
    if config.starts is not None:
        return [dict(s) for s in config.starts]
    grids = []
    for name in free:
        lo, hi = bounds[name]
        margin = 1e-3 * (hi - lo)
        grids.append([min(max(v, lo + margin), hi - margin)
                      for v in DEFAULT_START_GRID[name]])
    starts = [{}]
    for name, grid in zip(free, grids):
        starts = [dict(s, **{name: v}) for v in grid for s in starts]
    return starts


def fit_qml(y, w1: WeightMatrix, w2: WeightMatrix | None = None,
            config: FitConfig | None = None) -> FitResult:
    """QML fit of the variant selected in ``config`` (full model by
    default). Returns a :class:`FitResult`; a fit where no start converged
    reports ``converged=False`` rather than raising."""
    t0 = time.perf_counter()
    config = config or FitConfig()
    if w2 is None:
        w2 = w1
    vals = _values_of(y)
    free = VARIANT_FREE[config.variant]
    if len(vals) < len(free) + 3:
        raise ValueError("need at least p + 1 observations")
    ws = _Workspace(vals, w1, w2)
    bounds = default_bounds(w1, w2)
    if config.bounds:
        bounds.update(config.bounds)
    fixed = {"rho": 0.0, "lam": 0.0, "d": 1.0}

    def unpack(x):
        point = dict(fixed)
        for name, xi in zip(free, x):
            point[name] = from_unconstrained(xi, *bounds[name])
        return point

    def objective(x):
        point = unpack(x)
        try:
            ll, _, _, _ = ws.concentrated(point["rho"], point["lam"],
                                          point["d"])
        except DomainError:
            return np.inf
        return -ll

    candidates = []
    total_iter = total_eval = 0
    for start in _start_points(free, bounds, config):
        x0 = np.array([to_unconstrained(start.get(name, fixed[name]),
                                        *bounds[name])
                       for name in free])
        res = minimize(objective, x0, method="Nelder-Mead",
                       options={"xatol": config.tolerance,
                                "fatol": config.tolerance,
                                "maxiter": config.max_iter,
                                "maxfev": 10 * config.max_iter})
        total_iter += res.nit
        total_eval += res.nfev
        point = unpack(res.x)
        candidates.append((float(-res.fun), point, bool(res.success)))

    converged = any(ok for _, _, ok in candidates)
    pool = [c for c in candidates if c[2]] if converged else candidates
    best_ll = max(ll for ll, _, _ in pool)
    near_best = [c for c in pool if c[0] >= best_ll - config.tolerance]
    _, point, _ = min(near_best, key=lambda c: c[1]["d"])

    warnings_ = []
    for name in free:
        lo, hi = bounds[name]
        if min(point[name] - lo, hi - point[name]) < _BOUNDARY_TOL:
            warnings_.append(f"{name} is within {_BOUNDARY_TOL:g} of its "
                             f"bound ({lo:.6g}, {hi:.6g})")

    ll, alpha, sigma2, xi = ws.concentrated(point["rho"], point["lam"],
                                            point["d"])
    estimates = Parameters(alpha=alpha, rho=point["rho"], lam=point["lam"],
                           d=point["d"], sigma2=sigma2)
    n, p = ws.n, len(free) + 2
    aic = -2.0 * ll + 2.0 * p
    bic = -2.0 * ll + p * math.log(n)
    cond = condition_report(w1, estimates.rho, estimates.d).to_dict()

    result = FitResult(
        variant=config.variant, estimates=estimates, std_errors=None,
        loglik=ll, aic=aic, bic=bic, residuals=xi, converged=converged,
        iterations=total_iter, evaluations=total_eval,
        starts=len(candidates), wall_time=0.0, n=n, p=p,
        boundary_warnings=tuple(warnings_), operator_condition=cond)

    if config.compute_se and converged and not warnings_:
        result = replace(result,
                         std_errors=std_errors(result, vals, w1, w2,
                                               step=config.hessian_step))
    return replace(result, wall_time=time.perf_counter() - t0)


def _free_param_names(variant: str) -> list[str]:
    return ["alpha", *VARIANT_FREE[variant], "sigma2"]


def _loglik_on_free(theta_vec, names, base: Parameters, y, w1, w2) -> float:
    point = {name: float(v) for name, v in zip(names, theta_vec)}
    theta = replace(base, **point)
    return log_likelihood(theta, y, w1, w2)


def finite_diff_gradient(fit: FitResult, y, w1: WeightMatrix,
                         w2: WeightMatrix, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of the full log-likelihood in the
    variant's free parameters at the fitted optimum."""
    names = _free_param_names(fit.variant)
    base = fit.estimates
    x = np.array([getattr(base, n) for n in names])
    grad = np.empty(len(x))
    for i in range(len(x)):
        h = step * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        grad[i] = (_loglik_on_free(xp, names, base, y, w1, w2)
                   - _loglik_on_free(xm, names, base, y, w1, w2)) / (2 * h)
    return grad


def std_errors(fit: FitResult, y, w1: WeightMatrix, w2: WeightMatrix,
               step: float = 1e-4) -> StdErrorReport:
    """Standard errors from the central finite-difference Hessian of the
    full log-likelihood at the optimum (Cramer-Rao style, using the
    inverse negative Hessian). Entries are NaN when the negative Hessian
    is not positive definite."""
    vals = _values_of(y)
    names = _free_param_names(fit.variant)
    base = fit.estimates
    x = np.array([getattr(base, n) for n in names])
    k = len(x)
    h = np.array([step * max(1.0, abs(xi)) for xi in x])

    def f(vec):
        return _loglik_on_free(vec, names, base, vals, w1, w2)

    f0 = f(x)
    hess = np.empty((k, k))
    for i in range(k):
        xp, xm = x.copy(), x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        hess[i, i] = (f(xp) - 2.0 * f0 + f(xm)) / h[i] ** 2
    for i in range(k):
        for j in range(i + 1, k):
            xpp, xpm, xmp, xmm = x.copy(), x.copy(), x.copy(), x.copy()
            xpp[[i, j]] += [h[i], h[j]]
            xpm[i] += h[i]
            xpm[j] -= h[j]
            xmp[i] -= h[i]
            xmp[j] += h[j]
            xmm[[i, j]] -= [h[i], h[j]]
            hess[i, j] = hess[j, i] = (
                f(xpp) - f(xpm) - f(xmp) + f(xmm)) / (4.0 * h[i] * h[j])

    grad = finite_diff_gradient(fit, vals, w1, w2)
    neg = -hess
    nan_params = _se_parameters({name: math.nan for name in names})
    try:
        neg_evals = np.linalg.eigvalsh(neg)
        if neg_evals.min() <= 0.0:
            return StdErrorReport(nan_params, False,
                                  float(np.abs(grad).max()))
        cov = np.linalg.inv(neg)
    except np.linalg.LinAlgError:
        return StdErrorReport(nan_params, False, float(np.abs(grad).max()))
    ses = {name: float(se)
           for name, se in zip(names, np.sqrt(np.diag(cov)))}
    return StdErrorReport(_se_parameters(ses), True,
                          float(np.abs(grad).max()))


def _se_parameters(named: dict) -> Parameters:
    return Parameters(alpha=named.get("alpha", math.nan),
                      rho=named.get("rho", math.nan),
                      lam=named.get("lam", math.nan),
                      d=named.get("d", math.nan),
                      sigma2=named.get("sigma2", math.nan))


def information_criteria(fit: FitResult) -> tuple[float, float]:
    """(AIC, BIC) = (-2 loglik + 2p, -2 loglik + p log n) with p the free
    parameter count of the variant."""
    return (-2.0 * fit.loglik + 2.0 * fit.p,
            -2.0 * fit.loglik + fit.p * math.log(fit.n))
