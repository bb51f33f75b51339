"""MAP, MLE, and posterior-mean range estimators, plus Fisher information / BCRB.

All three estimators observe n_s echo samples y_j = rho*x/r^4 + Z_j and reduce
to functions of the sample mean y_bar.  With an Exp(lam) prior on the range r:

  MLE   r_hat = (rho*x / y_bar)^(1/4)          (valid only for y_bar > 0)
  MAP   unique nonnegative root of
          (lam*sigma_s^2/n_s) r^9 + 4 rho x y_bar r^4 - 4 rho^2 x^2 = 0
  MP    posterior mean of r, integrated numerically on [r_min, r_max]

The Bayesian information for r at transmit intensity x is

  J(x, r) = 16 n_s rho^2 x^2 / (sigma_s^2 r^8) + lam,

whose inverse is the Bayesian Cramer-Rao bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ConvergenceError, NumericalError, SystemParams

# Tail probability of the exponential prior left outside the default
# quadrature window [r_min, r_max].
DEFAULT_TAIL_MASS = 1e-8
DEFAULT_R_MIN = 1e-3
DEFAULT_N_NODES = 2048

_MP_CHUNK_ELEMENTS = 4_000_000


@dataclass(frozen=True)
class SensingObservation:
    """One sensing snapshot: transmitted intensity and the echo samples.

    Either the full sample vector ``y`` or the precomputed mean ``y_bar`` must
    be given; when both are present they must agree within 1e-12.
    """

    x: float
    y: np.ndarray | None = None
    y_bar: float | None = None

    def __post_init__(self) -> None:
        if self.x < 0:
            raise ValueError(f"intensity must be nonnegative, got {self.x!r}")
        if self.y is not None:
            y = np.asarray(self.y, dtype=np.float64)
            if y.ndim != 1 or y.size == 0:
                raise ValueError("y must be a nonempty 1-d sample vector")
            object.__setattr__(self, "y", y)
            mean = float(y.mean())
            if self.y_bar is None:
                object.__setattr__(self, "y_bar", mean)
            elif abs(self.y_bar - mean) > 1e-12 * max(1.0, abs(mean)):
                raise ValueError(
                    f"cached y_bar={self.y_bar!r} disagrees with mean(y)={mean!r}"
                )
        elif self.y_bar is None:
            raise ValueError("need either y or y_bar")


@dataclass(frozen=True)
class RangeEstimate:
    """Range estimate with its provenance; residual is set for MAP only."""

    value: float
    kind: str
    valid: bool = True
    residual: float | None = None


@dataclass(frozen=True)
class QuadratureConfig:
    """Integration grid for the posterior: [r_min, r_max] with n_nodes points."""

    r_min: float
    r_max: float
    n_nodes: int = DEFAULT_N_NODES
    scheme: str = "log"

    def __post_init__(self) -> None:
        if not (0 < self.r_min < self.r_max < math.inf):
            raise ValueError(
                f"need 0 < r_min < r_max, got ({self.r_min!r}, {self.r_max!r})"
            )
        if self.n_nodes < 16:
            raise ValueError(f"n_nodes must be >= 16, got {self.n_nodes!r}")
        if self.scheme not in ("log", "uniform"):
            raise ValueError(f"scheme must be 'log' or 'uniform', got {self.scheme!r}")

    def nodes(self) -> np.ndarray:
        if self.scheme == "log":
            return np.geomspace(self.r_min, self.r_max, self.n_nodes)
        return np.linspace(self.r_min, self.r_max, self.n_nodes)


def default_quadrature(params: SystemParams) -> QuadratureConfig:
    """Default grid: log-spaced, upper bound at the (1 - 1e-8) prior quantile."""
    r_max = -math.log(DEFAULT_TAIL_MASS) / params.lam
    return QuadratureConfig(r_min=DEFAULT_R_MIN, r_max=r_max, n_nodes=DEFAULT_N_NODES)


def mle_range(obs: SensingObservation, params: SystemParams) -> RangeEstimate:
    """Maximum-likelihood range estimate (rho*x/y_bar)^(1/4).

    Invalid (valid=False, NaN value) when y_bar <= 0: a nonpositive mean echo
    carries no usable gain information, and the Monte Carlo pipeline is
    responsible for the clamp policy in that case.
    """
    if obs.x <= 0:
        raise ValueError("x = 0 leaves the echo gain unidentifiable")
    if obs.y_bar <= 0:
        return RangeEstimate(value=math.nan, kind="mle", valid=False)
    return RangeEstimate(
        value=(params.rho * obs.x / obs.y_bar) ** 0.25, kind="mle", valid=True
    )


def map_root(
    x,
    y_bar,
    lam: float,
    sigma_s2: float,
    n_s: int,
    rho: float = 1.0,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized nonnegative root of the posterior stationarity polynomial.

    Solves f(r) = a r^9 + b r^4 - c = 0 with a = lam*sigma_s2/n_s,
    b = 4 rho x y_bar, c = 4 rho^2 x^2, elementwise over broadcast (x, y_bar).
    f(0) = -c <= 0 and f is eventually increasing, so the nonnegative root is
    unique; Newton steps are safeguarded by a sign-change bracket (doubled
    upward / halved downward until it straddles the root) with bisection
    whenever Newton leaves the bracket.

    Returns (root, residual, converged) arrays of the broadcast shape.
    """
    xb, yb = np.broadcast_arrays(
        np.asarray(x, dtype=np.float64), np.asarray(y_bar, dtype=np.float64)
    )
    shape = xb.shape
    xb = np.atleast_1d(xb).ravel()
    yb = np.atleast_1d(yb).ravel()
    if lam < 0 or sigma_s2 <= 0 or n_s < 1 or rho <= 0:
        raise ValueError("need lam >= 0, sigma_s2 > 0, n_s >= 1, rho > 0")

    a = lam * sigma_s2 / n_s
    b = 4.0 * rho * xb * yb
    c = 4.0 * rho**2 * xb**2

    def poly(r: np.ndarray) -> np.ndarray:
        r4 = r**4
        return a * r4 * r4 * r + b * r4 - c

    # Start at the MLE when the data supports one, else at the prior-dominated
    # balance point a r^9 = c.  For y_bar > 0 both are upper bounds on the
    # root (f is nonnegative at each), so take the smaller: a near-zero
    # positive y_bar sends the MLE astronomically high while the balance
    # point stays moderate, and starting from the min keeps Newton local.
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        mle = np.where(yb > 0, (rho * xb / np.where(yb > 0, yb, 1.0)) ** 0.25, 0.0)
        prior_start = np.where(a > 0, (c / max(a, 1e-300)) ** (1.0 / 9.0), 0.0)
    capped_mle = np.minimum(mle, prior_start) if a > 0 else mle
    start = np.where(yb > 0, capped_mle, prior_start)

    root = start.copy()
    residual = poly(root)
    converged = np.abs(residual) <= tol
    # x = 0 collapses the polynomial to a*r^9, rooted at 0.
    zero_x = xb == 0
    root[zero_x] = 0.0
    residual[zero_x] = 0.0
    converged[zero_x] = True
    active = ~converged
    if not active.any():
        return root.reshape(shape), residual.reshape(shape), converged.reshape(shape)

    lo = np.minimum(1e-6, 0.5 * np.where(start > 0, start, 1.0))
    hi = 2.0 * np.maximum(start, 1e-6)
    for _ in range(200):
        grow = active & (poly(hi) < 0)
        if not grow.any():
            break
        hi[grow] *= 2.0
    for _ in range(200):
        shrink = active & (poly(lo) > 0)
        if not shrink.any():
            break
        lo[shrink] *= 0.5

    r = np.clip(start, lo, hi)
    for _ in range(max_iter):
        f = poly(r)
        newly = active & (np.abs(f) <= tol)
        root[newly] = r[newly]
        residual[newly] = f[newly]
        converged[newly] = True
        active &= ~newly
        if not active.any():
            break
        above = active & (f > 0)
        below = active & (f < 0)
        hi[above] = r[above]
        lo[below] = r[below]
        r4 = r**4
        fp = r**3 * (9.0 * a * r4 * r + 4.0 * b)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = r - f / fp
        ok = active & np.isfinite(newton) & (newton > lo) & (newton < hi)
        step = np.where(ok, newton, 0.5 * (lo + hi))
        r = np.where(active, step, r)
    if active.any():
        # Best bisected iterate; residual above tol marks these unconverged.
        root[active] = r[active]
        residual[active] = poly(r[active])
    return root.reshape(shape), residual.reshape(shape), converged.reshape(shape)


def map_range(
    obs: SensingObservation,
    params: SystemParams,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> RangeEstimate:
    """MAP range estimate: the unique nonnegative stationarity-polynomial root."""
    if obs.x <= 0:
        raise ValueError("x = 0 leaves the echo gain unidentifiable")
    root, residual, ok = map_root(
        obs.x, obs.y_bar, params.lam, params.sigma_s2, params.n_s, params.rho,
        tol=tol, max_iter=max_iter,
    )
    if not bool(ok):
        raise ConvergenceError(
            f"MAP root residual {float(residual):.3e} above tol={tol:g} "
            f"after {max_iter} iterations (x={obs.x!r}, y_bar={obs.y_bar!r})"
        )
    return RangeEstimate(
        value=float(root), kind="map", valid=True, residual=float(residual)
    )


def posterior_density(
    r_grid: np.ndarray, obs: SensingObservation, params: SystemParams
) -> np.ndarray:
    """Posterior density of the range on r_grid, trapezoid-normalized to 1.

    Proportional to lam*exp(-lam*r) * exp(-sum_j (y_j - rho*x/r^4)^2 / (2 sigma_s^2));
    the sum over samples reduces to n_s*(y_bar - rho*x/r^4)^2 plus a constant
    absorbed by normalization.
    """
    r = np.asarray(r_grid, dtype=np.float64)
    if r.ndim != 1 or r.size < 2:
        raise ValueError("r_grid must be a 1-d grid with at least 2 nodes")
    if not (r[0] > 0 and np.all(np.diff(r) > 0)):
        raise ValueError("r_grid must be strictly increasing and positive")
    mean = params.rho * obs.x / r**4
    log_post = (
        math.log(params.lam)
        - params.lam * r
        - params.n_s * (obs.y_bar - mean) ** 2 / (2.0 * params.sigma_s2)
    )
    peak = log_post.max()
    if not np.isfinite(peak):
        raise NumericalError(
            "posterior underflowed everywhere on the grid; widen [r_min, r_max]"
        )
    w = np.exp(log_post - peak)
    z = np.trapezoid(w, r)
    if not (np.isfinite(z) and z > 0):
        raise NumericalError(
            "posterior mass vanished under the trapezoid rule; widen the grid"
        )
    return w / z


def mp_range(
    obs: SensingObservation,
    params: SystemParams,
    quad: QuadratureConfig | None = None,
) -> RangeEstimate:
    """Posterior-mean range estimate by trapezoid quadrature on [r_min, r_max]."""
    if quad is None:
        quad = default_quadrature(params)
    r = quad.nodes()
    density = posterior_density(r, obs, params)
    return RangeEstimate(value=float(np.trapezoid(density * r, r)), kind="mp")


def mp_values(
    x: float,
    y_bar: np.ndarray,
    params: SystemParams,
    quad: QuadratureConfig | None = None,
) -> np.ndarray:
    """Vectorized posterior means for many sample means at one intensity.

    Identical to mp_range per element (the trapezoid normalization cancels in
    the mean); chunked so the (samples x nodes) work array stays bounded.
    """
    if quad is None:
        quad = default_quadrature(params)
    yb = np.asarray(y_bar, dtype=np.float64).ravel()
    r = quad.nodes()
    # Trapezoid weights for the node grid.
    tw = np.empty_like(r)
    tw[0] = 0.5 * (r[1] - r[0])
    tw[-1] = 0.5 * (r[-1] - r[-2])
    tw[1:-1] = 0.5 * (r[2:] - r[:-2])
    log_prior = math.log(params.lam) - params.lam * r
    mean = params.rho * x / r**4
    out = np.empty_like(yb)
    chunk = max(1, _MP_CHUNK_ELEMENTS // r.size)
    for lo in range(0, yb.size, chunk):
        hi = min(lo + chunk, yb.size)
        log_post = (
            log_prior[None, :]
            - params.n_s
            * (yb[lo:hi, None] - mean[None, :]) ** 2
            / (2.0 * params.sigma_s2)
        )
        log_post -= log_post.max(axis=1, keepdims=True)
        w = np.exp(log_post)
        out[lo:hi] = (w @ (tw * r)) / (w @ tw)
    return out


def fisher_information(x, r_s, params: SystemParams):
    """Bayesian Fisher information 16 n_s rho^2 x^2 / (sigma_s^2 r_s^8) + lam.

    Accepts scalars or broadcastable arrays for x and r_s.
    """
    xv = np.asarray(x, dtype=np.float64)
    rv = np.asarray(r_s, dtype=np.float64)
    if np.any(rv <= 0):
        raise ValueError("r_s must be strictly positive")
    if np.any(xv < 0):
        raise ValueError("x must be nonnegative")
    info = 16.0 * params.n_s * params.rho**2 * xv**2 / (params.sigma_s2 * rv**8) + params.lam
    if np.ndim(info) == 0:
        return float(info)
    return info


def bcrb(x, r_s, params: SystemParams):
    """Bayesian Cramer-Rao bound: inverse Fisher information."""
    info = fisher_information(x, r_s, params)
    return 1.0 / info
