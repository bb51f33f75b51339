"""Quantized model of an intensity-modulated optical link with a monostatic echo.

The forward (communication) channel is

    Y_c = h_c * X + Z_c,     Z_c ~ N(0, sigma_c^2),  X >= 0,

where h_c collects the Lambertian line-of-sight gain of the LED / photodiode
geometry.  The sensing receiver integrates n_s samples of the backscattered
echo, whose per-sample model is

    Y_s = (rho * x / r_s^4) + Z_s,   Z_s ~ N(0, sigma_s^2),

with reflectivity rho and target range r_s distributed Exp(lam).  For the
numerical rate computations the input is confined to the grid
{0, q, 2q, ..., x_max} and the output is quantized with step q^2, giving a
finite row-stochastic transition matrix.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

# Hard ceiling on len(x_grid) * len(y_grid) before building the dense
# likelihood matrix; override per call for bigger sweeps.
DEFAULT_MAX_MATRIX_ENTRIES = 25_000_000


class ConfigError(ValueError):
    """Invalid parameter combination, grid, or run configuration."""


class NumericalError(RuntimeError):
    """A numerical routine produced unusable values (under/overflow, NaN)."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its cap; ``trace`` holds the last iterates."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class SystemParams:
    """Physical and quantization constants of the link.

    Defaults reproduce the reference configuration used throughout the test
    suite: unit gains and noise variances, Exp(0.5) range prior, 64 sensing
    samples, a 10 W mean optical power budget, and a 0.25 W input grid
    closing at 30 W with +-5 sigma output truncation.

    Attributes
    ----------
    h_c : direct-path communication gain.
    sigma_c2, sigma_s2 : noise variances of the comm and sensing receivers.
    rho : target reflectivity (> 0).
    lam : rate of the exponential range prior (> 0).
    n_s : number of integrated sensing samples (>= 1).
    power_budget : mean optical power constraint P (> 0).
    q : input grid step; must divide x_max exactly.
    x_max : largest grid symbol.
    noise_span : output grid truncation in units of sigma_c.
    """

    h_c: float = 1.0
    sigma_c2: float = 1.0
    sigma_s2: float = 1.0
    rho: float = 1.0
    lam: float = 0.5
    n_s: int = 64
    power_budget: float = 10.0
    q: float = 0.25
    x_max: float = 30.0
    noise_span: float = 5.0

    def __post_init__(self) -> None:
        positive = {
            "sigma_c2": self.sigma_c2,
            "sigma_s2": self.sigma_s2,
            "rho": self.rho,
            "lam": self.lam,
            "power_budget": self.power_budget,
            "q": self.q,
            "x_max": self.x_max,
            "noise_span": self.noise_span,
        }
        for name, value in positive.items():
            if not (value > 0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be strictly positive, got {value!r}")
        if int(self.n_s) != self.n_s or self.n_s < 1:
            raise ConfigError(f"n_s must be a positive integer, got {self.n_s!r}")
        ratio = self.x_max / self.q
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ConfigError(
                f"q={self.q!r} must divide x_max={self.x_max!r} so the grid closes on x_max"
            )

    def x_grid(self) -> np.ndarray:
        """Input grid {0, q, ..., x_max} as a float array."""
        n = int(round(self.x_max / self.q))
        return np.arange(n + 1, dtype=np.float64) * self.q


@dataclass(frozen=True)
class OpticalGeometry:
    """LED/photodiode geometry for the line-of-sight gain.

    Angles are in radians and must lie in [0, pi/2); gains and the detector
    area are nonnegative; the link distance is strictly positive.
    """

    half_power_angle: float
    emission_angle: float
    incidence_angle: float
    fov: float
    area: float
    concentrator_gain: float = 1.0
    optical_gain: float = 1.0
    distance: float = 1.0

    def __post_init__(self) -> None:
        for name in ("half_power_angle", "emission_angle", "incidence_angle", "fov"):
            angle = getattr(self, name)
            if not (0.0 <= angle < math.pi / 2):
                raise ConfigError(f"{name} must lie in [0, pi/2), got {angle!r}")
        for name in ("area", "concentrator_gain", "optical_gain"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if not self.distance > 0:
            raise ConfigError(f"distance must be strictly positive, got {self.distance!r}")


def lambertian_order(half_power_angle: float) -> float:
    """Lambertian mode number m = -ln 2 / ln cos(Phi_1/2).

    Half-power angle of 60 degrees gives m = 1 (the classical Lambertian
    emitter); m grows without bound as the beam narrows and tends to 0+ as
    the half-power angle opens toward 90 degrees.
    """
    c = math.cos(half_power_angle)
    if not (0.0 < c < 1.0):
        raise ValueError(
            f"half-power angle must have cos strictly inside (0, 1), got cos={c!r}"
        )
    return -math.log(2.0) / math.log(c)


def radiant_intensity(phi: float, m: float) -> float:
    """Normalized Lambertian radiant intensity R_0(phi) = (m+1)/(2 pi) cos^m(phi).

    Zero for emission angles at or beyond pi/2 (no forward radiation).
    """
    if m <= 0:
        raise ValueError(f"Lambertian order must be positive, got {m!r}")
    if phi >= math.pi / 2:
        return 0.0
    return (m + 1.0) / (2.0 * math.pi) * math.cos(phi) ** m


def comm_gain(geometry: OpticalGeometry) -> float:
    """Line-of-sight channel gain of the communication path.

    h_c = A / r_c^2 * R_0(phi_c) * T_s * g * cos(psi_c) inside the field of
    view, and exactly 0 outside it.
    """
    if geometry.distance == 0:
        raise ValueError("link distance must be nonzero")
    if geometry.incidence_angle > geometry.fov:
        return 0.0
    m = lambertian_order(geometry.half_power_angle)
    r0 = radiant_intensity(geometry.emission_angle, m)
    return (
        geometry.area
        / geometry.distance**2
        * r0
        * geometry.optical_gain
        * geometry.concentrator_gain
        * math.cos(geometry.incidence_angle)
    )


def sensing_gain(r_s: float, x: float, params: SystemParams) -> float:
    """Mean echo amplitude rho * x / r_s^4 at range r_s for input intensity x."""
    if not r_s > 0:
        raise ValueError(f"range must be strictly positive, got {r_s!r}")
    if x < 0:
        raise ValueError(f"intensity must be nonnegative, got {x!r}")
    return params.rho * x / r_s**4


@dataclass(frozen=True)
class QuantizedChannel:
    """Finite-alphabet transition law of the quantized comm channel.

    likelihood[k, j] = P(Y = y_grid[j] | X = x_grid[k]); rows are normalized
    Gaussian densities and sum to 1 within 1e-12.  Arrays are read-only.
    """

    x_grid: np.ndarray
    y_grid: np.ndarray
    likelihood: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.likelihood.shape


def build_quantized_channel(
    params: SystemParams,
    max_entries: int = DEFAULT_MAX_MATRIX_ENTRIES,
) -> QuantizedChannel:
    """Construct the quantized transition matrix for the comm channel.

    The output grid has step q^2, is anchored so 0 is a grid point, and spans
    [-noise_span * sigma_c, h_c * x_max + noise_span * sigma_c].  Each row is
    the Gaussian density N(h_c * x_k, sigma_c^2) sampled on the grid and
    renormalized to sum to exactly 1.

    Raises ConfigError when the requested grids would exceed ``max_entries``
    likelihood entries.
    """
    if not params.h_c > 0:
        raise ConfigError(f"h_c must be strictly positive to build a channel, got {params.h_c!r}")
    x = params.x_grid()
    step = params.q**2
    sigma = math.sqrt(params.sigma_c2)
    lo = -params.noise_span * sigma
    hi = params.h_c * params.x_max + params.noise_span * sigma
    k_min = math.ceil(lo / step - 1e-9)
    k_max = math.floor(hi / step + 1e-9)
    y = np.arange(k_min, k_max + 1, dtype=np.float64) * step
    if x.size * y.size > max_entries:
        raise ConfigError(
            f"likelihood would hold {x.size * y.size} entries "
            f"({x.size} x {y.size}), above the cap of {max_entries}; "
            "coarsen q or lower x_max / noise_span"
        )
    z = (y[None, :] - params.h_c * x[:, None]) / sigma
    w = np.exp(-0.5 * z**2)
    norm = w.sum(axis=1, keepdims=True)
    if not np.all(norm > 0):
        raise NumericalError("a likelihood row underflowed to zero; widen noise_span")
    w /= norm
    for arr in (x, y, w):
        arr.setflags(write=False)
    return QuantizedChannel(x_grid=x, y_grid=y, likelihood=w)


def worker_count(explicit: int | None = None) -> int:
    """Number of worker threads: explicit argument, else OISAC_THREADS, else CPU count."""
    if explicit is not None:
        if explicit < 1:
            raise ConfigError(f"worker count must be >= 1, got {explicit!r}")
        return explicit
    env = os.environ.get("OISAC_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise ConfigError(f"OISAC_THREADS must be an integer, got {env!r}") from exc
        if n < 1:
            raise ConfigError(f"OISAC_THREADS must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1
