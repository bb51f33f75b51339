"""Figure rendering for cost curves, C-D regions, and input CDFs.

Every CLI pipeline drops a PNG next to its CSV unless figures are disabled;
rendering uses the Agg backend so it works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .cost import CostVector  # noqa: E402
from .optimizer import RegionPoint  # noqa: E402


def save_cost_figure(vec: CostVector, path: str, lam: float) -> None:
    """Semilog cost curve; MC kinds also show the variance/bias split."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.semilogy(vec.x_grid, vec.values, "o-", ms=3, label=f"{vec.kind} cost")
    if vec.kind != "bcrb":
        ax.semilogy(vec.x_grid, vec.variance, "--", label="variance")
        ax.semilogy(vec.x_grid, vec.bias_sq, ":", label="bias$^2$")
    ax.set_xlabel("input intensity x [W]")
    ax.set_ylabel("sensing cost c(x) [m$^2$]")
    ax.set_title(f"sensing cost, {vec.kind} estimator, lambda={lam:g}")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_region_figure(
    points: list[RegionPoint], path: str, solver: str, estimator: str
) -> None:
    """Rate vs distortion (log-x) for a sweep sorted by distortion."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.semilogx(
        [p.distortion for p in points],
        [p.rate_bits for p in points],
        "o-",
        ms=4,
    )
    ax.set_xlabel("distortion D [m$^2$]")
    ax.set_ylabel("rate [bits/channel use]")
    ax.set_title(f"C-D region ({solver}, {estimator} cost)")
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_cdf_figure(curves: list[tuple[str, list, list]], path: str) -> None:
    """Overlay of input CDFs, one step curve per requested mode."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for label, x, cdf in curves:
        ax.step(x, cdf, where="post", label=label)
    ax.set_xlabel("input intensity x [W]")
    ax.set_ylabel("P(X <= x)")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
