"""Gain kernel k(x, y) of the boundary feedback transform.

The kernel solves the hyperbolic boundary-value problem

    nu * (k_xx - k_yy) + mu * k = 0   on the triangle 0 <= y <= x <= L,
    k(x, 0) = 0,   k(x, x) = -mu * x / (2 * nu),

and has the explicit power series

    k(x, y) = -(mu * y) / (2 * nu)
              * sum_{m >= 0} (-mu / (4 nu))^m (x^2 - y^2)^m / (m! (m+1)!).

Everything here evaluates partial sums of that series on the grid.  Terms
are updated recursively; explicit factorials would overflow doubles near
m = 85.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import DEFAULT_KERNEL_TOL, KERNEL_MAX_ORDER
from .errors import (
    ConvergenceError,
    DimensionError,
    DomainError,
    InvalidParameterError,
)
from .grid import Grid

__all__ = [
    "Kernel",
    "kernel_series",
    "truncate_order",
    "kernel_table",
    "kernel_pde_residual",
]


def _check_coeffs(mu: float, nu: float) -> None:
    if nu <= 0:
        raise InvalidParameterError(f"diffusivity must be positive, got {nu}")
    if not np.isfinite(mu):
        raise InvalidParameterError(f"damping coefficient must be finite, got {mu}")


def kernel_series(x: float, y: float, mu: float, nu: float, order: int) -> float:
    """Partial sum of the kernel series at a single point.

    Parameters
    ----------
    x, y : float
        Evaluation point with 0 <= y <= x.
    mu, nu : float
        Damping coefficient and diffusivity.
    order : int
        Number of series terms beyond the leading one (M >= 0).

    Returns
    -------
    float
        k^M(x, y).
    """
    _check_coeffs(mu, nu)
    if order < 0:
        raise InvalidParameterError(f"truncation order must be >= 0, got {order}")
    if y < 0 or y > x:
        raise DomainError(f"point (x={x}, y={y}) outside the triangle 0 <= y <= x")
    z = (x - y) * (x + y)
    q = -mu / (4.0 * nu)
    term = 1.0
    total = 1.0
    for m in range(order):
        term *= q * z / ((m + 1) * (m + 2))
        total += term
    return -(mu * y) / (2.0 * nu) * total


def truncate_order(mu: float, nu: float, grid: Grid, tol: float = DEFAULT_KERNEL_TOL) -> int:
    """Smallest M with max |k^{M+1} - k^M| < tol over all grid pairs.

    The difference k^{M+1} - k^M is the (M+1)-th series term, whose magnitude
    grows with x at fixed y, so the maximum over the triangle is attained on
    the x = L row.  The scan therefore only tracks that row.
    """
    _check_coeffs(mu, nu)
    if tol <= 0:
        raise InvalidParameterError(f"tolerance must be positive, got {tol}")
    y = grid.nodes
    prefactor = np.abs(mu) * y / (2.0 * nu)
    z = grid.length**2 - y * y
    q = np.abs(mu) / (4.0 * nu)
    term = np.ones_like(y)
    # overflow for absurd mu/nu just keeps the loop running into the cap error
    with np.errstate(over="ignore", invalid="ignore"):
        for order in range(KERNEL_MAX_ORDER + 1):
            term = term * q * z / ((order + 1) * (order + 2))
            if np.max(prefactor * term) < tol:
                return order
    raise ConvergenceError(
        f"kernel series did not reach tol={tol:.1e} within {KERNEL_MAX_ORDER} terms"
    )


@dataclass(frozen=True)
class Kernel:
    """Kernel values tabulated on the lower triangle of the grid.

    Attributes
    ----------
    values : ndarray
        N_x x N_x array; entry (i, j) holds k^M(x_i, y_j) for j <= i, and
        0 above the diagonal.  Use :meth:`value` for guarded access.
    order : int
        Truncation order M.
    achieved_delta : float
        max |k^{M+1} - k^M| actually reached over the table.
    """

    values: np.ndarray = field(repr=False)
    order: int
    mu: float
    nu: float
    grid: Grid
    achieved_delta: float
    tol: float

    def value(self, i: int, j: int) -> float:
        """Table entry for node pair (i, j); rejects points above the diagonal."""
        if not (0 <= i < self.grid.nx and 0 <= j < self.grid.nx):
            raise DimensionError(f"index ({i}, {j}) outside {self.grid.nx}-node table")
        if j > i:
            raise DomainError(f"entry ({i}, {j}) lies above the diagonal")
        return float(self.values[i, j])

    def boundary_row(self) -> np.ndarray:
        """Kernel trace k(L, y_j) used by the feedback law."""
        return self.values[-1, :].copy()


def kernel_table(grid: Grid, mu: float, nu: float, tol: float = DEFAULT_KERNEL_TOL) -> Kernel:
    """Tabulate the kernel on the grid with the order picked by ``truncate_order``."""
    order = truncate_order(mu, nu, grid, tol)
    x = grid.nodes[:, None]
    y = grid.nodes[None, :]
    z = (x - y) * (x + y)
    q = -mu / (4.0 * nu)
    term = np.ones_like(z)
    total = np.ones_like(z)
    for m in range(order):
        term = term * q * z / ((m + 1) * (m + 2))
        total += term
    # magnitude of the next term = the achieved truncation gap
    next_term = term * q * z / ((order + 1) * (order + 2))
    prefactor = -(mu * y) / (2.0 * nu)
    tri = np.tril(np.ones_like(z, dtype=bool))
    achieved = float(np.max(np.abs(prefactor * next_term)[tri]))
    values = np.where(tri, prefactor * total, 0.0)
    values.flags.writeable = False
    return Kernel(
        values=values,
        order=order,
        mu=float(mu),
        nu=float(nu),
        grid=grid,
        achieved_delta=achieved,
        tol=float(tol),
    )


def kernel_pde_residual(kernel: Kernel) -> float:
    """Max residual |nu (k_xx - k_yy) + mu k| at interior triangle nodes.

    Second derivatives are central differences.  Only nodes at least two
    indices below the diagonal and one away from the outer edges are used,
    so the stencil never leaves the tabulated triangle.
    """
    g = kernel.grid
    if g.nx < 5:
        raise DimensionError("residual needs at least 5 nodes")
    k = kernel.values
    inv = 1.0 / g.dx**2
    kxx = (k[2:, 1:-1] - 2.0 * k[1:-1, 1:-1] + k[:-2, 1:-1]) * inv
    kyy = (k[1:-1, 2:] - 2.0 * k[1:-1, 1:-1] + k[1:-1, :-2]) * inv
    res = kernel.nu * (kxx - kyy) + kernel.mu * k[1:-1, 1:-1]
    # center (i, j) with 1 <= j <= i - 2 in 0-based full-table indices
    i_idx = np.arange(1, g.nx - 1)[:, None]
    j_idx = np.arange(1, g.nx - 1)[None, :]
    mask = j_idx <= i_idx - 2
    if not np.any(mask):
        return 0.0
    return float(np.max(np.abs(res[mask])))
