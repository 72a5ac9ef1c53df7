"""Uniform grid, composite trapezoidal quadrature, and discrete norms.

The whole package works on one uniform grid x_i = (i - 1) * dx with
dx = L / (N_x - 1), matching the discretization every other module builds on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidParameterError

__all__ = [
    "Grid",
    "Tridiagonal",
    "make_grid",
    "trapezoid_weights",
    "trapezoid",
    "inner_product",
    "l2_norm",
    "h1_norm",
    "laplacian_matrix",
]


@dataclass(frozen=True)
class Grid:
    """Uniform partition of [0, L] into N_x nodes.

    Attributes
    ----------
    length : float
        Domain length L.
    nx : int
        Node count, at least 2.
    dx : float
        Spacing L / (nx - 1).
    nodes : ndarray
        x_i = (i - 1) * dx; nodes[0] = 0 and nodes[-1] = L.
    """

    length: float
    nx: int
    dx: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.length <= 0:
            raise InvalidParameterError(f"domain length must be positive, got {self.length}")
        if self.nx < 2:
            raise InvalidParameterError(f"need at least 2 nodes, got {self.nx}")
        dx = self.length / (self.nx - 1)
        nodes = np.linspace(0.0, self.length, self.nx)
        nodes.flags.writeable = False
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "nodes", nodes)

    def check_vector(self, values: np.ndarray) -> np.ndarray:
        """Validate that ``values`` is a vector on this grid."""
        values = np.asarray(values, dtype=float)
        if values.shape != (self.nx,):
            raise DimensionError(
                f"expected vector of length {self.nx}, got shape {values.shape}"
            )
        return values


def make_grid(length: float, nx: int) -> Grid:
    """Build the uniform grid on [0, length] with ``nx`` nodes."""
    return Grid(length=float(length), nx=int(nx))


def trapezoid_weights(grid: Grid) -> np.ndarray:
    """Composite trapezoid weights: dx everywhere, halved at both ends."""
    w = np.full(grid.nx, grid.dx)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def trapezoid(values: np.ndarray, grid: Grid) -> float:
    """Composite trapezoidal rule for nodal values on the grid."""
    values = grid.check_vector(values)
    return float(np.dot(trapezoid_weights(grid), values))


def inner_product(u: np.ndarray, v: np.ndarray, grid: Grid) -> float:
    """Discrete L2 inner product (u, v) by the trapezoidal rule."""
    u = grid.check_vector(u)
    v = grid.check_vector(v)
    return float(np.dot(trapezoid_weights(grid) * u, v))


def l2_norm(values: np.ndarray, grid: Grid) -> float:
    """Discrete L2 norm induced by :func:`inner_product`."""
    values = grid.check_vector(values)
    return float(np.sqrt(np.dot(trapezoid_weights(grid), values * values)))


def h1_norm(values: np.ndarray, grid: Grid) -> float:
    """Discrete H1 norm: L2 part plus forward-difference derivative part.

    The derivative part is dx * sum_i ((v_{i+1} - v_i)/dx)^2, the cheapest
    consistent realization of the continuum seminorm.
    """
    values = grid.check_vector(values)
    diff = np.diff(values) / grid.dx
    semi = grid.dx * np.dot(diff, diff)
    return float(np.sqrt(l2_norm(values, grid) ** 2 + semi))


@dataclass(frozen=True)
class Tridiagonal:
    """Tridiagonal matrix stored as its three diagonals.

    ``sub`` and ``sup`` have length n - 1, ``diag`` has length n.
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    @property
    def n(self) -> int:
        return self.diag.shape[0]

    def to_dense(self) -> np.ndarray:
        return (
            np.diag(self.diag)
            + np.diag(self.sub, -1)
            + np.diag(self.sup, 1)
        )

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[1:] += self.sub * v[:-1]
        out[:-1] += self.sup * v[1:]
        return out

    def banded(self) -> np.ndarray:
        """Diagonal-ordered form for ``scipy.linalg.solve_banded`` with (1, 1)."""
        ab = np.zeros((3, self.n))
        ab[0, 1:] = self.sup
        ab[1, :] = self.diag
        ab[2, :-1] = self.sub
        return ab


def laplacian_matrix(grid: Grid) -> Tridiagonal:
    """Central-difference Laplacian with identity boundary rows.

    Interior rows implement (v_{i-1} - 2 v_i + v_{i+1}) / dx^2.  The first
    and last rows are identity rows; boundary values are imposed
    algebraically by the simulator.
    """
    if grid.nx < 3:
        raise InvalidParameterError("Laplacian needs at least 3 nodes")
    inv = 1.0 / grid.dx**2
    diag = np.full(grid.nx, -2.0 * inv)
    sub = np.full(grid.nx - 1, inv)
    sup = np.full(grid.nx - 1, inv)
    diag[0] = diag[-1] = 1.0
    sup[0] = 0.0
    sub[-1] = 0.0
    return Tridiagonal(sub=sub, diag=diag, sup=sup)
