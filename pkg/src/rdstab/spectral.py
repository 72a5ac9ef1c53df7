"""Dirichlet sine modes, eigenvalues, and the discrete modal projection.

The eigenpairs of -d^2/dx^2 on (0, L) with zero boundary values are
lambda_n = (n pi / L)^2 and e_n = sqrt(2/L) sin(n pi x / L).  The discrete
projection onto the first N modes is P = dx * W @ W.T where W samples the
modes on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import MAX_MODE_FRACTION
from .errors import InvalidParameterError, ResolutionError
from .grid import Grid

__all__ = [
    "ModalBasis",
    "ProjectionMatrix",
    "eigenvalue",
    "modal_basis",
    "projection_matrix",
]


def eigenvalue(j: int, length: float) -> float:
    """Dirichlet eigenvalue lambda_j = (j pi / L)^2."""
    if j < 1:
        raise InvalidParameterError(f"mode index must be >= 1, got {j}")
    if length <= 0:
        raise InvalidParameterError(f"domain length must be positive, got {length}")
    return (j * np.pi / length) ** 2


@dataclass(frozen=True)
class ModalBasis:
    """First N sine modes sampled on a grid.

    Attributes
    ----------
    W : ndarray
        N_x x N matrix, column n-1 holds sqrt(2/L) sin(n pi x / L).
    eigenvalues : ndarray
        lambda_1 .. lambda_N.
    """

    grid: Grid
    n_modes: int
    W: np.ndarray = field(init=False, repr=False)
    eigenvalues: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_modes < 1:
            raise InvalidParameterError(f"need at least one mode, got {self.n_modes}")
        if self.n_modes > MAX_MODE_FRACTION * self.grid.nx:
            raise ResolutionError(
                f"{self.n_modes} modes under-resolved on {self.grid.nx} nodes "
                f"(limit {int(MAX_MODE_FRACTION * self.grid.nx)})"
            )
        L = self.grid.length
        n = np.arange(1, self.n_modes + 1)
        W = np.sqrt(2.0 / L) * np.sin(np.outer(self.grid.nodes, n) * np.pi / L)
        lam = (n * np.pi / L) ** 2
        W.flags.writeable = False
        lam.flags.writeable = False
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "eigenvalues", lam)

    def mode(self, n: int) -> np.ndarray:
        """Samples of e_n on the grid, 1-based."""
        if not 1 <= n <= self.n_modes:
            raise InvalidParameterError(f"mode {n} outside 1..{self.n_modes}")
        return self.W[:, n - 1]


def modal_basis(grid: Grid, n_modes: int) -> ModalBasis:
    """Build the modal matrix for the first ``n_modes`` sine modes."""
    return ModalBasis(grid=grid, n_modes=int(n_modes))


@dataclass(frozen=True)
class ProjectionMatrix:
    """Discrete projection P = dx * W @ W.T onto the retained modes."""

    basis: ModalBasis
    matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        P = self.basis.grid.dx * (self.basis.W @ self.basis.W.T)
        # force exact symmetry; BLAS products are not bit-symmetric
        P = np.triu(P) + np.triu(P, 1).T
        P.flags.writeable = False
        object.__setattr__(self, "matrix", P)

    def apply(self, v: np.ndarray) -> np.ndarray:
        v = self.basis.grid.check_vector(v)
        return self.matrix @ v


def projection_matrix(basis: ModalBasis) -> ProjectionMatrix:
    """Assemble the dense projection matrix for a modal basis."""
    return ProjectionMatrix(basis=basis)
