"""The Volterra transform I + Upsilon P_N and its recursive inverse.

``upsilon_matrix`` discretizes the Volterra operator
(Upsilon v)(x) = integral_0^x k(x, y) v(y) dy by the trapezoidal rule.
The forward transform is T = I + Upsilon P_N.  Its inverse is I - Phi_N,
where Phi_N is built by the recursion

    Phi_0 = 0,
    Phi_j u = (I - Phi_{j-1})[Upsilon P_j u]
              - ((I - Phi_{j-1})[Upsilon P_j u], e_j) / (1 + a_j)
                * (I - Phi_{j-1})[Upsilon e_j],

with a_j = ((I - Phi_{j-1})[Upsilon e_j], e_j).  The pair (mu, N) is
admissible when every a_j stays away from -1; otherwise the transform is
not invertible and construction fails.

Two independent realizations of the recursion are provided: a one-time
matrix assembly (``phi_matrix``, used everywhere) and a per-vector
level scheme (``phi_apply_recursive``) that walks the recursion bottom-up
from precomputed operator chains; the two must agree to roundoff.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .constants import ADMISSIBILITY_FLOOR, DEFAULT_KERNEL_TOL, INVERSE_TOL
from .errors import DimensionError, InadmissiblePairError, InvalidParameterError, SolverError
from .grid import Grid, make_grid, trapezoid_weights
from .kernel import Kernel, kernel_table
from .spectral import ModalBasis, ProjectionMatrix, modal_basis, projection_matrix

__all__ = [
    "TransformSet",
    "OperatorNorms",
    "ScanRow",
    "upsilon_matrix",
    "phi_matrix",
    "phi_apply_recursive",
    "build_transform",
    "forward_transform",
    "inverse_transform",
    "scan_admissibility",
    "sign_change_brackets",
    "operator_norms",
]


def upsilon_matrix(kernel: Kernel) -> np.ndarray:
    """Trapezoidal discretization of the Volterra operator.

    Entry (i, j) is 0 above the diagonal, dx/2 * k(x_i, x_i) on it, and
    dx * k(x_i, x_j) below.  The j = 0 column carries k(x_i, 0) = 0, so the
    missing end-weight there is immaterial.
    """
    g = kernel.grid
    U = g.dx * np.tril(kernel.values)
    U[np.diag_indices(g.nx)] *= 0.5
    return U


def _phi_recursion(
    upsilon: np.ndarray,
    basis: ModalBasis,
    floor: float,
    strict: bool,
):
    """Shared core of the inverse recursion.

    Returns (phi, scalars, admissible).  In strict mode an inadmissible
    scalar raises; otherwise the recursion stops there, the remaining
    scalars are NaN and ``admissible`` is False.
    """
    g = basis.grid
    nx = g.nx
    W = basis.W
    wq = trapezoid_weights(g)
    if upsilon.shape != (nx, nx):
        raise DimensionError(
            f"upsilon shape {upsilon.shape} does not match grid ({nx} nodes)"
        )
    UE = upsilon @ W
    phi = np.zeros((nx, nx))
    scalars = np.full(basis.n_modes, np.nan)
    for j in range(1, basis.n_modes + 1):
        B = UE[:, :j] - phi @ UE[:, :j]
        b = B[:, j - 1]
        ej = W[:, j - 1]
        a = float(np.dot(wq * b, ej))
        scalars[j - 1] = a
        if abs(1.0 + a) <= floor:
            if strict:
                raise InadmissiblePairError(j, a, floor)
            return phi, scalars, False
        # Phi_j as a matrix: (I - Phi_{j-1}) Upsilon P_j minus the rank-one
        # correction; columns of B against rows of W give the P_j factor.
        G = g.dx * (B @ W[:, :j].T)
        row = np.dot(wq * ej, G)
        phi = G - np.outer(b, row) / (1.0 + a)
    return phi, scalars, True


def phi_matrix(
    upsilon: np.ndarray,
    basis: ModalBasis,
    floor: float = ADMISSIBILITY_FLOOR,
):
    """Assemble Phi_N as a dense matrix together with the scalars a_1..a_N.

    Raises
    ------
    InadmissiblePairError
        If any |1 + a_j| <= floor.
    """
    phi, scalars, _ = _phi_recursion(upsilon, basis, floor, strict=True)
    return phi, scalars


def phi_apply_recursive(
    upsilon: np.ndarray,
    basis: ModalBasis,
    v: np.ndarray,
    floor: float = ADMISSIBILITY_FLOOR,
) -> np.ndarray:
    """Apply Phi_N to one vector by the bottom-up level scheme.

    The recursion for Phi_N needs Phi_{N-1} applied to two inputs, each of
    which needs Phi_{N-2}, and so on.  Unrolled, the required raw inputs are
    the operator chains

        (Upsilon P_p) (Upsilon P_{p+1}) ... (Upsilon P_N) v
        (Upsilon P_p) ... (Upsilon P_{j-1}) [Upsilon e_j],   p < j <= N,

    which are precomputed right-to-left.  One pass per level p = 1..N then
    advances every still-needed quantity from Phi_{p-1} to Phi_p and
    consumes the e_p chain to form a_p.  Used as a consistency oracle for
    :func:`phi_matrix`; both paths implement the same recursion.
    """
    g = basis.grid
    v = g.check_vector(v)
    W = basis.W
    wq = trapezoid_weights(g)
    N = basis.n_modes
    dx = g.dx

    def up_pj(j: int, vec: np.ndarray) -> np.ndarray:
        # Upsilon P_j vec with P_j the projection on modes 1..j
        coeffs = dx * (W[:, :j].T @ vec)
        return upsilon @ (W[:, :j] @ coeffs)

    # raw chains, indexed by the level at which they are consumed next
    main = v.copy()
    main_chain = [None] * (N + 1)  # main_chain[p] = (U P_p) ... (U P_N) v
    for p in range(N, 0, -1):
        main = up_pj(p, main)
        main_chain[p] = main
    e_chain = {}
    for j in range(2, N + 1):
        c = upsilon @ W[:, j - 1]  # Upsilon e_j
        chain = [None] * j
        for p in range(j - 1, 0, -1):
            c = up_pj(p, c)
            chain[p] = c
        e_chain[j] = chain

    # level p state: M = Phi_p [ (U P_{p+1}) ... (U P_N) v ]
    #                E[j] = Phi_p [ (U P_{p+1}) ... (U P_{j-1}) Upsilon e_j ]
    M = np.zeros(g.nx)
    E = {j: np.zeros(g.nx) for j in range(2, N + 1)}
    for p in range(1, N + 1):
        ep = W[:, p - 1]
        if p == 1:
            bb = upsilon @ ep
        else:
            bb = (upsilon @ ep) - E[p]
        a = float(np.dot(wq * bb, ep))
        if abs(1.0 + a) <= floor:
            raise InadmissiblePairError(p, a, floor)
        def advance(raw: np.ndarray, prev: np.ndarray) -> np.ndarray:
            r = raw - prev
            return r - (np.dot(wq * r, ep) / (1.0 + a)) * bb
        M = advance(main_chain[p], M)
        for j in range(p + 1, N + 1):
            E[j] = advance(e_chain[j][p], E[j])
    return M


@dataclass(frozen=True)
class TransformSet:
    """Discrete transform bundle: Upsilon, P, T = I + Upsilon P, and Phi.

    ``admissibility`` holds the recursion scalars a_1..a_N;
    ``inverse_residual`` is ||(I - Phi) T - I||_inf measured at build time.
    """

    grid: Grid
    mu: float
    nu: float
    basis: ModalBasis
    P: ProjectionMatrix
    upsilon: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    T: np.ndarray = field(repr=False)
    admissibility: np.ndarray
    inverse_residual: float

    @property
    def n_modes(self) -> int:
        return self.basis.n_modes


def build_transform(
    kernel: Kernel,
    n_modes: int,
    floor: float = ADMISSIBILITY_FLOOR,
    inverse_tol: float = INVERSE_TOL,
) -> TransformSet:
    """Build the full transform set from a tabulated kernel.

    Verifies the two-sided inverse identity to ``inverse_tol`` in the
    max norm; failure indicates a near-inadmissible pair or a resolution
    problem and is reported as a solver error.
    """
    g = kernel.grid
    basis = modal_basis(g, n_modes)
    P = projection_matrix(basis)
    U = upsilon_matrix(kernel)
    phi, scalars = phi_matrix(U, basis, floor)
    T = np.eye(g.nx) + U @ P.matrix
    resid = float(
        np.max(np.abs((np.eye(g.nx) - phi) @ T - np.eye(g.nx)))
    )
    if resid > inverse_tol:
        raise SolverError(
            f"inverse identity residual {resid:.3e} exceeds {inverse_tol:.1e}; "
            f"admissibility scalars {scalars}"
        )
    return TransformSet(
        grid=g,
        mu=kernel.mu,
        nu=kernel.nu,
        basis=basis,
        P=P,
        upsilon=U,
        phi=phi,
        T=T,
        admissibility=scalars,
        inverse_residual=resid,
    )


def forward_transform(tset: TransformSet, w: np.ndarray) -> np.ndarray:
    """u = w + Upsilon P_N w."""
    w = tset.grid.check_vector(w)
    return tset.T @ w


def inverse_transform(tset: TransformSet, u: np.ndarray) -> np.ndarray:
    """w = u - Phi_N u."""
    u = tset.grid.check_vector(u)
    return u - tset.phi @ u


@dataclass(frozen=True)
class ScanRow:
    """One admissibility sample: scalars a_1..a_N at a given mu."""

    mu: float
    scalars: tuple
    admissible: bool


def scan_admissibility(
    nu: float,
    length: float,
    n_modes: int,
    mu_range: Sequence[float],
    steps: int,
    nx: int = 200,
    tol: float = DEFAULT_KERNEL_TOL,
    floor: float = ADMISSIBILITY_FLOOR,
) -> list[ScanRow]:
    """Sweep mu over an interval and record the admissibility scalars.

    Inadmissible samples are reported, never raised; past the first
    inadmissible scalar the remaining entries of a row are NaN.
    """
    lo, hi = float(mu_range[0]), float(mu_range[1])
    if steps < 2:
        raise InvalidParameterError(f"need at least 2 scan steps, got {steps}")
    if not (lo < hi):
        raise InvalidParameterError(f"empty scan range ({lo}, {hi})")
    g = make_grid(length, nx)
    basis = modal_basis(g, n_modes)
    rows = []
    for mu in np.linspace(lo, hi, steps):
        kern = kernel_table(g, float(mu), nu, tol)
        U = upsilon_matrix(kern)
        _, scalars, ok = _phi_recursion(U, basis, floor, strict=False)
        rows.append(ScanRow(mu=float(mu), scalars=tuple(scalars), admissible=ok))
    return rows


def sign_change_brackets(rows: Sequence[ScanRow]) -> list[tuple[int, float, float]]:
    """Bracket sign changes of 1 + a_j between consecutive scan samples.

    Returns (j, mu_lo, mu_hi) triples, 1-based j.  A sign change of
    1 + a_j brackets a mu where the transform loses invertibility.
    """
    out = []
    for prev, curr in zip(rows, rows[1:]):
        for j, (ap, ac) in enumerate(zip(prev.scalars, curr.scalars), start=1):
            if np.isnan(ap) or np.isnan(ac):
                continue
            if (1.0 + ap) * (1.0 + ac) < 0.0:
                out.append((j, prev.mu, curr.mu))
    return out


@dataclass(frozen=True)
class OperatorNorms:
    """Discrete operator norms of T and its inverse.

    ``c0`` is the L2 -> L2 norm of the inverse; the H1 -> H1 norms use the
    forward-difference H1 inner product.
    """

    c0: float
    normT_l2: float
    normTinv_h1: float
    normT_h1: float


def _weighted_l2_opnorm(A: np.ndarray, wq: np.ndarray) -> float:
    s = np.sqrt(wq)
    return float(np.linalg.norm((A * s[:, None]) / s[None, :], 2))


def _h1_gram(grid: Grid) -> np.ndarray:
    n = grid.nx
    D = (np.eye(n, k=1) - np.eye(n))[:-1, :] / grid.dx
    return np.diag(trapezoid_weights(grid)) + grid.dx * (D.T @ D)


def _h1_opnorm(A: np.ndarray, S: np.ndarray) -> float:
    vals = scipy.linalg.eigh(A.T @ S @ A, S, eigvals_only=True)
    return float(np.sqrt(max(vals[-1], 0.0)))


def operator_norms(tset: TransformSet) -> OperatorNorms:
    """Norms of T and I - Phi in the discrete L2 and H1 metrics."""
    wq = trapezoid_weights(tset.grid)
    Tinv = np.eye(tset.grid.nx) - tset.phi
    S = _h1_gram(tset.grid)
    return OperatorNorms(
        c0=_weighted_l2_opnorm(Tinv, wq),
        normT_l2=_weighted_l2_opnorm(tset.T, wq),
        normTinv_h1=_h1_opnorm(Tinv, S),
        normT_h1=_h1_opnorm(tset.T, S),
    )
