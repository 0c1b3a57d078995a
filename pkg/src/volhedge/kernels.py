"""Discrete kernel operators: lower-triangular factorization of the grid
covariance, the adjoint K*, its inverse, and martingale/noise transfer.

Conventions
-----------
A grid has points 0 = t_0 < t_1 < ... < t_n = T.  Noise values live on
t_1..t_n (X_0 = 0 always).  The matrix ``L`` maps unit-variance innovations
``zeta`` to noise *levels*: X_{t_i} = sum_{j<=i} L[i, j] zeta_j.  Column j
carries the fundamental-martingale increment over (t_{j-1}, t_j], with
bracket increment dm_j, so the kernel values are A[i, j] = L[i, j]/sqrt(dm_j)
and the adjoint acts through the row-differenced matrix B = diff(A).
"""

from __future__ import annotations

import csv
import re
import threading
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import LinAlgError, cholesky as scipy_cholesky, solve_triangular

from .errors import NotPositiveDefiniteError, SingularKernelError
from .models import NoiseModel, analytic_kernel_K, covariance, _mg_kernel_values

__all__ = [
    "TimeGrid",
    "DiscreteKernel",
    "build_kernel",
    "apply_Kstar",
    "solve_Kstar",
    "recover_innovations",
    "reconstruct_noise",
    "dump_kernel_csv",
]

_CELL_ORDER = 32


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing time points starting at 0 and ending at T."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or len(pts) < 2:
            raise ValueError("grid needs at least 2 points")
        if pts[0] != 0.0:
            raise ValueError("grid must start at 0")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")

    @classmethod
    def uniform(cls, T: float, n: int) -> "TimeGrid":
        return cls(np.linspace(0.0, T, n + 1))

    @property
    def T(self) -> float:
        return float(self.points[-1])

    @property
    def n(self) -> int:
        """Number of steps (= number of innovation columns)."""
        return len(self.points) - 1

    @property
    def times(self) -> np.ndarray:
        """Interior + terminal times t_1..t_n."""
        return self.points[1:]

    @property
    def dt(self) -> np.ndarray:
        return np.diff(self.points)


@dataclass(eq=False)
class DiscreteKernel:
    """Immutable-by-convention discrete representation of K on a grid."""

    grid: TimeGrid
    L: np.ndarray
    sqrt_dm: np.ndarray
    source: str  # "analytic-quadrature" | "numerical-cholesky"
    R_grid: np.ndarray  # exact grid covariance R(t_i, t_j), i,j = 1..n
    model: NoiseModel | None = None
    jitter: float = 0.0
    _psi_cache: dict = field(default_factory=dict, repr=False)
    _psi_lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @cached_property
    def A(self) -> np.ndarray:
        """Kernel values per column, A[i, j] = L[i, j] / sqrt(dm_j)."""
        return self.L / self.sqrt_dm[None, :]

    @cached_property
    def B(self) -> np.ndarray:
        """Row-differenced kernel values; B^T is the discrete adjoint K*."""
        A = self.A
        B = A.copy()
        B[1:] -= A[:-1]
        return B

    @property
    def n(self) -> int:
        return self.grid.n


def _analytic_fbm_L(model: NoiseModel, grid: TimeGrid) -> np.ndarray:
    """Cell-RMS discretization of the Molchan--Golosov kernel.

    L[i, j]^2 = int over cell j of K(t_i, u)^2 du, which makes the diagonal
    of L L^T exactly R(t_i, t_i) up to quadrature error.  The first cell is
    evaluated under the substitution u = w^{1/(2-2H)} that removes the
    u^{1-2H} prefactor singularity at u = 0.
    """
    h = model.hurst
    n = grid.n
    times = grid.times
    nodes, weights = leggauss(_CELL_ORDER)
    L = np.zeros((n, n))
    for j in range(n):
        a, b = grid.points[j], grid.points[j + 1]
        if j == 0:
            p0 = 1.0 / (2.0 - 2.0 * h)
            wmax = b ** (1.0 / p0)
            w = 0.5 * (nodes + 1.0) * wmax
            u = w ** p0
            jac = 0.5 * wmax * p0 * w ** (p0 - 1.0)
        else:
            u = a + 0.5 * (nodes + 1.0) * (b - a)
            jac = np.full_like(u, 0.5 * (b - a))
        K = _mg_kernel_values(h, times[j:, None], u[None, :])
        L[j:, j] = np.sqrt(np.clip((K ** 2 * (weights * jac)).sum(axis=1), 0.0, None))
    return L


def build_kernel(model: NoiseModel, grid: TimeGrid, source: str = "auto") -> DiscreteKernel:
    """Factorize the model on the grid.

    ``source="auto"`` picks the analytic quadrature kernel when the model has
    one and Cholesky otherwise.  Cholesky escalates a diagonal jitter of
    1e-12 * max(diag) by factors of 10, at most 3 times, before failing.
    """
    if source == "auto":
        source = "analytic" if model.has_analytic_kernel else "cholesky"
    times = grid.times
    R = np.asarray(covariance(model, times[:, None], times[None, :]), dtype=float)
    R = 0.5 * (R + R.T)

    if source == "analytic":
        if model.kind == "bm" or (model.kind == "fbm" and model.hurst == 0.5):
            L = np.tril(np.tile(np.sqrt(grid.dt), (grid.n, 1)))
        else:
            L = _analytic_fbm_L(model, grid)
        dm = np.asarray(model.bracket_m(grid.points), dtype=float)
        sqrt_dm = np.sqrt(np.diff(dm))
        return DiscreteKernel(
            grid=grid, L=L, sqrt_dm=sqrt_dm, source="analytic-quadrature",
            R_grid=R, model=model,
        )

    if source != "cholesky":
        raise ValueError(f"unknown kernel source {source!r}")

    base = 1e-12 * float(np.max(np.diag(R)))
    last_err = None
    for jitter in (0.0, base, 10.0 * base, 100.0 * base, 1000.0 * base):
        try:
            L = scipy_cholesky(R + jitter * np.eye(grid.n), lower=True)
        except LinAlgError as err:
            last_err = err
            continue
        return DiscreteKernel(
            grid=grid, L=L, sqrt_dm=np.diag(L).copy(),
            source="numerical-cholesky", R_grid=R, model=model, jitter=jitter,
        )
    # scipy reports the offending leading minor, e.g. "2-th leading minor"
    msg = str(last_err)
    m = re.search(r"(\d+)", msg)
    minor = int(m.group(1)) if m else None
    raise NotPositiveDefiniteError(
        f"grid covariance not positive definite after maximum jitter "
        f"({1000.0 * base:g}): {msg}", minor_index=minor,
    )


# ---------------------------------------------------------------------------
# operator actions
# ---------------------------------------------------------------------------

def apply_Kstar(kernel: DiscreteKernel, f: np.ndarray) -> np.ndarray:
    """Discrete adjoint K* acting on a grid function f(t_1..t_n).

    (K* f)_j = sum_{i >= j} f(t_i) [A(t_i, col_j) - A(t_{i-1}, col_j)], the
    telescoped increment form, exact for step functions.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != (kernel.n,):
        raise ValueError(f"expected grid function of length {kernel.n}, got {f.shape}")
    return kernel.B.T @ f


def solve_Kstar(kernel: DiscreteKernel, target: np.ndarray) -> np.ndarray:
    """Solve apply_Kstar(f) = target by an upper-triangular solve.

    ``target`` may be shorter than the grid, in which case the solve is
    restricted to the leading block (used for prediction weights on [0, u)).
    """
    target = np.asarray(target, dtype=float)
    m = len(target)
    if m > kernel.n:
        raise ValueError("target longer than the grid")
    if m == 0:
        return np.zeros(0)
    diag = np.diag(kernel.B)[:m]
    bad = np.nonzero(np.abs(diag) < 1e-14)[0]
    if len(bad):
        raise SingularKernelError(
            f"zero diagonal pivot in K* solve at column {bad[0] + 1}", index=int(bad[0] + 1)
        )
    return solve_triangular(kernel.B[:m, :m].T, target, lower=False)


def _strip_origin(kernel: DiscreteKernel, x_path: np.ndarray) -> np.ndarray:
    x_path = np.asarray(x_path, dtype=float)
    if x_path.shape[-1] == kernel.n + 1:
        return x_path[..., 1:]
    if x_path.shape[-1] == kernel.n:
        return x_path
    raise ValueError(
        f"path length {x_path.shape[-1]} does not match grid ({kernel.n} steps)"
    )


def recover_innovations(kernel: DiscreteKernel, x_path: np.ndarray) -> np.ndarray:
    """Solve L zeta = X (levels) for the unit-variance innovations zeta."""
    x = _strip_origin(kernel, x_path)
    diag = np.diag(kernel.L)
    bad = np.nonzero(np.abs(diag) < 1e-300)[0]
    if len(bad):
        raise SingularKernelError(
            f"singular kernel diagonal at column {bad[0] + 1}", index=int(bad[0] + 1)
        )
    return solve_triangular(kernel.L, x, lower=True)


def reconstruct_noise(kernel: DiscreteKernel, innovations: np.ndarray) -> np.ndarray:
    """X = L zeta, returned on the full grid including X_0 = 0."""
    zeta = np.asarray(innovations, dtype=float)
    if zeta.shape != (kernel.n,):
        raise ValueError(f"expected {kernel.n} innovations, got {zeta.shape}")
    return np.concatenate([[0.0], kernel.L @ zeta])


def dump_kernel_csv(kernel: DiscreteKernel, directory) -> None:
    """Debug dump of L and the grid covariance as CSV files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, mat in (("kernel_L.csv", kernel.L), ("kernel_R_grid.csv", kernel.R_grid)):
        with open(directory / name, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"t_{i+1}" for i in range(kernel.n)])
            for row in mat:
                writer.writerow([repr(float(v)) for v in row])
