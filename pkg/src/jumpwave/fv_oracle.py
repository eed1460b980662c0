"""Independent first-order upwind finite-volume oracle.

Cross-validation for the exact piecewise-constant solvers: the scheme works
directly in the characteristic variables v = A_inv u of each region, upwinding
every component with its region-local speed.  A face shared by two regions
passes v through unchanged, which is the discrete form of the v-continuity
transmission condition, so the oracle shares the interface semantics of the
exact solution while discretizing it in a completely different way.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CFLViolation, InterfaceNotOnGridFace, ValidationError
from .exact import PiecewiseConstantSystem, solve_generic
from .initial import InitialData
from .solution import SolutionField

# 3-point Gauss-Legendre rule on [-1, 1] for cell-average initialization.
_GAUSS_X = np.array([-np.sqrt(3.0 / 5.0), 0.0, np.sqrt(3.0 / 5.0)])
_GAUSS_W = np.array([5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])


@dataclass(frozen=True)
class FVGrid:
    n_cells: int
    z_min: float
    z_max: float
    dz: float
    centers: np.ndarray
    interface_faces: tuple[int, ...]  # face index of every interface

    def __post_init__(self):
        self.centers.setflags(write=False)


def build_grid(sys: PiecewiseConstantSystem, n_cells: int, domain) -> FVGrid:
    z_min, z_max = float(domain[0]), float(domain[1])
    if not z_max > z_min:
        raise ValidationError("domain must satisfy z_max > z_min")
    if n_cells < 2:
        raise ValidationError("need at least 2 cells")
    dz = (z_max - z_min) / n_cells
    faces = []
    for zl in sys.interfaces:
        k = (zl - z_min) / dz
        if abs(k - round(k)) > 1e-9 or not 0 < round(k) < n_cells:
            raise InterfaceNotOnGridFace(
                f"interface z = {zl} does not land on a cell face of the "
                f"{n_cells}-cell grid on [{z_min}, {z_max}]"
            )
        faces.append(int(round(k)))
    centers = z_min + dz * (np.arange(n_cells) + 0.5)
    return FVGrid(n_cells, z_min, z_max, dz, centers, tuple(faces))


def _initial_cell_averages(sys, u0: InitialData, grid: FVGrid) -> tuple[np.ndarray, np.ndarray]:
    """Cell averages of v = A_inv(region) u0 by 3-point Gauss quadrature."""
    half = grid.dz / 2.0
    nodes = grid.centers[:, None] + half * _GAUSS_X[None, :]
    uvals = u0(nodes.ravel()).reshape(grid.n_cells, 3, sys.n)
    ubar = np.einsum("q,cqn->cn", _GAUSS_W / 2.0, uvals)
    regions = np.array([sys.region_of(z) for z in grid.centers])
    v = np.empty_like(ubar)
    for r in range(sys.m + 1):
        sel = regions == r
        v[sel] = ubar[sel] @ sys.decomps[r].A_inv.T
    return v, regions


def fv_solve(sys: PiecewiseConstantSystem, u0: InitialData, T: float,
             n_cells: int, domain, cfl: float = 0.9) -> SolutionField:
    """March the upwind scheme to t = T and return the field at that time.

    Ghost cells are zero: the domain must be large enough that the data stays
    compactly supported inside it.
    """
    if not 0.0 < cfl <= 1.0:
        raise CFLViolation(f"cfl must lie in (0, 1], got {cfl}")
    if T < 0.0:
        raise ValidationError("T must be nonnegative")
    grid = build_grid(sys, n_cells, domain)
    v, regions = _initial_cell_averages(sys, u0, grid)
    n = sys.n

    lam = np.empty((grid.n_cells, n))
    for r in range(sys.m + 1):
        lam[regions == r] = sys.decomps[r].lambdas
    lam_max = float(np.max(np.abs(lam)))
    if T > 0.0 and lam_max > 0.0:
        n_steps = max(1, int(np.ceil(T * lam_max / (cfl * grid.dz))))
        dt = T / n_steps
        nu = lam * (dt / grid.dz)
        if np.max(np.abs(nu)) > 1.0 + 1e-12:
            raise CFLViolation("computed Courant number exceeds 1")
        pos = np.array(sys.signs) > 0
        for _ in range(n_steps):
            # zero-gradient ghosts: exact for constant states, and identical
            # to zero ghosts while the support stays interior
            padded = np.vstack([v[:1], v, v[-1:]])
            dv_up = v - padded[:-2]    # backward difference (positive speeds)
            dv_dn = padded[2:] - v     # forward difference (negative speeds)
            v = v - nu * np.where(pos[None, :], dv_up, dv_dn)

    u = np.empty_like(v)
    for r in range(sys.m + 1):
        sel = regions == r
        u[sel] = v[sel] @ sys.decomps[r].A.T
    m = sys.m
    utm = np.empty((m, 1, n))
    utp = np.empty((m, 1, n))
    vtm = np.empty((m, 1, n))
    vtp = np.empty((m, 1, n))
    for l, face in enumerate(grid.interface_faces):
        vtm[l, 0] = v[face - 1]
        vtp[l, 0] = v[face]
        utm[l, 0] = sys.decomps[l].A @ v[face - 1]
        utp[l, 0] = sys.decomps[l + 1].A @ v[face]
    return SolutionField(grid.centers.copy(), np.array([T]),
                         u[None, :, :], v[None, :, :], sys.interfaces,
                         utm, utp, vtm, vtp)


@dataclass(frozen=True)
class ConvergenceRow:
    n_cells: int
    dz: float
    l1_error: float


@dataclass(frozen=True)
class ConvergenceTable:
    rows: tuple[ConvergenceRow, ...]
    order: float

    def errors(self) -> np.ndarray:
        return np.array([r.l1_error for r in self.rows])


def l1_error_against_exact(sys, u0, field: SolutionField) -> float:
    """Componentwise L1 distance to the exact solution at the field's time."""
    t = float(field.ts[0])
    dz = float(field.zs[1] - field.zs[0])
    err = 0.0
    for i, z in enumerate(field.zs):
        u_ex = solve_generic(sys, u0, float(z), t)
        err += float(np.sum(np.abs(field.u[0, i] - u_ex))) * dz
    return err


def convergence_study(sys: PiecewiseConstantSystem, u0: InitialData, T: float,
                      n_list, domain, cfl: float = 0.9) -> ConvergenceTable:
    """L1 errors against the exact solver over a grid-refinement ladder."""
    n_list = [int(n) for n in n_list]
    if len(n_list) < 3 or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValidationError("n_list must be ascending with at least 3 entries")
    rows = []
    for n_cells in n_list:
        field = fv_solve(sys, u0, T, n_cells, domain, cfl=cfl)
        dz = (float(domain[1]) - float(domain[0])) / n_cells
        rows.append(ConvergenceRow(n_cells, dz, l1_error_against_exact(sys, u0, field)))
    errs = np.array([r.l1_error for r in rows])
    slope = np.polyfit(np.log([r.n_cells for r in rows]), np.log(np.maximum(errs, 1e-300)), 1)[0]
    return ConvergenceTable(tuple(rows), float(-slope))
