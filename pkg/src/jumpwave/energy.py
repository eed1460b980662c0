"""Symmetric hyperbolic systems with a plane interface: scheme and monitor.

The problem is B0(x) u_t + sum_j B_j(x) u_{x_j} = f with symmetric B_j,
positive-definite B0, and a coefficient jump across the plane where the last
coordinate vanishes.  `evolve` runs a first-order local Lax-Friedrichs scheme
whose interface faces carry a single-valued flux built from the two one-sided
traces; `energy_monitor` re-derives the per-step energy budget of that scheme
from any trajectory and checks the discounted-energy inequality

    d/dt ( e^{-C_n t} |||u|||^2 ) <= e^{-C_n t} ( ||f||^2 + interface flux ),

with C_n = 1 + dim * C and C the sampled bound on the coefficient matrices
and their one-sided derivatives.  The estimate in this form presumes the
B0 >= c1 I normalization with c1 >= 1 (rescale the system otherwise).

Supported dims: 1 and 2.  The trailing array axis is the state; the last
spatial axis is the interface normal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    AssumptionViolation,
    CFLViolation,
    GridMismatch,
    InterfaceNotOnGridFace,
    ValidationError,
)

SYM_TOL = 1e-12
DEF_CFL = 0.45
MONITOR_K = 10.0
IDENTITY_TOL = 1e-10
TRACE_VANISH_TOL = 1e-14
SEMIDEF_TOL = 1e-12


@dataclass(frozen=True)
class SymmetricSystem:
    """Coefficient evaluators per side of the interface plane.

    B_minus[j] / B_plus[j] evaluate B_j on points (..., dim) -> (..., m, m)
    for j = 0..dim; they must be valid on the closure of their half-space so
    one-sided traces are exact.  `source` maps (points, t) -> (..., m); None
    means f = 0.
    """

    dim: int
    m: int
    B_minus: tuple
    B_plus: tuple
    source: Callable | None = None

    def side_eval(self, j: int, pts: np.ndarray, side: str) -> np.ndarray:
        fn = self.B_minus[j] if side == "minus" else self.B_plus[j]
        out = np.asarray(fn(pts), dtype=float)
        want = pts.shape[:-1] + (self.m, self.m)
        if out.shape != want:
            raise ValidationError(f"B_{j} evaluator returned {out.shape}, expected {want}")
        return out

    def eval_by_side_of_point(self, j: int, pts: np.ndarray) -> np.ndarray:
        """Evaluate B_j with the side determined by the sign of the normal
        coordinate (points must be off the interface plane)."""
        out = np.empty(pts.shape[:-1] + (self.m, self.m))
        neg = pts[..., -1] < 0.0
        if np.any(neg):
            out[neg] = self.side_eval(j, pts[neg], "minus")
        if np.any(~neg):
            out[~neg] = self.side_eval(j, pts[~neg], "plus")
        return out

    def f_at(self, pts: np.ndarray, t: float) -> np.ndarray:
        if self.source is None:
            return np.zeros(pts.shape[:-1] + (self.m,))
        out = np.asarray(self.source(pts, t), dtype=float)
        want = pts.shape[:-1] + (self.m,)
        if out.shape != want:
            raise ValidationError(f"source returned {out.shape}, expected {want}")
        return out


def symmetric_system(dim: int, m: int, B_minus, B_plus, source=None) -> SymmetricSystem:
    if dim not in (1, 2):
        raise ValidationError("supported space dimensions are 1 and 2")
    B_minus, B_plus = tuple(B_minus), tuple(B_plus)
    if len(B_minus) != dim + 1 or len(B_plus) != dim + 1:
        raise ValidationError(f"need {dim + 1} evaluators (B_0 .. B_{dim}) per side")
    return SymmetricSystem(dim, m, B_minus, B_plus, source)


def acoustic_layered(c_minus: float, c_plus: float, source=None) -> SymmetricSystem:
    """Layered-medium acoustic system in 2 space dimensions, state (v_x, v_z, v_t).

    B0 = diag(c^2, c^2, 1) with the off-diagonal -c^2 blocks in B1, B2; the
    sound speed c jumps across the plane z = 0 (the last coordinate).
    """
    if c_minus <= 0 or c_plus <= 0:
        raise ValidationError("sound speeds must be positive")

    def maker(c2):
        def B0(pts):
            out = np.zeros(pts.shape[:-1] + (3, 3))
            out[..., 0, 0] = c2
            out[..., 1, 1] = c2
            out[..., 2, 2] = 1.0
            return out

        def B1(pts):
            out = np.zeros(pts.shape[:-1] + (3, 3))
            out[..., 0, 2] = -c2
            out[..., 2, 0] = -c2
            return out

        def B2(pts):
            out = np.zeros(pts.shape[:-1] + (3, 3))
            out[..., 1, 2] = -c2
            out[..., 2, 1] = -c2
            return out

        return (B0, B1, B2)

    return symmetric_system(2, 3, maker(c_minus ** 2), maker(c_plus ** 2), source)


@dataclass(frozen=True)
class Grid:
    """Tensor cell grid; the interface plane must land on a face of the last axis."""

    dim: int
    bounds: tuple
    cells: tuple
    dx: tuple
    axes: tuple           # cell-center coordinates per axis
    iface_face: int       # face index of the interface along the last axis

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.dx))

    def centers(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1)


def build_grid(bounds, cells) -> Grid:
    bounds = tuple((float(a), float(b)) for a, b in bounds)
    cells = tuple(int(n) for n in cells)
    dim = len(bounds)
    if dim not in (1, 2) or len(cells) != dim:
        raise ValidationError("bounds/cells must describe 1 or 2 dimensions")
    if any(n < 4 for n in cells):
        raise ValidationError("need at least 4 cells per direction")
    if any(b <= a for a, b in bounds):
        raise ValidationError("empty grid extent")
    dx = tuple((b - a) / n for (a, b), n in zip(bounds, cells))
    lo, hi = bounds[-1]
    k = (0.0 - lo) / dx[-1]
    if abs(k - round(k)) > 1e-9 or not 0 < round(k) < cells[-1]:
        raise InterfaceNotOnGridFace(
            f"interface plane 0 is not a face of the last axis ({lo}..{hi}, "
            f"{cells[-1]} cells)"
        )
    axes = tuple(a + d * (np.arange(n) + 0.5)
                 for (a, _), d, n in zip(bounds, dx, cells))
    return Grid(dim, bounds, cells, dx, axes, int(round(k)))


@dataclass(frozen=True)
class Assumptions:
    c1: float
    c2: float
    coeff_bound: float     # C: sup of ||B_j|| and one-sided j-derivatives
    discount_rate: float   # C_n = 1 + dim * C


def _spectral_norms(M: np.ndarray) -> np.ndarray:
    # symmetric blocks: largest |eigenvalue|
    w = np.linalg.eigvalsh(M)
    return np.max(np.abs(w), axis=-1)


def validate_assumptions(sys: SymmetricSystem, grid: Grid) -> Assumptions:
    """Sample the grid for positivity of B0, symmetry of every B_j, and the
    uniform coefficient bound; raises AssumptionViolation on failure."""
    pts = grid.centers()
    flat = pts.reshape(-1, grid.dim)
    c1, c2 = np.inf, 0.0
    bound = 0.0
    for j in range(sys.dim + 1):
        M = sys.eval_by_side_of_point(j, flat)
        asym = np.max(np.abs(M - np.swapaxes(M, -1, -2)))
        if asym > SYM_TOL * (1.0 + np.max(np.abs(M))):
            raise AssumptionViolation("A2", f"B_{j} is not symmetric (max asym {asym:.2e})")
        if j == 0:
            w = np.linalg.eigvalsh(M)
            c1 = min(c1, float(w.min()))
            c2 = max(c2, float(w.max()))
            if c1 <= 0:
                raise AssumptionViolation("A1", f"B_0 not positive definite (min eig {c1:.2e})")
        else:
            bound = max(bound, float(_spectral_norms(M).max()))
            # one-sided derivative along the j-th coordinate
            h = 1e-6 * max(1.0, float(np.max(np.abs(flat))))
            shift = np.zeros(grid.dim)
            shift[j - 1] = h
            for side, fn in (("minus", None), ("plus", None)):
                sel = flat[:, -1] < 0 if side == "minus" else flat[:, -1] >= 0
                if not np.any(sel):
                    continue
                p = flat[sel]
                d = (sys.side_eval(j, p + shift, side)
                     - sys.side_eval(j, p - shift, side)) / (2 * h)
                bound = max(bound, float(_spectral_norms(0.5 * (d + np.swapaxes(d, -1, -2))).max()))
    if not np.isfinite(bound):
        raise AssumptionViolation("A3", "coefficient bound is not finite")
    return Assumptions(c1, c2, bound, 1.0 + sys.dim * bound)


# --- scheme ------------------------------------------------------------------------


def _face_points(grid: Grid, d: int) -> np.ndarray:
    """Coordinates of the interior+boundary faces orthogonal to axis d."""
    axes = list(grid.axes)
    lo, _ = grid.bounds[d]
    axes[d] = lo + grid.dx[d] * np.arange(grid.cells[d] + 1)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1)


@dataclass(frozen=True)
class _SchemeOps:
    """Precomputed arrays the update and the monitor share."""

    B0: np.ndarray
    B0_inv: np.ndarray
    face_BL: tuple      # per direction: B_d at faces, evaluated from the left cell's side
    face_BR: tuple
    face_B0bar: tuple   # per direction: averaged B0 at faces
    face_speed: tuple   # per direction: dissipation speed at faces
    max_speed: float


def _pad_edge(arr: np.ndarray, axis: int) -> np.ndarray:
    widths = [(0, 0)] * arr.ndim
    widths[axis] = (1, 1)
    return np.pad(arr, widths, mode="edge")


def build_scheme_ops(sys: SymmetricSystem, grid: Grid) -> _SchemeOps:
    pts = grid.centers()
    B0 = sys.eval_by_side_of_point(0, pts)
    B0_inv = np.linalg.inv(B0)
    face_BL, face_BR, face_B0bar, face_speed = [], [], [], []
    max_speed = 0.0
    for d in range(grid.dim):
        fpts = _face_points(grid, d)
        if d == grid.dim - 1:
            # faces of the normal direction: the interface face takes its two
            # one-sided traces, plain faces the side they sit in
            BL = np.empty(fpts.shape[:-1] + (sys.m, sys.m))
            BR = np.empty_like(BL)
            normal = fpts[..., -1]
            minus = normal < 0.0
            plus = normal > 0.0
            iface = normal == 0.0
            for arr in (BL, BR):
                if np.any(minus):
                    arr[minus] = sys.side_eval(d + 1, fpts[minus], "minus")
                if np.any(plus):
                    arr[plus] = sys.side_eval(d + 1, fpts[plus], "plus")
            if np.any(iface):
                BL[iface] = sys.side_eval(d + 1, fpts[iface], "minus")
                BR[iface] = sys.side_eval(d + 1, fpts[iface], "plus")
        else:
            BL = sys.eval_by_side_of_point(d + 1, fpts)
            BR = BL
        face_BL.append(BL)
        face_BR.append(BR)

        # dissipation speed: spectral radius of B0^{-1} B_d per cell, maxed
        # over the face's neighbors
        Bd_cell = sys.eval_by_side_of_point(d + 1, pts)
        rho = np.max(np.abs(np.linalg.eigvals(B0_inv @ Bd_cell)), axis=-1)
        max_speed = max(max_speed, float(rho.max()))
        rho_pad = _pad_edge(rho, d)
        sl_lo = [slice(None)] * grid.dim
        sl_hi = [slice(None)] * grid.dim
        sl_lo[d] = slice(0, -1)
        sl_hi[d] = slice(1, None)
        face_speed.append(np.maximum(rho_pad[tuple(sl_lo)], rho_pad[tuple(sl_hi)]))

        B0_pad = _pad_edge(B0, d)
        face_B0bar.append(0.5 * (B0_pad[tuple(sl_lo)] + B0_pad[tuple(sl_hi)]))
    return _SchemeOps(B0, B0_inv, tuple(face_BL), tuple(face_BR),
                      tuple(face_B0bar), tuple(face_speed), max_speed)


def _fluxes(ops: _SchemeOps, grid: Grid, u: np.ndarray, d: int,
            swap_interface: bool = False) -> np.ndarray:
    """Single-valued face fluxes along direction d with zero exterior ghosts."""
    widths = [(0, 0)] * u.ndim
    widths[d] = (1, 1)
    up = np.pad(u, widths, mode="constant")
    sl_lo = [slice(None)] * u.ndim
    sl_hi = [slice(None)] * u.ndim
    sl_lo[d] = slice(0, -1)
    sl_hi[d] = slice(1, None)
    uL = up[tuple(sl_lo)]
    uR = up[tuple(sl_hi)]
    if swap_interface and d == grid.dim - 1:
        p = grid.iface_face
        idx = [slice(None)] * u.ndim
        idx[d] = p
        idx = tuple(idx)
        uL, uR = uL.copy(), uR.copy()
        uL[idx], uR[idx] = uR[idx].copy(), uL[idx].copy()
    central = 0.5 * (np.einsum("...ij,...j->...i", ops.face_BL[d], uL)
                     + np.einsum("...ij,...j->...i", ops.face_BR[d], uR))
    jump = np.einsum("...ij,...j->...i", ops.face_B0bar[d], uR - uL)
    return central - 0.5 * ops.face_speed[d][..., None] * jump


def _rhs(sys: SymmetricSystem, ops: _SchemeOps, grid: Grid, u: np.ndarray,
         t: float, pts: np.ndarray, swap_interface: bool = False) -> np.ndarray:
    acc = sys.f_at(pts, t)
    for d in range(grid.dim):
        F = _fluxes(ops, grid, u, d, swap_interface=swap_interface)
        sl_lo = [slice(None)] * u.ndim
        sl_hi = [slice(None)] * u.ndim
        sl_lo[d] = slice(0, -1)
        sl_hi[d] = slice(1, None)
        acc = acc - (F[tuple(sl_hi)] - F[tuple(sl_lo)]) / grid.dx[d]
    return np.einsum("...ij,...j->...i", ops.B0_inv, acc)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray   # (nt, *cells, m)
    grid: Grid
    swap_interface: bool = False

    def __post_init__(self):
        self.times.setflags(write=False)
        self.states.setflags(write=False)


def stable_dt(sys: SymmetricSystem, grid: Grid, assumptions: Assumptions,
              ops: _SchemeOps, cfl: float) -> float:
    return cfl * min(grid.dx) * assumptions.c1 / (sys.dim * ops.max_speed)


def evolve(sys: SymmetricSystem, u0_fn, T: float, grid: Grid, cfl: float = DEF_CFL,
            dt: float | None = None, swap_interface_traces: bool = False,
            monitor_K: float = MONITOR_K):
    """March to t = T and return (Trajectory, EnergyReport).

    `swap_interface_traces` deliberately exchanges the two one-sided states in
    the interface flux (a wrong coupling that produces energy there); it exists
    as a negative control for the monitor.
    """
    if not 0.0 < cfl <= 1.0:
        raise CFLViolation(f"cfl must lie in (0, 1], got {cfl}")
    assumptions = validate_assumptions(sys, grid)
    ops = build_scheme_ops(sys, grid)
    dt_max = stable_dt(sys, grid, assumptions, ops, cfl)
    if dt is None:
        n_steps = max(1, int(np.ceil(T / dt_max)))
        dt = T / n_steps
    else:
        if dt > dt_max * (1 + 1e-12):
            raise CFLViolation(f"dt = {dt} exceeds the stability limit {dt_max:.3e}")
        n_steps = max(1, int(np.ceil(T / dt)))
        dt = T / n_steps
    pts = grid.centers()
    u = np.asarray(u0_fn(pts), dtype=float)
    if u.shape != pts.shape[:-1] + (sys.m,):
        raise ValidationError("initial data shape does not match the grid")
    states = np.empty((n_steps + 1,) + u.shape)
    states[0] = u
    times = dt * np.arange(n_steps + 1)
    for k in range(n_steps):
        u = u + dt * _rhs(sys, ops, grid, u, float(times[k]), pts,
                          swap_interface=swap_interface_traces)
        states[k + 1] = u
    traj = Trajectory(times, states, grid, swap_interface_traces)
    report = energy_monitor(traj, sys, K=monitor_K,
                            assumptions=assumptions, ops=ops)
    return traj, report


# --- scalar diagnostics -------------------------------------------------------------


def energy_norm(u: np.ndarray, sys: SymmetricSystem, grid: Grid,
                ops: _SchemeOps | None = None) -> float:
    """|||u||| = sqrt of the midpoint quadrature of (B0 u, u)."""
    return float(np.sqrt(energy_norm_sq(u, sys, grid, ops)))


def energy_norm_sq(u: np.ndarray, sys: SymmetricSystem, grid: Grid,
                   ops: _SchemeOps | None = None) -> float:
    want = tuple(grid.cells) + (sys.m,)
    if u.shape != want:
        raise GridMismatch(f"field shape {u.shape} does not match grid {want}")
    B0 = ops.B0 if ops is not None else sys.eval_by_side_of_point(0, grid.centers())
    quad = np.einsum("...i,...ij,...j->...", u, B0, u)
    return float(np.sum(quad) * grid.cell_volume)


def _traces(grid: Grid, u: np.ndarray):
    p = grid.iface_face
    sl_m = [slice(None)] * (grid.dim + 1)
    sl_p = [slice(None)] * (grid.dim + 1)
    sl_m[grid.dim - 1] = p - 1
    sl_p[grid.dim - 1] = p
    return u[tuple(sl_m)], u[tuple(sl_p)]


def _iface_points(grid: Grid) -> np.ndarray:
    axes = [ax for ax in grid.axes[:-1]] + [np.array([0.0])]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack(mesh, axis=-1)
    return pts[..., 0, :] if grid.dim == 2 else pts[0]


def _transverse_weight(grid: Grid) -> float:
    return float(np.prod(grid.dx[:-1])) if grid.dim > 1 else 1.0


def interface_condition_residual(u: np.ndarray, sys: SymmetricSystem, grid: Grid) -> float:
    """L2-over-the-interface norm of B_n(0+) u(0+) - B_n(0-) u(0-)."""
    want = tuple(grid.cells) + (sys.m,)
    if u.shape != want:
        raise GridMismatch(f"field shape {u.shape} does not match grid {want}")
    um, up = _traces(grid, u)
    pts = _iface_points(grid)
    Bm = sys.side_eval(sys.dim, pts, "minus")
    Bp = sys.side_eval(sys.dim, pts, "plus")
    diff = (np.einsum("...ij,...j->...i", Bp, up)
            - np.einsum("...ij,...j->...i", Bm, um))
    return float(np.sqrt(np.sum(diff ** 2) * _transverse_weight(grid)))


def interface_flux_bracket(u: np.ndarray, sys: SymmetricSystem, grid: Grid) -> float:
    """Integral over the interface of (B_n u, u)(0+) - (B_n u, u)(0-)."""
    um, up = _traces(grid, u)
    pts = _iface_points(grid)
    Bm = sys.side_eval(sys.dim, pts, "minus")
    Bp = sys.side_eval(sys.dim, pts, "plus")
    val = (np.einsum("...i,...ij,...j->...", up, Bp, up)
           - np.einsum("...i,...ij,...j->...", um, Bm, um))
    return float(np.sum(val) * _transverse_weight(grid))


def interface_flux_crossed(u: np.ndarray, sys: SymmetricSystem, grid: Grid) -> float:
    """The scheme-exact interface term (w-, u+) - (w+, u-), w+- = B_n(0+-) u(0+-).

    Coincides with the plain bracket whenever the flux-matching condition
    B_n(0+) u(0+) = B_n(0-) u(0-) holds.
    """
    um, up = _traces(grid, u)
    pts = _iface_points(grid)
    Bm = sys.side_eval(sys.dim, pts, "minus")
    Bp = sys.side_eval(sys.dim, pts, "plus")
    wm = np.einsum("...ij,...j->...i", Bm, um)
    wp = np.einsum("...ij,...j->...i", Bp, up)
    val = np.sum(wm * up, axis=-1) - np.sum(wp * um, axis=-1)
    return float(np.sum(val) * _transverse_weight(grid))


@dataclass(frozen=True)
class SufficiencyFlags:
    trace_vanishing: bool
    semidefinite: bool      # B_n(0+) <= 0 and B_n(0-) >= 0 at sampled points

    @property
    def holds(self) -> bool:
        return self.trace_vanishing or self.semidefinite


def check_sufficiency(sys: SymmetricSystem, u: np.ndarray, grid: Grid,
                      scale: float = 1.0) -> SufficiencyFlags:
    """Which disjunct of the sign condition holds: vanishing traces, or
    semidefiniteness of the one-sided normal coefficients."""
    um, up = _traces(grid, u)
    tr_sq = (np.sum(um ** 2) + np.sum(up ** 2)) * _transverse_weight(grid)
    vanish = bool(tr_sq <= TRACE_VANISH_TOL * max(1.0, scale))
    pts = _iface_points(grid)
    wm = np.linalg.eigvalsh(sys.side_eval(sys.dim, pts, "minus"))
    wp = np.linalg.eigvalsh(sys.side_eval(sys.dim, pts, "plus"))
    semidef = bool(np.all(wp <= SEMIDEF_TOL) and np.all(wm >= -SEMIDEF_TOL))
    return SufficiencyFlags(vanish, semidef)


# --- monitor ------------------------------------------------------------------------


@dataclass
class EnergyReport:
    times: np.ndarray
    energy: np.ndarray             # |||u(t)|||^2
    discounted: np.ndarray         # e^{-C_n t} |||u(t)|||^2
    interface_flux: np.ndarray     # bracket form, per time
    crossed_flux: np.ndarray       # scheme-exact form, per time
    interface_residual: np.ndarray
    sufficiency: np.ndarray        # bool per time
    source_sq: np.ndarray          # ||f(t)||^2_{L2}
    source_work: np.ndarray        # per step
    interior: np.ndarray           # per step: predicted change - source - interface
    unexplained: np.ndarray        # per step: actual change - scheme-predicted change
    lemma_margin: np.ndarray       # per step: rhs + slack - lhs of the estimate
    slack_rate: float
    K: float
    constants: Assumptions
    identity_ok: bool
    lemma_ok: bool
    flagged_decay_ok: bool
    fitted_ct: float | None

    @property
    def verdict(self) -> str:
        return "PASS" if (self.identity_ok and self.lemma_ok and self.flagged_decay_ok) else "FAIL"


def energy_monitor(traj: Trajectory, sys: SymmetricSystem, K: float = MONITOR_K,
                   assumptions: Assumptions | None = None,
                   ops: _SchemeOps | None = None) -> EnergyReport:
    """Audit a trajectory against the reference scheme's energy budget.

    Three per-step checks make the verdict: (a) the energy change is explained
    by the reference scheme's own step from the same state (catches wrong
    interface couplings, which show up as unexplained production); (b) the
    discounted-energy estimate with the measured interface term; (c) on steps
    where the sufficiency flags hold, the discounted energy does not grow
    beyond slack.  Slack is K (dt + dx) (initial energy + source energy).
    """
    grid = traj.grid
    if assumptions is None:
        assumptions = validate_assumptions(sys, grid)
    if ops is None:
        ops = build_scheme_ops(sys, grid)
    pts = grid.centers()
    times = traj.times
    nt = times.size
    dts = np.diff(times)
    cn = assumptions.discount_rate

    energy = np.array([energy_norm_sq(traj.states[k], sys, grid, ops) for k in range(nt)])
    discounted = np.exp(-cn * times) * energy
    bracket = np.array([interface_flux_bracket(traj.states[k], sys, grid) for k in range(nt)])
    crossed = np.array([interface_flux_crossed(traj.states[k], sys, grid) for k in range(nt)])
    resid = np.array([interface_condition_residual(traj.states[k], sys, grid) for k in range(nt)])
    source_sq = np.empty(nt)
    for k in range(nt):
        fv = sys.f_at(pts, float(times[k]))
        source_sq[k] = float(np.sum(fv ** 2) * grid.cell_volume)
    suff = np.array([check_sufficiency(sys, traj.states[k], grid,
                                       scale=max(energy[0], 1.0)).holds
                     for k in range(nt)])

    scale = energy[0] + float(np.sum(source_sq[:-1] * dts)) if nt > 1 else energy[0]
    scale = max(scale, 1e-300)
    dxs = min(grid.dx)
    dt_ref = float(dts.max()) if nt > 1 else 0.0
    slack_rate = K * (dt_ref + dxs) * scale

    source_work = np.zeros(max(nt - 1, 0))
    interior = np.zeros(max(nt - 1, 0))
    unexplained = np.zeros(max(nt - 1, 0))
    lemma_margin = np.zeros(max(nt - 1, 0))
    identity_ok = True
    lemma_ok = True
    flagged_ok = True
    vol = grid.cell_volume
    for k in range(nt - 1):
        dt = float(dts[k])
        u_k = traj.states[k]
        u_pred = u_k + dt * _rhs(sys, ops, grid, u_k, float(times[k]), pts)
        e_pred = energy_norm_sq(u_pred, sys, grid, ops)
        fv = sys.f_at(pts, float(times[k]))
        source_work[k] = 2.0 * dt * float(np.sum(u_k * fv) * vol)
        interior[k] = (e_pred - energy[k]) - source_work[k] - dt * crossed[k]
        unexplained[k] = energy[k + 1] - e_pred
        if unexplained[k] > slack_rate * dt + IDENTITY_TOL * scale:
            identity_ok = False
        lhs = (discounted[k + 1] - discounted[k]) / dt
        rhs = np.exp(-cn * times[k]) * (source_sq[k] + crossed[k]) + slack_rate
        lemma_margin[k] = rhs - lhs
        if lhs > rhs:
            lemma_ok = False
        if suff[k] and suff[k + 1]:
            if discounted[k + 1] - discounted[k] > dt * (
                    np.exp(-cn * times[k]) * source_sq[k] + slack_rate):
                flagged_ok = False

    fitted_ct = None
    if nt > 1 and np.all(crossed[:-1] <= SEMIDEF_TOL * scale):
        f_total = float(np.sum(source_sq[:-1] * dts))
        if f_total > 0:
            fitted_ct = float(np.max(energy) / f_total)

    return EnergyReport(times.copy(), energy, discounted, bracket, crossed, resid,
                        suff, source_sq, source_work, interior, unexplained,
                        lemma_margin, slack_rate, K, assumptions,
                        identity_ok, lemma_ok, flagged_ok, fitted_ct)
