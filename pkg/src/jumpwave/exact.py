"""Point-value solutions of u_t + B(z) u_z = 0 for piecewise-constant B.

Each characteristic component v_j = (A_inv u)_j rides its own speed
lambda_j(region); the value at (z, t) is the initial v-data at the foot of
the backward characteristic, with the foot assembled from affine pieces that
refract at every interface.  For one and two interfaces the feet are written
out in closed form; `solve_generic` routes any interface count through the
characteristic tracer.  Both recipes keep v continuous across the interfaces,
which is the transmission condition the library verifies.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import tracer
from .errors import MixedSignFamily, ValidationError, ZeroSpeed
from .fields import CoefficientField, SpeedField, region_index
from .initial import InitialData
from .solution import SolutionField
from .spectral import SpectralDecomposition, decompose

ZERO_SPEED_FACTOR = 1e-13
SEAM_TOL = 1e-12


@dataclass(frozen=True)
class PiecewiseConstantSystem:
    """Region matrices B_0 .. B_m (left to right) with their decompositions."""

    n: int
    interfaces: tuple[float, ...]
    matrices: tuple[np.ndarray, ...]
    decomps: tuple[SpectralDecomposition, ...]
    signs: tuple[int, ...]  # sign of each characteristic family, shared by all regions

    @property
    def m(self) -> int:
        return len(self.interfaces)

    def region_of(self, z: float, side=None) -> int:
        return region_index(self.interfaces, z, side)

    def field(self) -> CoefficientField:
        return CoefficientField.from_matrices(self.matrices, self.interfaces)

    def speed_field(self, j: int) -> SpeedField:
        return SpeedField(self.interfaces, values=[d.lambdas[j] for d in self.decomps])

    def max_speed(self) -> float:
        return max(float(np.max(np.abs(d.lambdas))) for d in self.decomps)


def piecewise_constant_system(matrices, interfaces=()) -> PiecewiseConstantSystem:
    """Validate and decompose the region matrices.

    Every region must be strictly hyperbolic with speeds bounded away from
    zero, and each characteristic family must keep one sign in all regions
    (sign-changing families are the excluded measure-valued case).
    """
    mats = tuple(np.array(M, dtype=float) for M in matrices)
    interfaces = tuple(float(z) for z in interfaces)
    if len(mats) != len(interfaces) + 1:
        raise ValidationError(
            f"{len(interfaces)} interfaces require {len(interfaces) + 1} region matrices"
        )
    if any(b <= a for a, b in zip(interfaces, interfaces[1:])):
        raise ValidationError("interfaces must be strictly ascending")
    decomps = tuple(decompose(M) for M in mats)
    n = decomps[0].n
    if any(d.n != n for d in decomps):
        raise ValidationError("all region matrices must have the same size")

    for r, d in enumerate(decomps):
        radius = float(np.max(np.abs(d.lambdas)))
        if float(np.min(np.abs(d.lambdas))) <= ZERO_SPEED_FACTOR * max(1.0, radius):
            raise ZeroSpeed(f"region {r} has a (numerically) zero characteristic speed")

    signs = tuple(1 if lam > 0 else -1 for lam in decomps[0].lambdas)
    for r, d in enumerate(decomps[1:], start=1):
        for j in range(n):
            if (1 if d.lambdas[j] > 0 else -1) != signs[j]:
                raise MixedSignFamily(
                    f"characteristic family {j} changes sign between region 0 and region {r}"
                )
    for r in range(len(mats) - 1):
        if np.array_equal(mats[r], mats[r + 1]):
            warnings.warn(
                f"regions {r} and {r + 1} have identical matrices; the interface "
                f"at z = {interfaces[r]} is vacuous",
                stacklevel=2,
            )
    for M in mats:
        M.setflags(write=False)
    return PiecewiseConstantSystem(n, interfaces, mats, decomps, signs)


def _seam_check(foot_a: float, foot_b: float) -> None:
    scale = max(1.0, abs(foot_a), abs(foot_b))
    if abs(foot_a - foot_b) > SEAM_TOL * scale:
        raise ValidationError(
            f"adjacent branch formulas disagree at a seam: {foot_a} vs {foot_b}"
        )


def _single_interface_foot(sys: PiecewiseConstantSystem, j: int, z: float,
                           t: float, r_pt: int) -> tuple[float, int]:
    """Foot and its region for the 3-branch single-interface solution."""
    z1 = sys.interfaces[0]
    lam_m = float(sys.decomps[0].lambdas[j])
    lam_p = float(sys.decomps[1].lambdas[j])
    if sys.signs[j] > 0:
        if r_pt == 0:
            return z - lam_m * t, 0
        seam = z1 + lam_p * t
        if z > seam:
            return z - lam_p * t, 1
        crossed = z1 + (lam_m / lam_p) * (z - z1 - lam_p * t)
        if z == seam:
            _seam_check(z - lam_p * t, crossed)
            return z - lam_p * t, 1
        return crossed, 0
    if r_pt == 1:
        return z - lam_p * t, 1
    seam = z1 + lam_m * t
    if z < seam:
        return z - lam_m * t, 0
    crossed = z1 + (lam_p / lam_m) * (z - z1 - lam_m * t)
    if z == seam:
        _seam_check(z - lam_m * t, crossed)
        return z - lam_m * t, 0
    return crossed, 1


def _two_interface_foot(sys: PiecewiseConstantSystem, j: int, z: float,
                        t: float, r_pt: int) -> tuple[float, int]:
    """Closed-form foot for two interfaces, organized by crossing count.

    Branch regions are derived from the crossing times themselves, which keeps
    the wedge between "crossed one" and "crossed both" consistent by
    construction.
    """
    z1, z2 = sys.interfaces
    lam = [float(sys.decomps[r].lambdas[j]) for r in range(3)]
    if sys.signs[j] > 0:
        if r_pt == 0:
            return z - lam[0] * t, 0
        if r_pt == 1:
            tau1 = t - (z - z1) / lam[1]
            if tau1 == 0.0:
                _seam_check(z - lam[1] * t, z1)
            if tau1 <= 0.0:
                return z - lam[1] * t, 1
            return z1 - lam[0] * tau1, 0
        tau2 = t - (z - z2) / lam[2]
        if tau2 == 0.0:
            _seam_check(z - lam[2] * t, z2)
        if tau2 <= 0.0:
            return z - lam[2] * t, 2
        tau1 = tau2 - (z2 - z1) / lam[1]
        if tau1 == 0.0:
            _seam_check(z2 - lam[1] * tau2, z1)
        if tau1 <= 0.0:
            return z2 - lam[1] * tau2, 1
        return z1 - lam[0] * tau1, 0
    if r_pt == 2:
        return z - lam[2] * t, 2
    if r_pt == 1:
        tau2 = t + (z2 - z) / lam[1]
        if tau2 == 0.0:
            _seam_check(z - lam[1] * t, z2)
        if tau2 <= 0.0:
            return z - lam[1] * t, 1
        return z2 - lam[2] * tau2, 2
    tau1 = t + (z1 - z) / lam[0]
    if tau1 == 0.0:
        _seam_check(z - lam[0] * t, z1)
    if tau1 <= 0.0:
        return z - lam[0] * t, 0
    tau2 = tau1 + (z2 - z1) / lam[1]
    if tau2 == 0.0:
        _seam_check(z1 - lam[1] * tau1, z2)
    if tau2 <= 0.0:
        return z1 - lam[1] * tau1, 1
    return z2 - lam[2] * tau2, 2


def _generic_foot(sys: PiecewiseConstantSystem, j: int, z: float, t: float,
                  side) -> tuple[float, int]:
    path = tracer.trace(sys.speed_field(j), z, t, side=side)
    return path.foot, path.segments[-1].region


def _assemble_value(sys: PiecewiseConstantSystem, u0: InitialData, z: float,
                    t: float, side, foot_fn) -> np.ndarray:
    if t < 0.0:
        raise ValidationError("t must be nonnegative")
    if u0.n != sys.n:
        raise ValidationError("initial data size does not match the system")
    if t == 0.0:
        return u0(z)
    r_pt = sys.region_of(z, side)
    v = np.empty(sys.n)
    for j in range(sys.n):
        foot, r_foot = foot_fn(sys, j, z, t, r_pt)
        v[j] = sys.decomps[r_foot].A_inv[j, :] @ u0(foot)
    return sys.decomps[r_pt].A @ v


def solve_single_interface(sys: PiecewiseConstantSystem, u0: InitialData,
                           z: float, t: float, side=None) -> np.ndarray:
    """Closed-form value for one interface (three branches per family)."""
    if sys.m != 1:
        raise ValidationError("solve_single_interface requires exactly one interface")
    return _assemble_value(sys, u0, z, t, side, _single_interface_foot)


def solve_two_interface(sys: PiecewiseConstantSystem, u0: InitialData,
                        z: float, t: float, side=None) -> np.ndarray:
    """Closed-form value for two interfaces (six branches per family)."""
    if sys.m != 2:
        raise ValidationError("solve_two_interface requires exactly two interfaces")
    return _assemble_value(sys, u0, z, t, side, _two_interface_foot)


def solve_generic(sys: PiecewiseConstantSystem, u0: InitialData, z: float,
                  t: float, side=None) -> np.ndarray:
    """Tracer-based value for any interface count; coincides with the closed
    forms for m = 1, 2."""
    def foot_fn(s, j, zz, tt, r_pt):
        return _generic_foot(s, j, zz, tt, side)
    return _assemble_value(sys, u0, z, t, side, foot_fn)


_SOLVERS = {
    "single": solve_single_interface,
    "two": solve_two_interface,
    "generic": solve_generic,
}


def pick_solver(sys: PiecewiseConstantSystem, name: str = "auto"):
    if name == "auto":
        name = {1: "single", 2: "two"}.get(sys.m, "generic")
    if name not in _SOLVERS:
        raise ValidationError(f"unknown solver {name!r}")
    return _SOLVERS[name]


def _point_v(sys, u0, z, t, side, solver):
    u = solver(sys, u0, z, t, side=side)
    r = sys.region_of(z, side)
    return sys.decomps[r].A_inv @ u, u


def _trace_limit_t0(sys: PiecewiseConstantSystem, u0: InitialData, l: int):
    """One-sided traces at t -> 0+: each family carries the transform of its
    own upwind region, so v is already single-valued on the interface."""
    zl = sys.interfaces[l]
    w = u0(zl)
    v = np.empty(sys.n)
    for j in range(sys.n):
        r_up = l if sys.signs[j] > 0 else l + 1
        v[j] = sys.decomps[r_up].A_inv[j, :] @ w
    return v, sys.decomps[l].A @ v, sys.decomps[l + 1].A @ v


def sample_on_grid(sys: PiecewiseConstantSystem, u0: InitialData, zs, ts,
                   solver: str = "auto") -> SolutionField:
    """Evaluate on a (times x positions) grid, including interface traces.

    Grid positions must avoid the interfaces; solution values there are
    double-valued in u and are exposed through the trace arrays, whose t = 0
    entries are the t -> 0+ limits of the solution.
    """
    zs = np.asarray(zs, dtype=float)
    ts = np.asarray(ts, dtype=float)
    for zl in sys.interfaces:
        if np.any(zs == zl):
            raise ValidationError(
                f"grid node on interface z = {zl}; sample traces instead"
            )
    fn = pick_solver(sys, solver)
    nt, nz, n = ts.size, zs.size, sys.n
    u = np.empty((nt, nz, n))
    v = np.empty((nt, nz, n))
    for k, t in enumerate(ts):
        for i, z in enumerate(zs):
            v[k, i], u[k, i] = _point_v(sys, u0, z, t, None, fn)
    m = sys.m
    utm = np.empty((m, nt, n))
    utp = np.empty((m, nt, n))
    vtm = np.empty((m, nt, n))
    vtp = np.empty((m, nt, n))
    for l, zl in enumerate(sys.interfaces):
        for k, t in enumerate(ts):
            if t == 0.0:
                vv, um, up = _trace_limit_t0(sys, u0, l)
                vtm[l, k] = vtp[l, k] = vv
                utm[l, k], utp[l, k] = um, up
            else:
                vtm[l, k], utm[l, k] = _point_v(sys, u0, zl, t, "minus", fn)
                vtp[l, k], utp[l, k] = _point_v(sys, u0, zl, t, "plus", fn)
    return SolutionField(zs.copy(), ts.copy(), u, v, sys.interfaces,
                         utm, utp, vtm, vtp)


@dataclass(frozen=True)
class InterfaceReport:
    """Residuals of the v-continuity condition at each interface."""

    residuals: np.ndarray          # (m, nt)
    max_by_interface: np.ndarray   # (m,)
    max_residual: float

    def __post_init__(self):
        self.residuals.setflags(write=False)
        self.max_by_interface.setflags(write=False)


def verify_interface(field: SolutionField, sys: PiecewiseConstantSystem) -> InterfaceReport:
    """Check (A_inv u) continuity across every interface, from the u-traces.

    The residual is recomputed from the stored u traces and the system's own
    one-sided A_inv matrices, so it stays an independent check even when the
    field also carries v traces.
    """
    field.require_traces()
    if tuple(field.interfaces) != tuple(sys.interfaces):
        raise ValidationError("field and system disagree about interface positions")
    m, nt = len(sys.interfaces), field.ts.size
    res = np.empty((m, nt))
    for l in range(m):
        Am = sys.decomps[l].A_inv
        Ap = sys.decomps[l + 1].A_inv
        diff = field.u_trace_plus[l] @ Ap.T - field.u_trace_minus[l] @ Am.T
        res[l] = np.max(np.abs(diff), axis=1)
    by_iface = res.max(axis=1) if nt else np.zeros(m)
    return InterfaceReport(res, by_iface, float(res.max()) if res.size else 0.0)
