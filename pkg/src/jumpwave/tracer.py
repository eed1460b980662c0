"""Backward characteristic tracing with interface-crossing detection.

The characteristic through (z, t) solves d alpha/ds = lambda(alpha, s) with
the terminal condition alpha(t) = z, traced backward over s in [0, t].  When
alpha meets an interface z_l at some crossing time tau_l, the speed switches
to the one-sided trace of the region the curve moves into.  Piecewise-constant
speed fields are handled by exact affine segments; smooth per-region fields go
through an adaptive RK45 integration with terminal events on the region
boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    CharacteristicTrappedAtInterface,
    EvaluationOnInterfaceWithoutSide,
    IntegratorFailure,
    NoSuchCrossing,
    ValidationError,
)
from .fields import SpeedField, Side

ODE_RTOL = 1e-12
ODE_ATOL = 1e-10
POS_TOL = 1e-12
# Speeds of smaller magnitude cannot produce a genuine (non-grazing) crossing.
GRAZING_SPEED = 1e-13


@dataclass(frozen=True)
class Crossing:
    s: float
    interface: int


@dataclass(frozen=True)
class PathSegment:
    """One smooth piece of the path, integrated from s_hi down to s_lo."""

    s_hi: float
    s_lo: float
    region: int
    z_hi: float
    z_lo: float
    slope: float | None = None   # affine segments: alpha(s) = z_hi + slope (s - s_hi)
    dense: object | None = None  # OdeSolution for integrated segments

    def position(self, s: float) -> float:
        if self.slope is not None:
            return self.z_hi + self.slope * (s - self.s_hi)
        return float(np.atleast_1d(self.dense(s))[0])


@dataclass(frozen=True)
class CharacteristicPath:
    origin_z: float
    origin_t: float
    foot: float
    crossings: tuple[Crossing, ...]
    segments: tuple[PathSegment, ...]

    def position(self, s: float) -> float:
        if not (-POS_TOL <= s <= self.origin_t + POS_TOL):
            raise ValidationError(f"s = {s} outside [0, {self.origin_t}]")
        for seg in self.segments:  # ordered by decreasing s
            if s >= seg.s_lo or seg is self.segments[-1]:
                return seg.position(s)
        return self.segments[-1].position(s)

    def crossing_times(self) -> list[float]:
        return [c.s for c in self.crossings]


def _resolve_start_region(field: SpeedField, z: float, side: Side | None) -> int:
    """Region the backward curve starts in; on-interface starts pick the side
    the curve moves into (backward), erroring when that is ambiguous."""
    try:
        return field.region_of(z, side)
    except EvaluationOnInterfaceWithoutSide:
        pass
    l = field.interfaces.index(z)
    lam_minus = field.trace(l, "minus", 0.0)
    lam_plus = field.trace(l, "plus", 0.0)
    into_minus = lam_minus > GRAZING_SPEED
    into_plus = lam_plus < -GRAZING_SPEED
    if into_minus and not into_plus:
        return l
    if into_plus and not into_minus:
        return l + 1
    raise CharacteristicTrappedAtInterface(
        f"start on interface z_{l + 1} = {z} with one-sided speeds "
        f"({lam_minus}, {lam_plus}); backward continuation is not unique"
    )


def _continue_region(field: SpeedField, l: int, tau: float, incoming_lam: float) -> int:
    """Region entered after crossing interface l at time tau (backward)."""
    if incoming_lam > 0.0:
        # Arrived at the interface from above; continue left if the left trace
        # still points rightward (the curve came from the left, forward in time).
        lam_dest = field.trace(l, "minus", tau)
        if lam_dest > GRAZING_SPEED:
            return l
    else:
        lam_dest = field.trace(l, "plus", tau)
        if lam_dest < -GRAZING_SPEED:
            return l + 1
    raise CharacteristicTrappedAtInterface(
        f"crossing interface {l} at s = {tau}: incoming speed {incoming_lam}, "
        f"destination trace {lam_dest}; speeds push toward the interface from "
        "both sides (excluded measure-valued case) or graze it"
    )


def _trace_piecewise_constant(field: SpeedField, z: float, t: float, r: int) -> CharacteristicPath:
    segments: list[PathSegment] = []
    crossings: list[Crossing] = []
    s_cur, z_cur = t, z
    while True:
        lam = field.values[r]
        lo, hi = field.region_bounds(r)
        boundary = None
        if lam > GRAZING_SPEED and np.isfinite(lo):
            boundary, l = lo, r - 1
        elif lam < -GRAZING_SPEED and np.isfinite(hi):
            boundary, l = hi, r
        tau = s_cur + (boundary - z_cur) / lam if boundary is not None else -np.inf
        if tau <= 0.0:
            z_end = z_cur + lam * (0.0 - s_cur)
            segments.append(PathSegment(s_cur, 0.0, r, z_cur, z_end, slope=lam))
            return CharacteristicPath(z, t, z_end, tuple(crossings), tuple(segments))
        if tau < s_cur:
            segments.append(PathSegment(s_cur, tau, r, z_cur, boundary, slope=lam))
        crossings.append(Crossing(tau, l))
        r = _continue_region(field, l, tau, lam)
        s_cur, z_cur = tau, boundary


def _rhs_alpha(field: SpeedField, r: int):
    def fun(s, y):
        return [field.value_in_region(r, float(y[0]), s)]
    return fun


def _rhs_variational(field: SpeedField, r: int):
    def fun(s, y):
        a = float(y[0])
        lam = field.value_in_region(r, a, s)
        lam_z = field.dz_in_region(r, a, s)
        return [lam, lam_z * y[1], lam_z * y[2]]
    return fun


def _segment_events(field: SpeedField, r: int):
    # Direction filters make each event fire only when the curve leaves the
    # region, so a segment starting exactly on a boundary (fresh from a
    # crossing) does not re-trigger at its first step.
    events = []
    lo, hi = field.region_bounds(r)
    if np.isfinite(lo):
        def ev_lo(s, y, b=lo):
            return y[0] - b
        ev_lo.terminal = True
        ev_lo.direction = -1.0
        events.append((ev_lo, field.interfaces.index(lo)))
    if np.isfinite(hi):
        def ev_hi(s, y, b=hi):
            return y[0] - b
        ev_hi.terminal = True
        ev_hi.direction = 1.0
        events.append((ev_hi, field.interfaces.index(hi)))
    return events


def _integrate_path(field: SpeedField, z: float, t: float, r: int, variational: bool):
    y0 = [z, 1.0, -field.value_in_region(r, z, t)] if variational else [z]
    rhs = _rhs_variational if variational else _rhs_alpha
    segments: list[PathSegment] = []
    crossings: list[Crossing] = []
    jump_log: list[tuple[float, int, float, float, np.ndarray]] = []
    s_cur = t
    y_cur = np.array(y0, dtype=float)
    while s_cur > 0.0:
        evs = _segment_events(field, r)
        sol = solve_ivp(
            rhs(field, r), (s_cur, 0.0), y_cur, method="RK45",
            rtol=ODE_RTOL, atol=ODE_ATOL, dense_output=True,
            events=[e for e, _ in evs],
        )
        if sol.status == -1:
            raise IntegratorFailure(sol.message)
        if sol.status == 0:
            segments.append(PathSegment(s_cur, 0.0, r, float(y_cur[0]),
                                        float(sol.y[0, -1]), dense=sol.sol))
            foot = float(sol.y[0, -1])
            return CharacteristicPath(z, t, foot, tuple(crossings), tuple(segments)), jump_log
        hits = [(te[0], evs[i][1]) for i, te in enumerate(sol.t_events) if len(te)]
        tau, l = max(hits)  # the first event along decreasing s
        y_tau = sol.sol(tau)
        if abs(float(y_tau[0]) - field.interfaces[l]) > POS_TOL * max(1.0, abs(field.interfaces[l])):
            raise IntegratorFailure("event localization missed the interface position")
        lam_in = field.value_in_region(r, field.interfaces[l], tau)
        if abs(lam_in) <= GRAZING_SPEED:
            raise CharacteristicTrappedAtInterface(
                f"grazing crossing of interface {l} at s = {tau} (|speed| <= {GRAZING_SPEED})"
            )
        if tau < s_cur:
            segments.append(PathSegment(s_cur, tau, r, float(y_cur[0]),
                                        field.interfaces[l], dense=sol.sol))
        crossings.append(Crossing(tau, l))
        r_new = _continue_region(field, l, tau, lam_in)
        lam_out = field.value_in_region(r_new, field.interfaces[l], tau)
        if variational:
            jump_log.append((tau, l, lam_in, lam_out, y_tau.copy()))
            y_cur = np.array([field.interfaces[l],
                              y_tau[1] * lam_out / lam_in,
                              y_tau[2] * lam_out / lam_in])
        else:
            y_cur = np.array([field.interfaces[l]])
        s_cur, r = tau, r_new
    foot = float(y_cur[0])
    return CharacteristicPath(z, t, foot, tuple(crossings), tuple(segments)), jump_log


def trace(field: SpeedField, z: float, t: float, side: Side | None = None) -> CharacteristicPath:
    """Backward characteristic through (z, t) with its crossings and foot."""
    if t < 0.0:
        raise ValidationError("t must be nonnegative")
    r = _resolve_start_region(field, z, side)
    if t == 0.0:
        seg = PathSegment(0.0, 0.0, r, z, z, slope=0.0)
        return CharacteristicPath(z, t, z, (), (seg,))
    if field.kind == "piecewise_constant":
        return _trace_piecewise_constant(field, z, t, r)
    path, _ = _integrate_path(field, z, t, r, variational=False)
    return path


def foot_and_crossings(field: SpeedField, z: float, t: float,
                       side: Side | None = None) -> tuple[float, list[float]]:
    path = trace(field, z, t, side=side)
    return path.foot, path.crossing_times()


def crossing_time_sensitivity(field: SpeedField, z: float, t: float, l: int,
                              side: Side | None = None) -> tuple[float, float]:
    """Partials (d tau_l / dz, d tau_l / dt) of the crossing time of interface l.

    Computed from the variational equations along the path: d/ds of the
    z- and t-sensitivities of alpha obey the linearized characteristic ODE,
    with a jump by the one-sided speed ratio at each earlier crossing; at the
    target crossing d tau/dz = -(d alpha/dz) / lambda_incoming and likewise
    for t.
    """
    if not (0 <= l < len(field.interfaces)):
        raise ValidationError(f"no interface with index {l}")
    if z in field.interfaces:
        raise ValidationError("origin must lie off the interfaces")
    r = _resolve_start_region(field, z, side)

    if field.kind == "piecewise_constant":
        path = _trace_piecewise_constant(field, z, t, r)
        pz, pt = 1.0, -field.values[r]
        reg = r
        for c in path.crossings:
            lam_in = field.values[reg]
            if c.interface == l:
                return (-pz / lam_in, -pt / lam_in)
            reg = _continue_region(field, c.interface, c.s, lam_in)
            lam_out = field.values[reg]
            pz *= lam_out / lam_in
            pt *= lam_out / lam_in
        raise NoSuchCrossing(f"characteristic from ({z}, {t}) never meets interface {l}")

    _, jump_log = _integrate_path(field, z, t, r, variational=True)
    for tau, li, lam_in, _lam_out, y_tau in jump_log:
        if li == l:
            return (-float(y_tau[1]) / lam_in, -float(y_tau[2]) / lam_in)
    raise NoSuchCrossing(f"characteristic from ({z}, {t}) never meets interface {l}")
