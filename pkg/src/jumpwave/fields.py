"""Piecewise fields over the line with interior interfaces.

A field with interfaces z_1 < ... < z_m is a list of m+1 per-region
evaluators; region r covers (z_r, z_{r+1}) with z_0 = -inf, z_{m+1} = +inf.
Evaluators must be defined on the closure of their region, which makes the
one-sided traces at an interface exact (region r's evaluator at z = z_{r+1}
is the left trace there, region r+1's the right trace).
"""

from __future__ import annotations

import bisect
from typing import Callable, Sequence

import numpy as np

from .errors import EvaluationOnInterfaceWithoutSide, ValidationError

Side = str  # "minus" | "plus"


def _check_interfaces(interfaces) -> tuple[float, ...]:
    zs = tuple(float(z) for z in interfaces)
    if any(not np.isfinite(z) for z in zs):
        raise ValidationError("interface positions must be finite")
    if any(b <= a for a, b in zip(zs, zs[1:])):
        raise ValidationError("interfaces must be strictly ascending")
    return zs


def region_index(interfaces: Sequence[float], z: float, side: Side | None = None) -> int:
    """Index of the region containing z; `side` resolves points on interfaces."""
    lo = bisect.bisect_left(interfaces, z)
    hi = bisect.bisect_right(interfaces, z)
    if lo == hi:
        return lo
    if side == "minus":
        return lo
    if side == "plus":
        return hi
    raise EvaluationOnInterfaceWithoutSide(
        f"z = {z} lies on an interface; pass side='minus' or side='plus'"
    )


class CoefficientField:
    """Matrix-valued B(z, t), possibly discontinuous across interfaces."""

    def __init__(self, region_evaluators, interfaces=(), n: int | None = None,
                 piecewise_constant: bool = False):
        self.interfaces = _check_interfaces(interfaces)
        self._regions = tuple(region_evaluators)
        if len(self._regions) != len(self.interfaces) + 1:
            raise ValidationError(
                f"{len(self.interfaces)} interfaces need "
                f"{len(self.interfaces) + 1} region evaluators, got {len(self._regions)}"
            )
        self.piecewise_constant = piecewise_constant
        if n is None:
            n = np.asarray(self._eval_region(0, self.interfaces[0] - 1.0 if self.interfaces else 0.0, 0.0)).shape[0]
        self.n = n

    @classmethod
    def from_matrices(cls, matrices, interfaces=()) -> "CoefficientField":
        mats = [np.array(M, dtype=float) for M in matrices]
        n = mats[0].shape[0]
        for M in mats:
            if M.shape != (n, n):
                raise ValidationError("all region matrices must share one shape")
            if not np.all(np.isfinite(M)):
                raise ValidationError("matrix entries must be finite")
        for M in mats:
            M.setflags(write=False)
        return cls([(lambda z, t, M=M: M) for M in mats], interfaces, n=n,
                   piecewise_constant=True)

    @classmethod
    def from_callable(cls, fn: Callable, interfaces=(), n: int | None = None) -> "CoefficientField":
        """Single evaluator reused in every region.

        Only appropriate for fields that are continuous up to each interface;
        one-sided traces are then the shared value at the interface.
        """
        m = len(tuple(interfaces))
        return cls([fn] * (m + 1), interfaces, n=n)

    def _eval_region(self, r: int, z: float, t: float) -> np.ndarray:
        return np.asarray(self._regions[r](z, t), dtype=float)

    def region_of(self, z: float, side: Side | None = None) -> int:
        return region_index(self.interfaces, z, side)

    def value(self, z: float, t: float, side: Side | None = None) -> np.ndarray:
        return self._eval_region(self.region_of(z, side), z, t)

    def value_in_region(self, r: int, z: float, t: float) -> np.ndarray:
        return self._eval_region(r, z, t)

    def trace(self, l: int, side: Side, t: float) -> np.ndarray:
        """One-sided value at interface l (0-based)."""
        r = l if side == "minus" else l + 1
        return self._eval_region(r, self.interfaces[l], t)


class SpeedField:
    """Scalar speed lambda(z, t), piecewise over the same region structure.

    kind == "piecewise_constant" carries one float per region and admits
    exact affine characteristic segments; kind == "callable" carries smooth
    per-region evaluators (vectorized over z) for the adaptive integrator.
    An optional per-region dz-derivative evaluator feeds the variational
    equations; otherwise a guarded finite difference is used.
    """

    def __init__(self, interfaces=(), values=None, evaluators=None,
                 dz_evaluators=None, lam_max: float | None = None):
        self.interfaces = _check_interfaces(interfaces)
        n_regions = len(self.interfaces) + 1
        if (values is None) == (evaluators is None):
            raise ValidationError("pass exactly one of values= or evaluators=")
        if values is not None:
            vals = tuple(float(v) for v in values)
            if len(vals) != n_regions:
                raise ValidationError(f"need {n_regions} region speeds, got {len(vals)}")
            if any(not np.isfinite(v) for v in vals):
                raise ValidationError("region speeds must be finite")
            self.kind = "piecewise_constant"
            self.values = vals
            self._evals = None
            self._dz = None
            self.lam_max = max(abs(v) for v in vals)
        else:
            evals = tuple(evaluators)
            if len(evals) != n_regions:
                raise ValidationError(f"need {n_regions} region evaluators, got {len(evals)}")
            self.kind = "callable"
            self.values = None
            self._evals = evals
            self._dz = tuple(dz_evaluators) if dz_evaluators is not None else None
            self.lam_max = lam_max

    @classmethod
    def constant(cls, lam: float) -> "SpeedField":
        return cls(values=[lam])

    @classmethod
    def from_callable(cls, fn: Callable, interfaces=(), dz_fn: Callable | None = None,
                      lam_max: float | None = None) -> "SpeedField":
        m = len(tuple(interfaces))
        dz = [dz_fn] * (m + 1) if dz_fn is not None else None
        return cls(interfaces, evaluators=[fn] * (m + 1), dz_evaluators=dz, lam_max=lam_max)

    def region_of(self, z: float, side: Side | None = None) -> int:
        return region_index(self.interfaces, z, side)

    def region_bounds(self, r: int) -> tuple[float, float]:
        lo = self.interfaces[r - 1] if r > 0 else -np.inf
        hi = self.interfaces[r] if r < len(self.interfaces) else np.inf
        return lo, hi

    def value_in_region(self, r: int, z, t: float):
        if self.kind == "piecewise_constant":
            v = self.values[r]
            return np.full_like(np.asarray(z, dtype=float), v) if np.ndim(z) else v
        return self._evals[r](z, t)

    def value(self, z: float, t: float, side: Side | None = None) -> float:
        return float(self.value_in_region(self.region_of(z, side), z, t))

    def trace(self, l: int, side: Side, t: float) -> float:
        r = l if side == "minus" else l + 1
        return float(self.value_in_region(r, self.interfaces[l], t))

    def dz_in_region(self, r: int, z: float, t: float) -> float:
        """d lambda / dz inside region r, never sampling across its boundary."""
        if self.kind == "piecewise_constant":
            return 0.0
        if self._dz is not None:
            return float(self._dz[r](z, t))
        lo, hi = self.region_bounds(r)
        h = 1e-6 * max(1.0, abs(z))
        if z - h >= lo and z + h <= hi:
            f = self._evals[r]
            return float((f(z + h, t) - f(z - h, t)) / (2.0 * h))
        # One-sided second-order stencil pointing into the region.
        sgn = 1.0 if (hi == np.inf or hi - z > z - lo) else -1.0
        f = self._evals[r]
        z1, z2 = z + sgn * h, z + 2.0 * sgn * h
        return float(sgn * (-3.0 * f(z, t) + 4.0 * f(z1, t) - f(z2, t)) / (2.0 * h))
