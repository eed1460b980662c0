"""Initial data: vectorized evaluators plus the named analytic families."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class InitialData:
    """Vector-valued initial data u0(z).

    `evaluator` maps a 1D position array (k,) to values (k, n); scalar calls
    are wrapped.  `smoothness` is the caller-declared class (the closed-form
    and fixed-point solvers expect "C1").
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    n: int
    smoothness: str = "C1"

    def __call__(self, z):
        scalar = np.ndim(z) == 0
        pts = np.atleast_1d(np.asarray(z, dtype=float))
        vals = np.asarray(self.evaluator(pts), dtype=float)
        if vals.shape != (pts.size, self.n):
            raise ValidationError(
                f"initial-data evaluator returned shape {vals.shape}, "
                f"expected ({pts.size}, {self.n})"
            )
        if not np.all(np.isfinite(vals)):
            raise ValidationError("initial data must be finite on the queried range")
        return vals[0] if scalar else vals


def from_component_functions(fns) -> InitialData:
    """Build InitialData from per-component scalar callables."""
    fns = list(fns)

    def ev(z):
        return np.column_stack([np.vectorize(f, otypes=[float])(z) for f in fns])

    return InitialData(ev, n=len(fns))


def _amplitudes(amplitude) -> np.ndarray:
    a = np.atleast_1d(np.asarray(amplitude, dtype=float))
    if a.ndim != 1 or a.size < 1:
        raise ValidationError("amplitude must be a scalar or a flat list")
    return a


def gaussian(amplitude, center: float = 0.0, width: float = 1.0) -> InitialData:
    amp = _amplitudes(amplitude)
    if width <= 0:
        raise ValidationError("width must be positive")

    def ev(z):
        prof = np.exp(-(((z - center) / width) ** 2))
        return prof[:, None] * amp[None, :]

    return InitialData(ev, n=amp.size, smoothness="Cinf")


def sine(amplitude, wavenumber: float = 1.0, phase: float = 0.0) -> InitialData:
    amp = _amplitudes(amplitude)

    def ev(z):
        prof = np.sin(wavenumber * z + phase)
        return prof[:, None] * amp[None, :]

    return InitialData(ev, n=amp.size, smoothness="Cinf")


def polynomial(coefficients) -> InitialData:
    """Per-component coefficient lists, lowest order first."""
    coeffs = [np.asarray(c, dtype=float) for c in coefficients]
    if not coeffs:
        raise ValidationError("need at least one component")

    def ev(z):
        return np.column_stack([np.polynomial.polynomial.polyval(z, c) for c in coeffs])

    return InitialData(ev, n=len(coeffs), smoothness="Cinf")


def compact_bump(amplitude, center: float = 0.0, width: float = 1.0) -> InitialData:
    """C-infinity bump supported exactly on [center - width, center + width].

    Returns exact 0.0 outside the support, which the finite-speed tests rely
    on.  Peak value is `amplitude` at the center.
    """
    amp = _amplitudes(amplitude)
    if width <= 0:
        raise ValidationError("width must be positive")

    def ev(z):
        r = (z - center) / width
        prof = np.zeros_like(r)
        inside = np.abs(r) < 1.0
        ri = r[inside]
        prof[inside] = np.exp(1.0 - 1.0 / (1.0 - ri * ri))
        return prof[:, None] * amp[None, :]

    return InitialData(ev, n=amp.size, smoothness="Cinf")


FAMILIES = {
    "gaussian": gaussian,
    "sine": sine,
    "polynomial": polynomial,
    "compact_bump": compact_bump,
}


def from_family(family: str, params: dict) -> InitialData:
    if family not in FAMILIES:
        raise ValidationError(
            f"unknown initial-data family {family!r}; choose from {sorted(FAMILIES)}"
        )
    try:
        return FAMILIES[family](**params)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for family {family!r}: {exc}") from None
