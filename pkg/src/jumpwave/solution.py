"""Immutable sampled solution fields with one-sided interface traces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingTraces, ValidationError


@dataclass(frozen=True)
class SolutionField:
    """u sampled on a (times x positions) grid, with the characteristic
    companion v = A_inv u and one-sided traces at every interface.

    Shapes: u, v are (nt, nz, n); trace arrays are (m, nt, n).  Grid
    positions must avoid the interfaces themselves; the solution there is
    double-valued in u and lives in the trace arrays.
    """

    zs: np.ndarray
    ts: np.ndarray
    u: np.ndarray
    v: np.ndarray
    interfaces: tuple[float, ...]
    u_trace_minus: np.ndarray | None = None
    u_trace_plus: np.ndarray | None = None
    v_trace_minus: np.ndarray | None = None
    v_trace_plus: np.ndarray | None = None

    def __post_init__(self):
        nt, nz = self.ts.size, self.zs.size
        if self.u.shape[:2] != (nt, nz):
            raise ValidationError(f"u shape {self.u.shape} does not match grid ({nt}, {nz})")
        if self.v.shape != self.u.shape:
            raise ValidationError("v must have the same shape as u")
        for z in self.interfaces:
            if np.any(self.zs == z):
                raise ValidationError(
                    f"grid node at interface z = {z}; interface values belong in traces"
                )
        for arr in (self.zs, self.ts, self.u, self.v, self.u_trace_minus,
                    self.u_trace_plus, self.v_trace_minus, self.v_trace_plus):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.u.shape[2]

    def has_traces(self) -> bool:
        return self.u_trace_minus is not None and self.u_trace_plus is not None

    def require_traces(self):
        if not self.has_traces():
            raise MissingTraces("solution field carries no interface traces")
