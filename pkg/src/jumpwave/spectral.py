"""Eigen-structure of small real coefficient matrices.

For a strictly hyperbolic matrix B the library works with the factorization
B = A @ diag(lambdas) @ A_inv, where the columns of A are right eigenvectors
and lambdas are the characteristic speeds sorted ascending.  Everything
downstream (characteristic tracing, interface transfer v = A_inv @ u) relies
on this module producing the same decomposition for the same input bits, so
eigenvalues for n <= 3 come from closed-form characteristic-polynomial roots
and eigenvectors are fixed by an explicit normalization convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    ComplexEigenvalues,
    EvaluationOnInterfaceWithoutSide,
    IllConditionedEigenvectors,
    RepeatedEigenvalues,
    ValidationError,
)

# Relative eigenvalue gap below which a matrix is treated as having a
# repeated eigenvalue.  Scaled by the spectral radius.
GAP_TOL_FACTOR = 1e-8
# Condition-number cap for the eigenvector matrix; beyond this the transfer
# v = A_inv @ u is numerically meaningless.
COND_TOL = 1e8
# Reconstruction and symmetry test scales.
RECON_TOL = 1e-10
SYM_TOL = 1e-14
# |lambda| below this (relative to max(1, max|lambda|)) counts as a zero speed.
ZERO_SPEED_FACTOR = 1e-12


@dataclass(frozen=True)
class SpectralDecomposition:
    """Sorted eigenvalues with the eigenvector matrix and its inverse.

    lambdas[j] is the j-th characteristic speed (ascending); A[:, j] is the
    matching unit-norm right eigenvector whose largest-magnitude component
    is positive.
    """

    lambdas: np.ndarray
    A: np.ndarray
    A_inv: np.ndarray

    def __post_init__(self):
        self.lambdas.setflags(write=False)
        self.A.setflags(write=False)
        self.A_inv.setflags(write=False)

    @property
    def n(self) -> int:
        return self.lambdas.shape[0]

    def reconstruct(self) -> np.ndarray:
        return (self.A * self.lambdas) @ self.A_inv


@dataclass(frozen=True)
class HyperbolicityReport:
    strictly_hyperbolic: bool
    has_zero_speed: bool
    symmetric: bool
    eigenvalue_bound: float


def _as_square(B) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] < 1:
        raise ValidationError(f"expected a square matrix, got shape {B.shape}")
    if not np.all(np.isfinite(B)):
        raise ValidationError("matrix entries must be finite")
    return B


def _cubic_real_roots(a2: float, a1: float, a0: float):
    """All-real roots of x^3 + a2 x^2 + a1 x + a0, or None if a complex pair.

    Trigonometric method on the depressed cubic; bit-stable for fixed input.
    """
    p = a1 - a2 * a2 / 3.0
    q = 2.0 * a2 ** 3 / 27.0 - a2 * a1 / 3.0 + a0
    disc = -4.0 * p ** 3 - 27.0 * q * q
    shift = -a2 / 3.0
    scale = max(abs(p), abs(q), 1e-300)
    if disc < -1e-12 * scale ** 2:
        return None
    if p >= 0.0:
        # disc >= 0 forces p <= 0 up to roundoff; here all roots coincide.
        return np.array([shift, shift, shift])
    r = np.sqrt(-p / 3.0)
    c3 = np.clip(-q / (2.0 * r ** 3), -1.0, 1.0)
    theta = np.arccos(c3) / 3.0
    roots = shift + 2.0 * r * np.cos(theta - 2.0 * np.pi * np.arange(3) / 3.0)
    return np.sort(roots)


def _eigenvalues(B: np.ndarray):
    """Real sorted eigenvalues, or None when a complex pair is present."""
    n = B.shape[0]
    if n == 1:
        return np.array([B[0, 0]])
    if n == 2:
        tr = B[0, 0] + B[1, 1]
        det = B[0, 0] * B[1, 1] - B[0, 1] * B[1, 0]
        disc = tr * tr - 4.0 * det
        if disc < 0.0:
            return None
        rt = np.sqrt(disc)
        return np.array([(tr - rt) / 2.0, (tr + rt) / 2.0])
    if n == 3:
        tr = B[0, 0] + B[1, 1] + B[2, 2]
        m2 = 0.5 * (tr * tr - np.trace(B @ B))
        det = np.linalg.det(B)
        return _cubic_real_roots(-tr, m2, -det)
    w = np.linalg.eigvals(B)
    if np.any(w.imag != 0.0):
        return None
    return np.sort(w.real)


def _check_gaps(lambdas: np.ndarray, n: int) -> None:
    radius = float(np.max(np.abs(lambdas)))
    if radius == 0.0:
        if n > 1:
            raise RepeatedEigenvalues("all eigenvalues are zero")
        return
    gap_tol = GAP_TOL_FACTOR * radius
    gaps = np.diff(lambdas)
    if n > 1 and np.min(gaps) <= gap_tol:
        raise RepeatedEigenvalues(
            f"minimum eigenvalue gap {np.min(gaps):.3e} <= {gap_tol:.3e}"
        )


def _null_vector(M: np.ndarray) -> np.ndarray:
    """Unit vector spanning the (numerical) null space of M."""
    _, _, vh = np.linalg.svd(M)
    return vh[-1]


def _fix_sign(v: np.ndarray) -> np.ndarray:
    # Largest-magnitude component made positive; ties resolved by first index.
    k = int(np.argmax(np.abs(v)))
    return -v if v[k] < 0.0 else v


def decompose(B) -> SpectralDecomposition:
    """Factor B = A @ diag(lambdas) @ A_inv with ascending real eigenvalues.

    Raises ComplexEigenvalues / RepeatedEigenvalues when B is not strictly
    hyperbolic at this point, IllConditionedEigenvectors when the eigenvector
    basis is too close to singular to invert reliably.
    """
    B = _as_square(B)
    n = B.shape[0]
    lambdas = _eigenvalues(B)
    if lambdas is None:
        raise ComplexEigenvalues("matrix has a complex eigenvalue pair")
    _check_gaps(lambdas, n)

    if n == 1:
        A = np.array([[1.0]])
        A_inv = np.array([[1.0]])
        return SpectralDecomposition(lambdas, A, A_inv)

    eye = np.eye(n)
    cols = [_fix_sign(_null_vector(B - lam * eye)) for lam in lambdas]
    A = np.column_stack(cols)
    try:
        A_inv = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise IllConditionedEigenvectors(str(exc)) from None

    cond = np.linalg.norm(A, 2) * np.linalg.norm(A_inv, 2)
    if cond > COND_TOL:
        raise IllConditionedEigenvectors(f"cond(A) = {cond:.3e} > {COND_TOL:.0e}")

    scale = 1.0 + np.max(np.abs(B))
    if np.max(np.abs(A @ A_inv - eye)) > RECON_TOL:
        raise IllConditionedEigenvectors("A @ A_inv deviates from the identity")
    recon = (A * lambdas) @ A_inv
    if np.max(np.abs(recon - B)) > RECON_TOL * scale:
        raise IllConditionedEigenvectors("eigen-reconstruction residual too large")

    return SpectralDecomposition(lambdas, A, A_inv)


def classify(B) -> HyperbolicityReport:
    """Hyperbolicity report: never raises, complex spectra just clear the flag.

    eigenvalue_bound is n^2 * max|b_ij|, an a-priori cap on the characteristic
    speeds of any real-spectrum matrix.
    """
    B = _as_square(B)
    n = B.shape[0]
    bmax = float(np.max(np.abs(B)))
    bound = n * n * bmax
    symmetric = bool(np.max(np.abs(B - B.T)) <= SYM_TOL * (1.0 + bmax))

    lambdas = _eigenvalues(B)
    if lambdas is None:
        return HyperbolicityReport(False, False, symmetric, bound)

    radius = float(np.max(np.abs(lambdas)))
    distinct = True
    if n > 1:
        distinct = bool(np.min(np.diff(lambdas)) > GAP_TOL_FACTOR * radius) if radius > 0 else False
    zero = bool(np.min(np.abs(lambdas)) <= ZERO_SPEED_FACTOR * max(1.0, radius))
    return HyperbolicityReport(distinct, zero, symmetric, bound)


def decompose_field(field, z: float, t: float, side: str | None = None) -> SpectralDecomposition:
    """Decompose a coefficient field at (z, t), one-sided on interfaces.

    `side` must be "minus" or "plus" when z coincides with an interface.
    """
    B = field.value(z, t, side=side)
    return decompose(B)


# --- batched closed-form path for 2x2 matrices --------------------------------
#
# The variable-coefficient solver evaluates decompositions at many quadrature
# points per sweep; for n == 2 this vectorized route avoids per-point Python
# overhead while reproducing decompose() bit-for-bit in exact arithmetic.

def decompose_2x2_batch(B: np.ndarray):
    """Vectorized decompose for a (k, 2, 2) batch.

    Returns (lambdas (k,2), A (k,2,2), A_inv (k,2,2)).  Raises on complex or
    (nearly) repeated eigenvalues anywhere in the batch.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 3 or B.shape[1:] != (2, 2):
        raise ValidationError(f"expected (k, 2, 2) batch, got {B.shape}")
    tr = B[:, 0, 0] + B[:, 1, 1]
    det = B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0]
    disc = tr * tr - 4.0 * det
    if np.any(disc < 0.0):
        raise ComplexEigenvalues("complex pair in batch")
    rt = np.sqrt(disc)
    lam = np.stack([(tr - rt) / 2.0, (tr + rt) / 2.0], axis=1)
    radius = np.max(np.abs(lam), axis=1)
    if np.any((lam[:, 1] - lam[:, 0]) <= GAP_TOL_FACTOR * radius):
        raise RepeatedEigenvalues("repeated eigenvalue in batch")

    A = np.empty_like(B)
    for j in (0, 1):
        # (B - lam I) v = 0: two candidate row-orthogonal solutions; take the
        # better-conditioned one per point, then normalize and fix signs.
        l = lam[:, j]
        ax, ay = B[:, 0, 1], l - B[:, 0, 0]
        bx, by = l - B[:, 1, 1], B[:, 1, 0]
        n1sq = ax * ax + ay * ay
        n2sq = bx * bx + by * by
        use1 = n1sq >= n2sq
        vx = np.where(use1, ax, bx)
        vy = np.where(use1, ay, by)
        nrm = np.sqrt(np.where(use1, n1sq, n2sq))
        if np.any(nrm == 0.0):
            raise IllConditionedEigenvectors("zero eigenvector candidate in batch")
        vx = vx / nrm
        vy = vy / nrm
        big = np.where(np.abs(vx) >= np.abs(vy), vx, vy)
        flip = np.where(big < 0.0, -1.0, 1.0)
        A[:, 0, j] = flip * vx
        A[:, 1, j] = flip * vy

    adet = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
    if np.any(np.abs(adet) < 1.0 / COND_TOL):
        raise IllConditionedEigenvectors("near-singular eigenvector matrix in batch")
    A_inv = np.empty_like(A)
    A_inv[:, 0, 0] = A[:, 1, 1] / adet
    A_inv[:, 0, 1] = -A[:, 0, 1] / adet
    A_inv[:, 1, 0] = -A[:, 1, 0] / adet
    A_inv[:, 1, 1] = A[:, 0, 0] / adet
    return lam, A, A_inv
