"""Dense symmetric linear-algebra kernels.

Continuous-time Riccati and Lyapunov solvers, an SVD pseudoinverse with an
explicit rank cutoff, and spectral diagnostics.  Controller synthesis, the
suboptimality bounds, and the learning-oracle checks are all built on these
four operations.

Conventions: symmetric matrices are plain float64 ndarrays, symmetrized as
(M + M.T)/2 at every operation boundary.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .errors import IterationDiverged, NonStabilizable, UnstableMatrix

__all__ = [
    "SpectralReport",
    "symmetrize",
    "is_psd",
    "spectral",
    "pinv",
    "solve_lyapunov",
    "solve_care",
    "care_residual",
]

#: default mixed absolute-relative residual tolerance for the matrix solvers
TOL_RESIDUAL = 1e-9

#: eigenvalues down to this value are accepted as numerically PSD
PSD_TOL = -1e-10


def symmetrize(m):
    """Return the symmetric part (m + m.T)/2 as a float64 array."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return (m + m.T) / 2.0


def is_psd(m, tol=PSD_TOL):
    """True when all eigenvalues of the symmetric part are >= tol."""
    w = np.linalg.eigvalsh(symmetrize(m))
    return bool(w[0] >= tol)


@dataclass(frozen=True)
class SpectralReport:
    """Eigenvalue/singular-value summary of a matrix.

    lambda_min / lambda_max are the extreme eigenvalues for symmetric input
    (extreme real parts otherwise, NaN for rectangular input).  cond is
    sigma_max/sigma_min, +inf for singular input.  sigma_l is the smallest
    nonzero singular value (0.0 only for the zero matrix).  spectral_abscissa
    is the largest eigenvalue real part (NaN for rectangular input).
    """

    lambda_min: float
    lambda_max: float
    cond: float
    sigma_l: float
    spectral_abscissa: float


def spectral(m, tol=None):
    """Compute a SpectralReport for a matrix.

    tol is the singular-value cutoff deciding rank; defaults to
    max(shape) * machine_eps * sigma_max.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.size == 0:
        raise ValueError(f"expected a nonempty 2-d matrix, got shape {m.shape}")
    sv = np.linalg.svd(m, compute_uv=False)
    sigma_max = float(sv[0]) if sv.size else 0.0
    if tol is None:
        tol = max(m.shape) * np.finfo(float).eps * sigma_max
    nonzero = sv[sv > tol]
    sigma_l = float(nonzero[-1]) if nonzero.size else 0.0
    sigma_min = float(sv[-1])
    cond = sigma_max / sigma_min if sigma_min > tol else np.inf

    if m.shape[0] == m.shape[1]:
        if np.allclose(m, m.T, rtol=0.0, atol=1e-12 * max(1.0, sigma_max)):
            w = np.linalg.eigvalsh(symmetrize(m))
            lam_min, lam_max = float(w[0]), float(w[-1])
            abscissa = lam_max
        else:
            w = np.linalg.eigvals(m)
            lam_min, lam_max = float(w.real.min()), float(w.real.max())
            abscissa = lam_max
    else:
        lam_min = lam_max = abscissa = float("nan")

    return SpectralReport(lam_min, lam_max, float(cond), sigma_l, abscissa)


def abscissa(m):
    """Largest real part of the eigenvalues of a square matrix."""
    return float(np.linalg.eigvals(np.asarray(m, dtype=float)).real.max())


def pinv(m, tol=None):
    """Moore-Penrose pseudoinverse by SVD with an explicit rank cutoff.

    Singular values at or below tol are treated as zero; default tol is
    max(shape) * machine_eps * sigma_max.  The zero matrix maps to the zero
    matrix.
    """
    m = np.asarray(m, dtype=float)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    if tol is None:
        tol = max(m.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    s_inv = np.where(s > tol, np.divide(1.0, s, out=np.zeros_like(s), where=s > tol), 0.0)
    return (vt.T * s_inv) @ u.T


def solve_lyapunov(a_s, w, tol_residual=TOL_RESIDUAL):
    """Solve a_s' V + V a_s + W = 0 for stable a_s and PSD W.

    Raises UnstableMatrix when a_s is not Hurwitz, IterationDiverged when the
    Bartels-Stewart solve fails its residual contract.
    """
    a_s = np.asarray(a_s, dtype=float)
    w = symmetrize(w)
    if a_s.shape != w.shape:
        raise ValueError(f"shape mismatch: a_s {a_s.shape} vs w {w.shape}")
    if abscissa(a_s) >= 0.0:
        raise UnstableMatrix(f"spectral abscissa {abscissa(a_s):.3e} >= 0")
    v = symmetrize(solve_continuous_lyapunov(a_s.T, -w))
    res = np.linalg.norm(a_s.T @ v + v @ a_s + w, "fro")
    if res > tol_residual * (1.0 + np.linalg.norm(v, "fro")) * 100.0:
        raise IterationDiverged(f"Lyapunov residual {res:.3e} out of contract")
    return v


def care_residual(a, b, q, r, p):
    """Frobenius norm of P A + A' P + Q - P B R^{-1} B' P."""
    kb = np.linalg.solve(r, b.T @ p)
    return float(np.linalg.norm(p @ a + a.T @ p + q - (p @ b) @ kb, "fro"))


def _initial_stabilizing_gain(a, b):
    """Gain K with A - B K Hurwitz, via the eigenvalue-shift Lyapunov trick.

    Shift A by beta > spectral radius so A + beta*I is anti-stable, solve
    (A + beta I) Z + Z (A + beta I)' = 2 B B' (Z is PD for controllable (A,B)),
    and take K = B' Z^{-1}.  Returns the zero gain when A is already Hurwitz.
    """
    n, m = b.shape
    if abscissa(a) < 0.0:
        return np.zeros((m, n))
    beta = np.linalg.norm(a, "fro") + 0.5
    z = symmetrize(solve_continuous_lyapunov(a + beta * np.eye(n), 2.0 * b @ b.T))
    w = np.linalg.eigvalsh(z)
    if w[0] <= 1e-12 * max(1.0, w[-1]):
        raise NonStabilizable("shifted Lyapunov solution is singular; (A,B) not stabilizable")
    k0 = np.linalg.solve(z, b).T
    if abscissa(a - b @ k0) >= 0.0:
        raise NonStabilizable("eigenvalue-shift initialization failed to stabilize")
    return k0


def solve_care(a, b, q, r, tol_residual=TOL_RESIDUAL, max_iter=60):
    """Stabilizing solution of A'P + PA + Q - P B R^{-1} B' P = 0.

    Newton-Kleinman iteration: starting from a stabilizing gain, repeatedly
    solve the closed-loop Lyapunov equation
    (A - B K)' P + P (A - B K) + Q + K' R K = 0 and update K = R^{-1} B' P.
    Quadratically convergent with monotonically decreasing iterates.

    Raises NonStabilizable when no stabilizing initial gain exists and
    IterationDiverged when the residual fails to contract within max_iter.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    q = symmetrize(q)
    r = symmetrize(r)
    n, m = b.shape
    if a.shape != (n, n) or q.shape != (n, n) or r.shape != (m, m):
        raise ValueError(
            f"inconsistent shapes: a {a.shape}, b {b.shape}, q {q.shape}, r {r.shape}"
        )

    k = _initial_stabilizing_gain(a, b)
    best_res = np.inf
    for _ in range(max_iter):
        a_k = a - b @ k
        p = symmetrize(solve_continuous_lyapunov(a_k.T, -(q + k.T @ r @ k)))
        k = np.linalg.solve(r, b.T @ p)
        res = care_residual(a, b, q, r, p)
        if res <= tol_residual * (1.0 + np.linalg.norm(p, "fro")):
            return p
        if res < best_res:
            best_res = res
        elif res > 100.0 * best_res:
            raise IterationDiverged(f"Riccati residual diverging: {res:.3e}")
    raise IterationDiverged(
        f"Riccati residual {best_res:.3e} above tolerance after {max_iter} iterations"
    )
