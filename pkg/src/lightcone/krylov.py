"""Lanczos approximation of exp(-i t H) b for Hermitian H."""

from __future__ import annotations

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import NumericalFailure

DEFAULT_TOL = 1e-10
DEFAULT_MAX_DIM = 60
MAX_HALVINGS = 20


def _lanczos_step(h, b: np.ndarray, t: float, tol: float, max_dim: int):
    """One Krylov step; returns (vector, converged, diagnostics).

    The error estimate is the standard a-posteriori one,
    beta_m * |e_m^T exp(-i t T_m) e_1|, relative to |b|.
    """
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return np.zeros_like(b, dtype=complex), True, {"dim": 0, "error": 0.0}
    dim_space = b.shape[0]
    m_cap = min(max_dim, dim_space)
    basis = np.zeros((m_cap + 1, dim_space), dtype=complex)
    alphas, betas = [], []
    basis[0] = b / norm_b
    err = np.inf
    for m in range(m_cap):
        w = h @ basis[m]
        a = float(np.real(np.vdot(basis[m], w)))
        w = w - a * basis[m]
        if m > 0:
            w = w - betas[-1] * basis[m - 1]
        # full reorthogonalization; cheap at these subspace sizes
        w = w - basis[: m + 1].T @ (basis[: m + 1].conj() @ w)
        beta = float(np.linalg.norm(w))
        alphas.append(a)
        evals, evecs = eigh_tridiagonal(np.array(alphas), np.array(betas))
        coeffs = evecs @ (np.exp(-1j * t * evals) * evecs[0].conj())
        breakdown = beta <= 1e-13 * max(1.0, abs(a))
        err = 0.0 if breakdown or m + 1 == dim_space else beta * abs(coeffs[-1])
        if err <= tol:
            out = norm_b * (basis[: m + 1].T @ coeffs)
            return out, True, {"dim": m + 1, "error": err}
        betas.append(beta)
        basis[m + 1] = w / beta
    return None, False, {"dim": m_cap, "error": err}


def expm_krylov(h, b: np.ndarray, t: float, tol: float = DEFAULT_TOL, max_dim: int = DEFAULT_MAX_DIM):
    """Compute exp(-i t h) @ b by Lanczos with adaptive subspace size.

    When ``max_dim`` Lanczos vectors are not enough for the full interval the
    step is halved and applied repeatedly.  Raises ``NumericalFailure`` if the
    tolerance is still missed after ``MAX_HALVINGS`` halvings.
    """
    b = np.asarray(b, dtype=complex)
    for halvings in range(MAX_HALVINGS + 1):
        n_steps = 1 << halvings
        dt = t / n_steps
        x = b
        ok = True
        for _ in range(n_steps):
            x, ok, diag = _lanczos_step(h, x, dt, tol / n_steps, max_dim)
            if not ok:
                break
        if ok:
            return x
    raise NumericalFailure(
        "Krylov exponential did not converge",
        {"t": t, "tol": tol, "max_dim": max_dim, "halvings": MAX_HALVINGS, **diag},
    )


def expm_krylov_columns(h, block: np.ndarray, t: float, tol: float = DEFAULT_TOL, max_dim: int = DEFAULT_MAX_DIM):
    """Apply exp(-i t h) to every column of ``block``."""
    out = np.empty(block.shape, dtype=complex)
    for k in range(block.shape[1]):
        out[:, k] = expm_krylov(h, block[:, k], t, tol, max_dim)
    return out
