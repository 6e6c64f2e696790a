"""Nonclassicality measures and Gaussian channels on covariance matrices.

All functions take plain arrays or anything with a ``.matrix`` attribute, in
the ``(X_1, P_1, X_2, P_2, ...)`` ordering with unit vacuum variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonPhysicalState

SIGMA_VAC = 1.0
_TWO_PI = 2.0 * math.pi


def _mat(V) -> np.ndarray:
    return np.asarray(getattr(V, "matrix", V), dtype=float)


def symplectic_form(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


@dataclass(frozen=True)
class HomodyneAngles:
    """Mixing weight ``phi`` and local-oscillator phases of the two detectors."""

    phi: float
    theta_B: float
    theta_R: float

    def vector(self) -> np.ndarray:
        return quadrature_vector(self.phi, self.theta_B, self.theta_R)


@dataclass(frozen=True)
class Measures:
    s_db: float
    e_n: float
    nu_minus: float
    lambda_min: float

    def as_dict(self) -> dict:
        return {
            "S_db": self.s_db,
            "E_N": self.e_n,
            "nu_minus": self.nu_minus,
            "lambda_min": self.lambda_min,
        }


def symplectic_eigenvalues(V) -> np.ndarray:
    """Symplectic spectrum, one value per mode, ascending.

    For positive-definite ``V = L L^T`` these are the singular values of the
    antisymmetric ``L^T Omega L``, which stays accurate when the spectrum
    spans many orders of magnitude.  Otherwise the moduli of the eigenvalues
    of ``i Omega V`` are used.
    """
    V = _mat(V)
    n = V.shape[0]
    if n % 2 or V.shape != (n, n):
        raise ValueError(f"need an even square matrix, got {V.shape}")
    Om = symplectic_form(n // 2)
    try:
        L = np.linalg.cholesky(0.5 * (V + V.T))
        s = np.linalg.svd(L.T @ Om @ L, compute_uv=False)
    except np.linalg.LinAlgError:
        s = np.abs(np.linalg.eigvals(1j * Om @ V))
    return np.sort(s)[::2]


def is_physical(V, tol: float = 1e-6) -> bool:
    return bool(symplectic_eigenvalues(V).min() >= 1.0 - tol)


def partial_transpose(V, mode: int = 1) -> np.ndarray:
    """Flip the sign of the momentum of ``mode`` (time reversal on it)."""
    V = _mat(V).copy()
    p = 2 * mode + 1
    V[p, :] *= -1.0
    V[:, p] *= -1.0
    return V


def apply_loss(V, etas) -> np.ndarray:
    """Mix every mode with vacuum on a beamsplitter of transmittance ``eta``.

    ``V' = S V S^T + (1 - S S^T)`` with ``S = diag(sqrt(eta_i) 1_2)``.
    A scalar ``etas`` applies to all modes.
    """
    V = _mat(V)
    n = V.shape[0] // 2
    etas = np.broadcast_to(np.asarray(etas, dtype=float), (n,))
    if np.any(etas < 0) or np.any(etas > 1):
        raise ValueError(f"transmittances must lie in [0, 1], got {etas}")
    s = np.repeat(np.sqrt(etas), 2)
    return V * np.outer(s, s) + np.diag(1.0 - s * s)


def rotate_modes(V, angles) -> np.ndarray:
    """Apply phase shifts ``X -> X cos a + P sin a`` mode by mode."""
    V = _mat(V)
    n = V.shape[0] // 2
    angles = np.broadcast_to(np.asarray(angles, dtype=float), (n,))
    R = np.zeros_like(V)
    for i, a in enumerate(angles):
        c, s = math.cos(a), math.sin(a)
        R[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = [[c, s], [-s, c]]
    return R @ V @ R.T


def smallest_eigenvalue(V) -> float:
    return float(np.linalg.eigvalsh(_mat(V))[0])


def to_db(variance: float) -> float:
    return -10.0 * math.log10(variance / SIGMA_VAC)


def two_mode_squeezing_db(V) -> float:
    """Squeezing of the smallest CM eigenvalue below shot noise, in dB."""
    return to_db(smallest_eigenvalue(V))


def log_negativity(V, base: float = math.e, tol: float = 1e-9) -> tuple[float, float]:
    """Logarithmic negativity of a two-mode state.

    ``nu_-^2 = (Sigma - sqrt(Sigma^2 - 4 det V)) / 2`` with
    ``Sigma = det V_L + det V_m - 2 det V_c``, evaluated in the
    cancellation-free form ``2 det V / (Sigma + sqrt(...))``.  ``det V``
    comes from a Cholesky factor when ``V`` is positive definite.

    Returns
    -------
    (e_n, nu_minus)
    """
    V = _mat(V)
    if V.shape != (4, 4):
        raise ValueError(f"log_negativity needs a 4x4 CM, got {V.shape}")
    V = 0.5 * (V + V.T)
    VL, Vm, Vc = V[:2, :2], V[2:, 2:], V[:2, 2:]
    sigma = np.linalg.det(VL) + np.linalg.det(Vm) - 2.0 * np.linalg.det(Vc)
    try:
        L = np.linalg.cholesky(V)
        det = float(np.prod(np.diag(L))) ** 2
    except np.linalg.LinAlgError:
        det = float(np.linalg.det(V))
    disc = sigma * sigma - 4.0 * det
    if disc < 0:
        if disc < -tol * max(sigma * sigma, 1.0):
            raise NonPhysicalState(
                f"Sigma^2 - 4 det V = {disc:.3g} < 0: not a valid two-mode CM"
            )
        disc = 0.0
    denom = sigma + math.sqrt(disc)
    if denom <= 0:
        raise NonPhysicalState(f"non-positive Seralian Sigma = {sigma:.3g}")
    nu = math.sqrt(max(2.0 * det / denom, 0.0))
    if nu == 0.0:
        raise NonPhysicalState("vanishing symplectic eigenvalue")
    e_n = max(0.0, -math.log(nu) / math.log(base))
    return e_n, nu


def quadrature_vector(phi: float, theta_B: float, theta_R: float) -> np.ndarray:
    """Weights ``c`` of the generalized quadrature, always of unit norm."""
    cp, sp = math.cos(phi), math.sin(phi)
    return np.array(
        [
            cp * math.cos(theta_B),
            cp * math.sin(theta_B),
            sp * math.cos(theta_R),
            sp * math.sin(theta_R),
        ]
    )


def gen_quad_variance(V, angles: HomodyneAngles) -> float:
    """Variance of ``X_B^{theta_B} cos(phi) + X_R^{theta_R} sin(phi)``."""
    V = _mat(V)
    if V.shape != (4, 4):
        raise ValueError(f"need a 4x4 CM, got {V.shape}")
    c = angles.vector()
    return float(c @ V @ c)


def angles_from_vector(c) -> HomodyneAngles:
    """Invert :func:`quadrature_vector` up to the overall sign of ``c``.

    The sign is fixed so that ``phi`` lies in ``[0, pi/2]`` and ``theta_B``
    in ``[0, pi)``; when the B weight vanishes ``theta_B = 0`` and
    ``theta_R`` is taken in ``[0, pi)`` instead.
    """
    c = np.asarray(c, dtype=float)
    c = c / np.linalg.norm(c)
    wB, wR = math.hypot(c[0], c[1]), math.hypot(c[2], c[3])
    phi = math.atan2(wR, wB)
    if wB > 1e-12:
        tB = math.atan2(c[1], c[0])
        if not 0.0 <= tB < math.pi:
            c = -c
            tB = math.atan2(c[1], c[0])
        if not 0.0 <= tB < math.pi:
            # c[1] is at rounding level and atan2 landed on -0 or pi
            if c[0] < 0.0:
                c = -c
            tB = 0.0
        tR = math.atan2(c[3], c[2]) % _TWO_PI if wR > 1e-12 else 0.0
    else:
        tB = 0.0
        tR = math.atan2(c[3], c[2]) % math.pi
    return HomodyneAngles(phi, tB % _TWO_PI, tR % _TWO_PI)


def optimize_angles(V) -> tuple[HomodyneAngles, float]:
    """Angles minimizing the generalized-quadrature variance.

    Every unit 4-vector is ``±quadrature_vector(...)``, so the minimum is the
    smallest eigenvalue of ``V`` and the minimizer its eigenvector.
    """
    V = _mat(V)
    if V.shape != (4, 4):
        raise ValueError(f"need a 4x4 CM, got {V.shape}")
    w, U = np.linalg.eigh(0.5 * (V + V.T))
    return angles_from_vector(U[:, 0]), float(w[0])


def angle_scan(V, theta_B, mode: str = "fixed") -> np.ndarray:
    """Generalized-quadrature variance as the B-detector phase is scanned.

    ``mode="fixed"`` keeps ``phi`` and ``theta_R`` at the global optimum
    found by :func:`optimize_angles`; ``mode="reoptimize"`` minimizes over
    both for every ``theta_B`` (the smallest eigenvalue of ``V`` compressed
    onto the span of the B quadrature and the full R mode).
    """
    V = _mat(V)
    th = np.atleast_1d(np.asarray(theta_B, dtype=float))
    if mode == "fixed":
        best, _ = optimize_angles(V)
        cp, sp = math.cos(best.phi), math.sin(best.phi)
        c = np.zeros((th.size, 4))
        c[:, 0] = cp * np.cos(th)
        c[:, 1] = cp * np.sin(th)
        c[:, 2] = sp * math.cos(best.theta_R)
        c[:, 3] = sp * math.sin(best.theta_R)
        return np.einsum("ni,ij,nj->n", c, V, c)
    if mode == "reoptimize":
        Q = np.zeros((th.size, 4, 3))
        Q[:, 0, 0] = np.cos(th)
        Q[:, 1, 0] = np.sin(th)
        Q[:, 2, 1] = 1.0
        Q[:, 3, 2] = 1.0
        sub = np.swapaxes(Q, 1, 2) @ V @ Q
        return np.linalg.eigvalsh(sub)[:, 0]
    raise ValueError(f"unknown scan mode {mode!r}")


def compute_measures(V, base: float = math.e) -> Measures:
    lam = smallest_eigenvalue(V)
    e_n, nu = log_negativity(V, base=base)
    return Measures(s_db=to_db(lam), e_n=e_n, nu_minus=nu, lambda_min=lam)
