"""Hot loops for covariance propagation.

The RK4 Lyapunov stepper is the only kernel that dominates runtime: a few
thousand steps on matrices no larger than 8x8, where numpy call overhead is
larger than the arithmetic.  It is compiled with numba when available.
Setting ``PULSEDOPTO_DISABLE_NUMBA=1`` forces the pure-numpy path, which is
kept numerically identical up to floating-point reassociation.
"""

import os
import warnings

import numpy as np

_DISABLE = os.environ.get("PULSEDOPTO_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
    "on",
)

try:
    import numba as _nb
except ImportError:  # pragma: no cover - exercised only without numba
    _nb = None
    if not _DISABLE:
        warnings.warn("numba not found; falling back to the numpy kernels")

HAVE_NUMBA = _nb is not None
USE_NUMBA = HAVE_NUMBA and not _DISABLE


def rk4_lyapunov_numpy(V0, A_half, D_half, h, keep_every):
    """Integrate dV/dt = A V + V A^T + D with fixed-step RK4.

    ``A_half``/``D_half`` hold the drift and diffusion sampled on the
    half-step grid t0 + k*h/2, k = 0..2n, so every RK4 stage lands on a
    sample.  The state is symmetrized after each step.  Returns the states
    at steps 0, keep_every, 2*keep_every, ... and always the final one.
    """
    n = (A_half.shape[0] - 1) // 2
    d = V0.shape[0]
    n_keep = n // keep_every + 1
    if n % keep_every:
        n_keep += 1
    out = np.empty((n_keep, d, d))
    V = V0.copy()
    out[0] = V
    j = 1
    for i in range(n):
        A0, Am, A1 = A_half[2 * i], A_half[2 * i + 1], A_half[2 * i + 2]
        D0, Dm, D1 = D_half[2 * i], D_half[2 * i + 1], D_half[2 * i + 2]
        k1 = A0 @ V + V @ A0.T + D0
        Vt = V + 0.5 * h * k1
        k2 = Am @ Vt + Vt @ Am.T + Dm
        Vt = V + 0.5 * h * k2
        k3 = Am @ Vt + Vt @ Am.T + Dm
        Vt = V + h * k3
        k4 = A1 @ Vt + Vt @ A1.T + D1
        V = V + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        V = 0.5 * (V + V.T)
        if (i + 1) % keep_every == 0 or i == n - 1:
            out[j] = V
            j += 1
    return out


def _lyap_rhs(A, V, D, out):
    d = V.shape[0]
    for r in range(d):
        for c in range(d):
            s = D[r, c]
            for k in range(d):
                s += A[r, k] * V[k, c] + V[r, k] * A[c, k]
            out[r, c] = s


def _rk4_lyapunov_loops(V0, A_half, D_half, h, keep_every):
    n = (A_half.shape[0] - 1) // 2
    d = V0.shape[0]
    n_keep = n // keep_every + 1
    if n % keep_every:
        n_keep += 1
    out = np.empty((n_keep, d, d))
    V = V0.copy()
    Vt = np.empty_like(V)
    k1 = np.empty_like(V)
    k2 = np.empty_like(V)
    k3 = np.empty_like(V)
    k4 = np.empty_like(V)
    out[0] = V
    j = 1
    for i in range(n):
        _lyap_rhs(A_half[2 * i], V, D_half[2 * i], k1)
        for r in range(d):
            for c in range(d):
                Vt[r, c] = V[r, c] + 0.5 * h * k1[r, c]
        _lyap_rhs(A_half[2 * i + 1], Vt, D_half[2 * i + 1], k2)
        for r in range(d):
            for c in range(d):
                Vt[r, c] = V[r, c] + 0.5 * h * k2[r, c]
        _lyap_rhs(A_half[2 * i + 1], Vt, D_half[2 * i + 1], k3)
        for r in range(d):
            for c in range(d):
                Vt[r, c] = V[r, c] + h * k3[r, c]
        _lyap_rhs(A_half[2 * i + 2], Vt, D_half[2 * i + 2], k4)
        for r in range(d):
            for c in range(d):
                V[r, c] += (h / 6.0) * (
                    k1[r, c] + 2.0 * k2[r, c] + 2.0 * k3[r, c] + k4[r, c]
                )
        for r in range(d):
            for c in range(r + 1, d):
                s = 0.5 * (V[r, c] + V[c, r])
                V[r, c] = s
                V[c, r] = s
        if (i + 1) % keep_every == 0 or i == n - 1:
            out[j] = V
            j += 1
    return out


if HAVE_NUMBA:
    # numba resolves globals when it compiles, so the stepper picks up the
    # jitted rhs through this rebinding
    _lyap_rhs = _nb.njit(cache=True)(_lyap_rhs)
    rk4_lyapunov_numba = _nb.njit(cache=True)(_rk4_lyapunov_loops)
else:  # pragma: no cover
    rk4_lyapunov_numba = None


def rk4_lyapunov(V0, A_half, D_half, h, keep_every=1):
    """Dispatch to the compiled stepper or the numpy fallback."""
    V0 = np.ascontiguousarray(V0, dtype=np.float64)
    A_half = np.ascontiguousarray(A_half, dtype=np.float64)
    D_half = np.ascontiguousarray(D_half, dtype=np.float64)
    if A_half.shape != D_half.shape or A_half.shape[1:] != V0.shape:
        raise ValueError(
            f"shape mismatch: V0 {V0.shape}, A {A_half.shape}, D {D_half.shape}"
        )
    if A_half.shape[0] % 2 != 1:
        raise ValueError("half-step samples must have odd length 2n+1")
    keep_every = max(int(keep_every), 1)
    if USE_NUMBA:
        return rk4_lyapunov_numba(V0, A_half, D_half, float(h), keep_every)
    return rk4_lyapunov_numpy(V0, A_half, D_half, float(h), keep_every)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
