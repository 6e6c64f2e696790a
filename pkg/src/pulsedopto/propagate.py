"""Covariance-matrix time evolution.

The workhorse is :func:`solve_lyapunov`, a fixed-step RK4 integrator for
``dV/dt = A(t) V + V A(t)^T + D(t)``.  Leaking pulses are tracked by
appending their two quadratures to the state (:func:`augment_with_pulse`);
a pulse quadrature is the overlap of the output field with a temporal mode
``f`` (:func:`temporal_mode`), so it obeys ``dX_out/dt = f(t) x_out(t)``
with ``x_out = sqrt(2 kappa) X_c - X_in``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson, trapezoid
from scipy.linalg import expm

from . import _accel
from .errors import DegenerateProfile, DimensionMismatch, NonPhysicalState
from .measures import symplectic_eigenvalues
from .model import SystemParams

PHYSICAL_TOL = 1e-6

# mechanics -> cavity transfer element used for both pulses, 0-based
# (X_c^(s) driven by X_m^(c)); the mirror element (0, 3) has equal magnitude
DEFAULT_MODE_ELEMENT = (1, 2)


def default_dt(p: SystemParams) -> float:
    """Largest step resolving both the cavity and the mechanical rates."""
    dt = 0.01 / p.kappa
    if p.omega > 0:
        dt = min(dt, 0.05 / p.omega)
    return dt


def _as_matrix(V):
    return np.asarray(getattr(V, "matrix", V), dtype=float)


@dataclass
class CovarianceMatrix:
    """Symmetric quadrature covariance matrix with one label per mode.

    Row order is ``(X_1, P_1, X_2, P_2, ...)`` following ``labels``.
    """

    matrix: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        self.matrix = np.array(self.matrix, dtype=float)
        self.labels = tuple(self.labels)
        n = self.matrix.shape
        if len(n) != 2 or n[0] != n[1] or n[0] != 2 * len(self.labels):
            raise DimensionMismatch(
                f"matrix of shape {n} does not fit modes {self.labels}"
            )

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    @property
    def n_modes(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> list[int]:
        try:
            i = self.labels.index(label)
        except ValueError:
            raise KeyError(f"no mode {label!r} in {self.labels}") from None
        return [2 * i, 2 * i + 1]

    def select(self, labels: Sequence[str]) -> "CovarianceMatrix":
        """Reduced state of the named modes (partial trace), in that order."""
        idx = [j for lab in labels for j in self.index(lab)]
        return CovarianceMatrix(self.matrix[np.ix_(idx, idx)], tuple(labels))

    def block(self, a: str, b: str) -> np.ndarray:
        return self.matrix[np.ix_(self.index(a), self.index(b))]

    def is_physical(self, tol: float = PHYSICAL_TOL) -> bool:
        return bool(np.min(symplectic_eigenvalues(self.matrix)) >= 1.0 - tol)


@dataclass
class ModeProfile:
    """Temporal mode ``f(t)`` sampled on a uniform grid starting at t = 0."""

    samples: np.ndarray
    dt: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1 or self.samples.size < 2:
            raise ValueError("a profile needs at least two samples")
        if not np.any(self.samples):
            raise DegenerateProfile("profile is identically zero")

    @property
    def duration(self) -> float:
        return self.dt * (self.samples.size - 1)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.samples.size)

    def norm(self) -> float:
        """Squared norm on the sample grid.

        Simpson's rule when the interval count is even, which is exactly
        the quadrature RK4 applies to a half-step-sampled source.
        """
        sq = self.samples**2
        if (sq.size - 1) % 2 == 0:
            return float(simpson(sq, dx=self.dt))
        return float(trapezoid(sq, dx=self.dt))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        # relative slack absorbs rounding of window edges
        inside = (t >= -1e-9 * self.dt) & (t <= self.duration + 1e-9 * self.dt)
        return np.where(inside, np.interp(t, self.times, self.samples), 0.0)


@dataclass
class LyapunovSystem:
    """Time-dependent drift and diffusion suppliers of a fixed dimension.

    ``drift`` and ``diffusion`` take an array of times and return stacked
    ``(len(t), dim, dim)`` matrices.
    """

    drift: Callable[[np.ndarray], np.ndarray]
    diffusion: Callable[[np.ndarray], np.ndarray]
    dim: int
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not self.labels:
            self.labels = tuple(f"m{i}" for i in range(self.dim // 2))
        self.labels = tuple(self.labels)
        if 2 * len(self.labels) != self.dim:
            raise DimensionMismatch(f"{self.dim} quadratures but labels {self.labels}")

    @classmethod
    def constant(cls, A, D, labels=()) -> "LyapunovSystem":
        A = np.array(A, dtype=float)
        D = np.array(D, dtype=float)
        if A.shape != D.shape or A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"drift {A.shape} vs diffusion {D.shape}")

        def drift(t):
            return np.broadcast_to(A, (np.size(t),) + A.shape)

        def diffusion(t):
            return np.broadcast_to(D, (np.size(t),) + D.shape)

        return cls(drift, diffusion, A.shape[0], tuple(labels))

    def sample(self, times) -> tuple[np.ndarray, np.ndarray]:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        A = np.asarray(self.drift(times), dtype=float)
        D = np.asarray(self.diffusion(times), dtype=float)
        want = (times.size, self.dim, self.dim)
        if A.shape != want or D.shape != want:
            raise DimensionMismatch(
                f"suppliers returned {A.shape} / {D.shape}, expected {want}"
            )
        return A, D


@dataclass
class LyapunovSolution:
    times: np.ndarray
    states: np.ndarray
    labels: tuple[str, ...]

    @property
    def final(self) -> CovarianceMatrix:
        return CovarianceMatrix(self.states[-1], self.labels)

    def __len__(self):
        return len(self.times)


def matrix_exponential(A, t: float = 1.0) -> np.ndarray:
    """``exp(A t)`` by scaling and squaring with a Pade approximant."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return expm(np.asarray(A, dtype=float) * t)


def propagator_samples(A, dt: float, n: int) -> np.ndarray:
    """``exp(A k dt)`` for k = 0..n-1 by repeated multiplication."""
    A = np.asarray(A, dtype=float)
    step = expm(A * dt)
    out = np.empty((n,) + A.shape)
    out[0] = np.eye(A.shape[0])
    for k in range(1, n):
        out[k] = out[k - 1] @ step
    return out


def _check_physical(states, labels, tol, t):
    # the system block is the cavity and mechanics, i.e. the first two modes
    m = min(states.shape[-1], 4)
    for V, tk in zip(states, t):
        nu = symplectic_eigenvalues(V[:m, :m])
        if nu.min() < 1.0 - tol:
            raise NonPhysicalState(
                f"symplectic eigenvalue {nu.min():.9g} < 1 at t = {tk:.6g} "
                f"(modes {labels[: m // 2]})"
            )


def solve_lyapunov(
    sys: LyapunovSystem,
    V0,
    t_span: tuple[float, float],
    dt: float = 0.01,
    keep_every: int = 1,
    check_physical: bool = True,
    tol: float = PHYSICAL_TOL,
) -> LyapunovSolution:
    """Integrate the Lyapunov equation with fixed-step RK4.

    Parameters
    ----------
    sys : LyapunovSystem
        Drift and diffusion suppliers.
    V0 : array_like or CovarianceMatrix
        Initial covariance matrix.
    t_span : (float, float)
        Start and end time.  The interval is split into the smallest number
        of equal steps not longer than ``dt``.
    keep_every : int
        Store every ``keep_every``-th step; the final state is always kept.
    check_physical : bool
        Raise :class:`NonPhysicalState` when the cavity-mechanics block of
        any stored state has a symplectic eigenvalue below ``1 - tol``.

    Returns
    -------
    LyapunovSolution
    """
    V0 = _as_matrix(V0)
    if V0.shape != (sys.dim, sys.dim):
        raise DimensionMismatch(f"V0 is {V0.shape}, system has dim {sys.dim}")
    t0, t1 = map(float, t_span)
    if t1 < t0:
        raise ValueError("t_span must be increasing")
    if dt <= 0:
        raise ValueError("dt must be positive")
    T = t1 - t0
    if T == 0.0:
        return LyapunovSolution(np.array([t0]), V0[None].copy(), sys.labels)
    n = max(1, math.ceil(T / dt - 1e-9))
    h = T / n
    half = t0 + 0.5 * h * np.arange(2 * n + 1)
    half[-1] = t1
    A, D = sys.sample(half)
    keep_every = max(int(keep_every), 1)
    states = _accel.rk4_lyapunov(0.5 * (V0 + V0.T), A, D, h, keep_every)
    steps = list(range(0, n + 1, keep_every))
    if steps[-1] != n:
        steps.append(n)
    times = t0 + h * np.asarray(steps, dtype=float)
    times[-1] = t1
    if check_physical:
        _check_physical(states, sys.labels, tol, times)
    return LyapunovSolution(times, states, sys.labels)


def temporal_mode(
    A,
    tau: float,
    element: tuple[int, int] = DEFAULT_MODE_ELEMENT,
    dt: float = 0.005,
) -> ModeProfile:
    """Normalized temporal mode ``f(t) ∝ exp(A t)[element]`` on ``[0, tau]``.

    The grid spacing is the largest value not above ``dt`` that splits
    ``tau`` into an even number of intervals.  Raises
    :class:`DegenerateProfile` when the element vanishes on the window.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    n = max(2, math.ceil(tau / dt - 1e-9))
    n += n % 2
    h = tau / n
    r, c = element
    M = propagator_samples(A, h, n + 1)[:, r, c]
    if np.max(np.abs(M)) < 1e-12:
        raise DegenerateProfile(
            f"element {element} of exp(A t) vanishes on [0, {tau}]: "
            "no mechanics-to-light transfer"
        )
    prof = ModeProfile(M, h)
    prof.samples = M / math.sqrt(prof.norm())
    return prof


def augment_with_pulse(
    sys: LyapunovSystem,
    f: ModeProfile | None,
    kappa: float,
    t0: float = 0.0,
    label: str = "pulse",
) -> LyapunovSystem:
    """Append the two quadratures of a leaking pulse to ``sys``.

    The pulse collects the output field through ``f(t - t0)``; outside its
    window (or for ``f=None``) the pulse quadratures are frozen.  The cavity
    must be the first mode of ``sys``.
    """
    if sys.dim not in (4, 6):
        raise DimensionMismatch(f"can only augment 4- or 6-dim systems, got {sys.dim}")
    if label in sys.labels:
        raise DimensionMismatch(f"mode {label!r} already present")
    d = sys.dim
    s2k = math.sqrt(2.0 * kappa)

    def weights(t):
        if f is None:
            return np.zeros(np.size(t))
        return f(np.asarray(t, dtype=float) - t0)

    def drift(t):
        base = sys.drift(t)
        out = np.zeros((base.shape[0], d + 2, d + 2))
        out[:, :d, :d] = base
        w = s2k * weights(t)
        out[:, d, 0] = w
        out[:, d + 1, 1] = w
        return out

    def diffusion(t):
        base = sys.diffusion(t)
        out = np.zeros((base.shape[0], d + 2, d + 2))
        out[:, :d, :d] = base
        w = weights(t)
        out[:, d, d] = out[:, d + 1, d + 1] = w * w
        cross = -s2k * w
        out[:, d, 0] = out[:, 0, d] = cross
        out[:, d + 1, 1] = out[:, 1, d + 1] = cross
        return out

    return LyapunovSystem(drift, diffusion, d + 2, sys.labels + (label,))


def free_segment(V: CovarianceMatrix, tau_D: float, p: SystemParams) -> CovarianceMatrix:
    """Closed-form evolution without optomechanical coupling.

    The mechanics rethermalizes at rate ``gamma`` toward ``2 n_th + 1``, the
    cavity relaxes to vacuum at rate ``2 kappa``, and completed pulses are
    untouched.  Cross-correlations decay with the amplitude rates.
    """
    if tau_D < 0:
        raise ValueError("tau_D must be >= 0")
    if tau_D == 0:
        return CovarianceMatrix(V.matrix.copy(), V.labels)
    M = V.matrix.copy()
    amp = np.ones(M.shape[0])
    if "mech" in V.labels:
        amp[V.index("mech")] = math.exp(-0.5 * p.gamma * tau_D)
    if "cav" in V.labels:
        amp[V.index("cav")] = math.exp(-p.kappa * tau_D)
    out = M * np.outer(amp, amp)
    if "mech" in V.labels:
        i = V.index("mech")
        out[np.ix_(i, i)] += (1.0 - math.exp(-p.gamma * tau_D)) * p.thermal_variance * np.eye(2)
    if "cav" in V.labels:
        i = V.index("cav")
        out[np.ix_(i, i)] += (1.0 - math.exp(-2.0 * p.kappa * tau_D)) * np.eye(2)
    return CovarianceMatrix(out, V.labels)
