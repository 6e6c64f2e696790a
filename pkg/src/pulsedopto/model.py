"""System parameters and the linear generators of the optomechanical dynamics.

Conventions
-----------
All rates are in units of the cavity amplitude decay rate ``kappa`` and all
times in ``1/kappa``.  Quadratures obey ``[X, P] = 2i`` so the vacuum has unit
variance.  The detuning is ``Delta = omega_cav - omega_pump``: the entangling
(blue) pulse has ``Delta = -Omega`` and the readout (red) pulse
``Delta = +Omega``.

The lab-frame state vector is ``(X_c, P_c, X_m, P_m)``.  The co-rotating
frame is ``u = R(t) v`` with ``R = R2(Delta t) (+) R2(Omega t)`` and
``v = (X_c^(c), X_c^(s), X_m^(c), X_m^(s))``, the slowly varying quadrature
amplitudes.
"""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass

import numpy as np

DEFAULT_SMALL_GAMMA = 1e-6

_J = np.array([[0.0, 1.0], [-1.0, 0.0]])


class PulseKind(enum.Enum):
    BLUE = "blue"
    RED = "red"
    OFF = "off"

    def couplings(self, g: float) -> tuple[float, float]:
        """Return ``(g_b, g_r)``: upper- and lower-sideband coupling rates."""
        if self is PulseKind.BLUE:
            return g, 0.0
        if self is PulseKind.RED:
            return 0.0, g
        return 0.0, 0.0

    def detuning(self, omega: float) -> float:
        if self is PulseKind.BLUE:
            return -omega
        if self is PulseKind.RED:
            return omega
        return 0.0


class Frame(enum.Enum):
    LAB = "lab"
    RWA = "rwa"
    BEYOND_RWA = "beyond_rwa"

    @classmethod
    def parse(cls, value) -> "Frame":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {"brwa": "beyond_rwa", "full": "beyond_rwa", "beyondrwa": "beyond_rwa"}
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class SystemParams:
    """Physical rates, efficiencies and pulse schedule.

    ``gamma`` and ``n_th`` are stored; the reheating rate ``Gamma`` is derived.
    Use :meth:`from_rates` to specify ``Gamma`` directly, in which case the
    damping defaults to a negligible ``1e-6`` and ``n_th = Gamma / gamma``.
    ``eta_M`` is the transmittance applied to the mechanical mode when the
    pulse-mechanics state is scored as in the lossy-readout model.
    ``tau_R = None`` means the readout lasts as long as the entangling pulse.
    """

    kappa: float = 1.0
    g: float = 0.6
    omega: float = 2.0
    gamma: float = DEFAULT_SMALL_GAMMA
    n_th: float = 0.06 / DEFAULT_SMALL_GAMMA
    n0: float = 1e4
    eta_B: float = 0.8
    eta_R: float = 0.8
    eta_M: float = 0.8
    tau: float = 8.0
    tau_D: float = 0.0
    tau_R: float | None = None

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        for name in ("kappa", "g", "omega", "gamma", "tau", "tau_D"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                out.append(f"{name} must be a finite rate >= 0 (got {v!r})")
        if not self.kappa > 0:
            out.append(f"kappa must be > 0 (got {self.kappa!r})")
        for name in ("n_th", "n0"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                out.append(f"{name} must be >= 0 (got {v!r})")
        for name in ("eta_B", "eta_R", "eta_M"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                out.append(f"{name} must lie in [0, 1] (got {v!r})")
        if self.tau_R is not None and (not math.isfinite(self.tau_R) or self.tau_R < 0):
            out.append(f"tau_R must be >= 0 (got {self.tau_R!r})")
        return out

    @classmethod
    def from_rates(cls, Gamma: float | None = None, gamma: float | None = None, **kw):
        """Build parameters from the reheating rate ``Gamma = gamma * n_th``."""
        if Gamma is None:
            return cls(**({} if gamma is None else {"gamma": gamma}), **kw)
        if Gamma < 0:
            raise ValueError(f"Gamma must be >= 0 (got {Gamma!r})")
        if gamma is None:
            gamma = DEFAULT_SMALL_GAMMA
        if gamma == 0.0:
            if Gamma > 0:
                raise ValueError("Gamma > 0 needs a nonzero damping gamma")
            return cls(gamma=0.0, n_th=0.0, **kw)
        return cls(gamma=gamma, n_th=Gamma / gamma, **kw)

    @property
    def Gamma(self) -> float:
        return self.gamma * self.n_th

    @property
    def readout_duration(self) -> float:
        return self.tau if self.tau_R is None else self.tau_R

    @property
    def thermal_variance(self) -> float:
        return 2.0 * self.n_th + 1.0

    def replace(self, **changes) -> "SystemParams":
        """Copy with changes; ``Gamma`` rescales ``n_th`` at fixed ``gamma``."""
        Gamma = changes.pop("Gamma", None)
        new = dataclasses.replace(self, **changes)
        if Gamma is None:
            return new
        gamma = new.gamma if new.gamma > 0 else DEFAULT_SMALL_GAMMA
        if Gamma == 0:
            return dataclasses.replace(new, n_th=0.0)
        return dataclasses.replace(new, gamma=gamma, n_th=Gamma / gamma)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _resolve_detuning(delta, omega):
    if isinstance(delta, PulseKind):
        return delta.detuning(omega)
    return float(delta)


def build_drift_lab(p: SystemParams, delta, g: float | None = None) -> np.ndarray:
    """Lab-frame drift matrix for ``(X_c, P_c, X_m, P_m)``.

    ``delta`` is a detuning value or a :class:`PulseKind`; an ``OFF`` pulse
    also switches the coupling off.  The cavity block is the Heisenberg
    motion generated by ``Delta (X^2 + P^2) / 4``, i.e. ``dX_c/dt = Delta P_c``,
    the same rotation sense as the mechanical block.
    """
    if g is None:
        g = 0.0 if delta is PulseKind.OFF else p.g
    d = _resolve_detuning(delta, p.omega)
    k, w = p.kappa, p.omega
    return np.array(
        [
            [-k, d, 0.0, 0.0],
            [-d, -k, 2.0 * g, 0.0],
            [0.0, 0.0, 0.0, w],
            [2.0 * g, 0.0, -w, -p.gamma],
        ]
    )


def build_drift_rwa(p: SystemParams, kind: PulseKind) -> np.ndarray:
    """Co-rotating drift with the terms oscillating at 2*Omega dropped.

    A blue pulse couples ``X_c^(c) <-> X_m^(s)`` and ``X_c^(s) <-> X_m^(c)``
    with equal-sign entries (parametric amplification); a red pulse flips the
    sign of the ``(0, 3)`` and ``(2, 1)`` entries (state swap).
    """
    g_b, g_r = kind.couplings(p.g)
    A = np.diag([-p.kappa, -p.kappa, -0.5 * p.gamma, -0.5 * p.gamma])
    A[0, 3] = A[2, 1] = g_b - g_r
    A[1, 2] = A[3, 0] = g_r + g_b
    return A


def rotation_2(alpha):
    c, s = np.cos(alpha), np.sin(alpha)
    return np.stack([np.stack([c, s], -1), np.stack([-s, c], -1)], -2)


def rotation_matrix(delta, omega, t):
    """Block rotation ``R2(Delta t) (+) R2(Omega t)``; ``t`` may be an array."""
    t = np.asarray(t, dtype=float)
    delta = float(delta)
    omega = float(omega)
    R = np.zeros(t.shape + (4, 4))
    R[..., :2, :2] = rotation_2(delta * t)
    R[..., 2:, 2:] = rotation_2(omega * t)
    return R


def free_rotation_generator(delta, omega) -> np.ndarray:
    """Generator ``F`` with ``dR/dt = F R`` for :func:`rotation_matrix`."""
    F = np.zeros((4, 4))
    F[:2, :2] = float(delta) * _J
    F[2:, 2:] = float(omega) * _J
    return F


def build_drift_beyond_rwa(p: SystemParams, kind: PulseKind, t) -> np.ndarray:
    """Co-rotating drift ``R^-1 (A_lab R - dR/dt)`` keeping the 2*Omega terms.

    Because ``dR/dt = F R`` this is ``R^T (A_lab - F) R``.  Vectorized over ``t``.
    """
    delta = kind.detuning(p.omega)
    A = build_drift_lab(p, kind) - free_rotation_generator(delta, p.omega)
    R = rotation_matrix(delta, p.omega, t)
    return np.swapaxes(R, -1, -2) @ A @ R


def build_diffusion(p: SystemParams, frame, t=0.0) -> np.ndarray:
    """Noise correlation matrix for the four system quadratures.

    ``RWA`` uses ``diag(2k, 2k, 2Gamma, 2Gamma)``.  ``LAB`` feeds thermal force
    noise ``2 gamma (2 n_th + 1)`` into ``P_m`` only, and ``BEYOND_RWA`` is that
    lab noise rotated into the co-rotating frame, ``R(t)^T D_lab R(t)``
    (vectorized over ``t``).
    """
    frame = Frame.parse(frame)
    k2 = 2.0 * p.kappa
    if frame is Frame.RWA:
        return np.diag([k2, k2, 2.0 * p.Gamma, 2.0 * p.Gamma])
    D_lab = np.diag([k2, k2, 0.0, 2.0 * p.gamma * p.thermal_variance])
    if frame is Frame.LAB:
        return D_lab
    # the cavity block is isotropic, so only the mechanical rotation matters
    R = rotation_matrix(0.0, p.omega, t)
    return np.swapaxes(R, -1, -2) @ D_lab @ R
