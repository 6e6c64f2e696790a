"""The two-pulse protocol: entangling blue pulse, free delay, red readout.

The 8-dimensional state is ordered ``[cav, mech, pulseB, pulseR]``.  Each
window integrates the system with both pulse slots present; the slot that is
not collecting light is frozen (zero drift row, zero noise).  The reference
phase of each homodyne local oscillator is chosen so that the detected
quadratures line up with the mechanical ones: the output pulse is rotated by
``pi/2`` before losses and measures are applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import measures as ms
from .errors import DegenerateProfile, PulsedOptoError
from .model import (
    Frame,
    PulseKind,
    SystemParams,
    build_diffusion,
    build_drift_beyond_rwa,
    build_drift_rwa,
)
from .propagate import (
    DEFAULT_MODE_ELEMENT,
    CovarianceMatrix,
    LyapunovSystem,
    ModeProfile,
    augment_with_pulse,
    default_dt,
    free_segment,
    solve_lyapunov,
    temporal_mode,
)

LO_REFERENCE_ANGLE = 0.5 * math.pi
SYSTEM_LABELS = ("cav", "mech")
TARGETS = ("S_db", "E_N", "nu_minus", "lambda_min")
BIPARTITIONS = ("pm", "pp")

# number of stored states per window used for the physicality check
_CHECK_POINTS = 16


@dataclass(frozen=True)
class ProtocolResult:
    """Detected bipartite states and their measures.

    ``readout_transfer`` is the fraction ``(T - 1) / T`` of the mechanical
    excess noise found in the readout pulse, a diagnostic for the effective
    beamsplitter of the red window.
    """

    cm_pulse_mech: CovarianceMatrix
    cm_pulse_pulse: CovarianceMatrix
    measures_pm: ms.Measures
    measures_pp: ms.Measures
    params_used: SystemParams
    frame: Frame
    tau_i: float
    tau_f: float
    profile_B: ModeProfile
    profile_R: ModeProfile
    readout_transfer: float

    def measures(self, bipartition: str) -> ms.Measures:
        if bipartition == "pm":
            return self.measures_pm
        if bipartition == "pp":
            return self.measures_pp
        raise ValueError(f"bipartition must be one of {BIPARTITIONS}, got {bipartition!r}")


@dataclass(frozen=True)
class EnsembleStats:
    """Summary of a target measure over a perturbed-parameter ensemble.

    ``count`` is the number of requested samples; failed samples are listed
    in ``errors`` as ``(index, message)`` and excluded from the statistics.
    """

    target: str
    mean: float
    std: float
    min: float
    max: float
    count: int
    values: tuple = field(repr=False)
    errors: tuple = ()

    @property
    def n_ok(self) -> int:
        return self.count - len(self.errors)


def gain(p: SystemParams) -> float:
    """Adiabatic two-mode squeezing gain ``exp(2 g^2 tau / kappa)``."""
    return math.exp(2.0 * p.g**2 * p.tau / p.kappa)


def adiabatic_blue(G: float, n0: float) -> CovarianceMatrix:
    """State of ``[pulseB, mech]`` after an ideal two-mode squeezer of gain G.

    The input pulse is vacuum and the mechanics thermal with occupation n0.
    """
    if not G >= 1.0:
        raise ValueError(f"gain must be >= 1, got {G!r}")
    if n0 < 0:
        raise ValueError("n0 must be >= 0")
    m = 2.0 * n0 + 1.0
    a = G + (G - 1.0) * m
    b = G * m + G - 1.0
    c = 2.0 * math.sqrt(G * (G - 1.0)) * (n0 + 1.0)
    V = np.zeros((4, 4))
    V[:2, :2] = a * np.eye(2)
    V[2:, 2:] = b * np.eye(2)
    V[:2, 2:] = V[2:, :2] = c * np.diag([1.0, -1.0])
    return CovarianceMatrix(V, ("pulseB", "mech"))


def adiabatic_red(T: float, V_in) -> CovarianceMatrix:
    """Swap the mechanics into a vacuum readout pulse on a beamsplitter.

    ``R_out = (R_in + sqrt(T - 1) a_m) / sqrt(T)``, so a fraction
    ``(T - 1) / T`` of the mechanical state is transferred; ``T = 1`` is no
    readout and ``T -> inf`` a perfect swap.  ``V_in`` is ordered
    ``[pulseB, mech]``; the result is ``[pulseB, pulseR]``.
    """
    if not T >= 1.0:
        raise ValueError(f"T must be >= 1, got {T!r}")
    V = np.asarray(getattr(V_in, "matrix", V_in), dtype=float)
    if V.shape != (4, 4):
        raise ValueError(f"V_in must be 4x4, got {V.shape}")
    t = math.sqrt((T - 1.0) / T)
    r = math.sqrt(1.0 / T)
    S = np.diag([1.0, 1.0, t, t])
    out = S @ V @ S.T
    out[2:, 2:] += r * r * np.eye(2)
    return CovarianceMatrix(out, ("pulseB", "pulseR"))


def _base_system(p: SystemParams, kind: PulseKind, frame: Frame) -> LyapunovSystem:
    if frame is Frame.RWA:
        return LyapunovSystem.constant(
            build_drift_rwa(p, kind), build_diffusion(p, Frame.RWA), SYSTEM_LABELS
        )
    if frame is Frame.BEYOND_RWA:
        return LyapunovSystem(
            lambda t: build_drift_beyond_rwa(p, kind, t),
            lambda t: build_diffusion(p, Frame.BEYOND_RWA, t),
            4,
            SYSTEM_LABELS,
        )
    raise ValueError(f"the protocol runs in the RWA or beyond-RWA frame, not {frame}")


def _grid(duration: float, dt: float) -> tuple[int, float]:
    n = max(1, math.ceil(duration / dt - 1e-9))
    return n, duration / n


def _profile(p: SystemParams, kind: PulseKind, duration: float, dt: float) -> ModeProfile:
    # sample f on the integrator's half-step grid so the RK4 quadrature of
    # f^2 is exactly the profile norm
    _, h = _grid(duration, dt)
    return temporal_mode(build_drift_rwa(p, kind), duration, DEFAULT_MODE_ELEMENT, 0.5 * h)


def _window(sys, V0, t0, duration, dt):
    n, _ = _grid(duration, dt)
    sol = solve_lyapunov(
        sys,
        V0,
        (t0, t0 + duration),
        dt=dt,
        keep_every=max(1, n // _CHECK_POINTS),
    )
    return sol.final


def _detected(V: CovarianceMatrix, labels, etas) -> CovarianceMatrix:
    sub = V.select(labels)
    angles = [LO_REFERENCE_ANGLE if lab.startswith("pulse") else 0.0 for lab in labels]
    M = ms.rotate_modes(sub.matrix, angles)
    return CovarianceMatrix(ms.apply_loss(M, etas), sub.labels)


def _resolve(p: SystemParams, frame, dt):
    frame = Frame.parse(frame)
    if dt is None:
        dt = default_dt(p)
    if dt <= 0:
        raise ValueError("dt must be positive")
    return frame, dt


def _initial_state(p: SystemParams, n_pulses: int) -> np.ndarray:
    m = 2.0 * p.n0 + 1.0
    return np.diag([1.0, 1.0, m, m] + [0.0] * (2 * n_pulses))


def run_blue(
    p: SystemParams, frame=Frame.RWA, dt: float | None = None
) -> tuple[CovarianceMatrix, ModeProfile]:
    """Entangling pulse alone.

    Returns the lossy ``[pulseB, mech]`` state at ``t = tau`` (``eta_B`` on
    the pulse, ``eta_M`` on the mechanics) and the pulse's temporal mode.
    """
    frame, dt = _resolve(p, frame, dt)
    f = _profile(p, PulseKind.BLUE, p.tau, dt)
    sys = augment_with_pulse(_base_system(p, PulseKind.BLUE, frame), f, p.kappa, 0.0, "pulseB")
    V = _window(sys, _initial_state(p, 1), 0.0, p.tau, dt)
    return _detected(V, ("pulseB", "mech"), [p.eta_B, p.eta_M]), f


def run_full(p: SystemParams, frame=Frame.RWA, dt: float | None = None) -> ProtocolResult:
    """Blue window ``[0, tau]``, delay ``tau_D``, red window of ``tau_R``."""
    frame, dt = _resolve(p, frame, dt)
    tau_i = p.tau + p.tau_D
    tau_f = tau_i + p.readout_duration
    f_B = _profile(p, PulseKind.BLUE, p.tau, dt)
    blue = augment_with_pulse(
        augment_with_pulse(_base_system(p, PulseKind.BLUE, frame), f_B, p.kappa, 0.0, "pulseB"),
        None,
        p.kappa,
        label="pulseR",
    )
    V = _window(blue, _initial_state(p, 2), 0.0, p.tau, dt)
    pm = _detected(V, ("pulseB", "mech"), [p.eta_B, p.eta_M])
    mech_before = V.block("mech", "mech")

    V = free_segment(V, p.tau_D, p)

    if p.readout_duration > 0 and p.g > 0:
        f_R = _profile(p, PulseKind.RED, p.readout_duration, dt)
        red = augment_with_pulse(
            augment_with_pulse(_base_system(p, PulseKind.RED, frame), None, p.kappa, label="pulseB"),
            f_R,
            p.kappa,
            tau_i,
            "pulseR",
        )
        V = _window(red, V, tau_i, p.readout_duration, dt)
    else:
        # no readout interaction: the red slot holds an untouched vacuum mode
        f_R = None
        M = V.matrix.copy()
        i = V.index("pulseR")
        M[i, :] = 0.0
        M[:, i] = 0.0
        M[np.ix_(i, i)] = np.eye(2)
        V = CovarianceMatrix(M, V.labels)
    pp = _detected(V, ("pulseB", "pulseR"), [p.eta_B, p.eta_R])

    excess = np.trace(mech_before) / 2.0 - 1.0
    got = np.trace(V.block("pulseR", "pulseR")) / 2.0 - 1.0
    transfer = float(got / excess) if excess > 0 else float("nan")
    return ProtocolResult(
        cm_pulse_mech=pm,
        cm_pulse_pulse=pp,
        measures_pm=ms.compute_measures(pm.matrix),
        measures_pp=ms.compute_measures(pp.matrix),
        params_used=p,
        frame=frame,
        tau_i=tau_i,
        tau_f=tau_f,
        profile_B=f_B,
        profile_R=f_R,
        readout_transfer=transfer,
    )


def evaluate(
    p: SystemParams,
    bipartition: str = "pm",
    frame=Frame.RWA,
    dt: float | None = None,
    log_base: float = math.e,
) -> tuple[ms.Measures, CovarianceMatrix]:
    """Measures of one bipartition; ``pm`` only needs the blue window."""
    if bipartition == "pm":
        V, _ = run_blue(p, frame, dt)
    elif bipartition == "pp":
        V = run_full(p, frame, dt).cm_pulse_pulse
    else:
        raise ValueError(f"bipartition must be one of {BIPARTITIONS}, got {bipartition!r}")
    return ms.compute_measures(V.matrix, base=log_base), V


def perturbed_params(p: SystemParams, rng: np.random.Generator, rel_width: float) -> SystemParams:
    """Draw g, tau and log10(n0) uniformly within ``±rel_width`` of nominal."""
    u = rng.uniform(-1.0, 1.0, size=3)
    changes = {
        "g": p.g * (1.0 + rel_width * u[0]),
        "tau": p.tau * (1.0 + rel_width * u[1]),
    }
    if p.n0 > 0:
        changes["n0"] = 10.0 ** (math.log10(p.n0) * (1.0 + rel_width * u[2]))
    return p.replace(**changes)


def ensemble_params(
    p: SystemParams, n: int = 40, rel_width: float = 0.1, seed: int = 0
) -> list[SystemParams]:
    """Perturbed parameter sets; sample ``k`` uses ``SeedSequence(seed).spawn(n)[k]``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if rel_width < 0:
        raise ValueError("rel_width must be >= 0")
    children = np.random.SeedSequence(seed).spawn(n)
    return [perturbed_params(p, np.random.default_rng(c), rel_width) for c in children]


def summarize(target: str, values, errors=(), count: int | None = None) -> EnsembleStats:
    vals = np.asarray(values, dtype=float)
    count = len(vals) + len(errors) if count is None else count
    if vals.size == 0:
        nan = float("nan")
        return EnsembleStats(target, nan, nan, nan, nan, count, (), tuple(errors))
    return EnsembleStats(
        target=target,
        mean=float(np.mean(vals)),
        std=float(np.std(vals)),
        min=float(np.min(vals)),
        max=float(np.max(vals)),
        count=count,
        values=tuple(float(v) for v in vals),
        errors=tuple(errors),
    )


def monte_carlo_ensemble(
    p: SystemParams,
    target: str = "S_db",
    n: int = 40,
    rel_width: float = 0.1,
    seed: int = 0,
    frame=Frame.RWA,
    bipartition: str = "pm",
    dt: float | None = None,
) -> EnsembleStats:
    """Statistics of ``target`` over ``n`` perturbed runs (Gamma held fixed)."""
    if target not in TARGETS:
        raise ValueError(f"target must be one of {TARGETS}, got {target!r}")
    values, errors = [], []
    for k, q in enumerate(ensemble_params(p, n, rel_width, seed)):
        try:
            m, _ = evaluate(q, bipartition, frame, dt)
        except (PulsedOptoError, ValueError, FloatingPointError) as exc:
            errors.append((k, f"{type(exc).__name__}: {exc}"))
            continue
        values.append(m.as_dict()[target])
    return summarize(target, values, errors, n)


@dataclass(frozen=True)
class GammaSearch:
    g: float
    tau: float
    gamma_crit: float
    grid: tuple = field(repr=False)


def critical_gamma(
    p: SystemParams,
    bipartition: str = "pm",
    frame=Frame.RWA,
    lo: float = 1e-4,
    hi: float = 10.0,
    rtol: float = 0.02,
    dt: float | None = None,
) -> float:
    """Reheating rate where the squeezing crosses 0 dB, by bisection in log Gamma.

    Returns 0 when there is no squeezing at ``lo`` and ``hi`` when there is
    still squeezing at ``hi``.
    """

    def s(G):
        return evaluate(p.replace(Gamma=G), bipartition, frame, dt)[0].s_db

    if s(lo) <= 0:
        return 0.0
    if s(hi) > 0:
        return hi
    a, b = math.log(lo), math.log(hi)
    while b - a > math.log1p(rtol):
        mid = 0.5 * (a + b)
        if s(math.exp(mid)) > 0:
            a = mid
        else:
            b = mid
    return math.exp(0.5 * (a + b))


def optimize_max_gamma(
    p: SystemParams,
    g_values=(0.2, 0.3, 0.4, 0.5, 0.6),
    tau_values=(1.0, 2.0, 4.0, 8.0, 12.0, 16.0),
    bipartition: str = "pm",
    frame=Frame.RWA,
    rtol: float = 0.02,
    dt: float | None = None,
) -> GammaSearch:
    """Grid search over coupling and duration for the largest tolerable Gamma."""
    rows = []
    for g in g_values:
        if not 0 < g <= 0.6 * p.kappa + 1e-12:
            raise ValueError(f"g must lie in (0, 0.6 kappa], got {g}")
        for tau in tau_values:
            q = p.replace(g=float(g), tau=float(tau))
            try:
                gc = critical_gamma(q, bipartition, frame, rtol=rtol, dt=dt)
            except DegenerateProfile:
                gc = 0.0
            rows.append((float(g), float(tau), gc))
    best = max(rows, key=lambda r: r[2])
    return GammaSearch(best[0], best[1], best[2], tuple(rows))
