"""Adaptive Dormand-Prince 5(4) integration of the truncated system."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .kernels import BreakupTable, CollisionKernel
from .rhs import Model, RhsWorkspace
from .state import ClusterState, InitialData, mass_norm

logger = logging.getLogger(__name__)

TERMINATION_REASONS = ("reached_t_end", "steady_state", "max_steps")

# Dormand-Prince 5(4) tableau; the system is autonomous, so stage times are unused
_A = [np.array(row) for row in [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# 5th minus 4th order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

ORDER = 5
SAFETY = 0.9
# PI controller exponents
ALPHA = 0.7 / ORDER
BETA = 0.4 / ORDER
FAC_MIN, FAC_MAX = 0.2, 5.0


class IntegrationError(RuntimeError):
    """Raised on step-size underflow or when ``max_steps`` is exhausted."""

    def __init__(self, message: str, trajectory: "Trajectory | None" = None):
        super().__init__(message)
        self.trajectory = trajectory


@dataclass
class IntegrationConfig:
    rtol: float = 1e-8
    atol: float = 1e-14
    t_end: float = 1.0
    output_times: Optional[Sequence[float]] = None
    max_steps: int = 200_000
    steady_eps: Optional[float] = None
    negative_clip: Optional[float] = None

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if not (np.isfinite(self.t_end) and self.t_end > 0):
            raise ValueError("t_end must be positive and finite")
        if self.output_times is None:
            self.output_times = [self.t_end]
        times = [float(t) for t in self.output_times]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("output_times must be strictly increasing")
        if times and (times[0] < 0 or times[-1] > self.t_end):
            raise ValueError("output_times must lie in [0, t_end]")
        self.output_times = times
        if int(self.max_steps) != self.max_steps or self.max_steps < 1:
            raise ValueError("max_steps must be a positive integer")
        if self.steady_eps is not None and self.steady_eps < 0:
            raise ValueError("steady_eps must be nonnegative")
        if self.negative_clip is not None and self.negative_clip < 0:
            raise ValueError("negative_clip must be nonnegative")


def mass_tolerance(cfg: IntegrationConfig, mass0: float) -> float:
    """Drift budget for total mass along a trajectory."""
    return 100.0 * cfg.rtol * mass0


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    rejected_negative: int = 0
    h_final: float = 0.0
    clipped_mass: float = 0.0
    rhs_evals: int = 0


@dataclass
class Trajectory:
    """Snapshots ``w[n]`` at strictly increasing ``times[n]``; ``times[0] = 0``."""

    times: np.ndarray
    w: np.ndarray
    stats: StepStats = field(default_factory=StepStats)
    termination: str = "reached_t_end"
    mass_transfer: bool = False

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.w = np.atleast_2d(np.asarray(self.w, dtype=float))
        if self.times.ndim != 1 or self.times.size != self.w.shape[0]:
            raise ValueError("one time per snapshot required")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")

    @property
    def l(self) -> int:
        return self.w.shape[1]

    @property
    def initial(self) -> np.ndarray:
        return self.w[0]

    @property
    def final(self) -> np.ndarray:
        return self.w[-1]

    def __len__(self) -> int:
        return self.times.size

    @property
    def snapshots(self) -> list[ClusterState]:
        return [ClusterState(w, t) for t, w in zip(self.times, self.w)]

    def at(self, t: float) -> np.ndarray:
        idx = np.nonzero(np.isclose(self.times, t, rtol=1e-12, atol=0.0))[0]
        if idx.size == 0:
            raise KeyError(f"no snapshot at t={t}")
        return self.w[idx[0]]


def detect_steady_state(state, rhs: np.ndarray, steady_eps: float) -> bool:
    """True iff ``sum_i i |rhs_i| <= steady_eps``."""
    return mass_norm(rhs) <= steady_eps


def _error_norm(err, y0, y1, rtol, atol) -> float:
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.max(np.abs(err) / scale)) if err.size else 0.0


def integrate(w_in, kernel: CollisionKernel, model: Model, cfg: IntegrationConfig,
              l: int | None = None, method: str = "auto",
              step_callback: Callable[[float, np.ndarray], None] | None = None,
              strict: bool = True) -> Trajectory:
    """Advance the truncated system from ``w_in`` to ``cfg.t_end``.

    ``w_in`` is a vector, a :class:`ClusterState` or :class:`InitialData`
    (which needs ``l``). Snapshots are taken at ``t = 0`` and at every
    positive output time; steps are shortened to land on them exactly.

    A step is accepted only if its local error passes the mixed
    ``rtol``/``atol`` test and no entry drops below ``-negative_clip``;
    remaining tiny negatives are clipped to zero and the clipped mass is
    recorded in the stats. With ``steady_eps`` set, integration stops (and
    takes a final snapshot) once the mass-weighted rate falls below it.

    With ``strict`` (the default) exhausting ``max_steps`` raises
    :class:`IntegrationError`; otherwise the partial trajectory is returned
    with termination ``"max_steps"``.
    """
    if isinstance(w_in, InitialData):
        if l is None:
            raise ValueError("InitialData needs a truncation size l")
        y = w_in.resolve(l)
    else:
        y = np.array(w_in.w if isinstance(w_in, ClusterState) else w_in, dtype=float)
        if l is not None and l != y.size:
            raise ValueError(f"initial vector has {y.size} entries, l={l}")
        ClusterState(y)  # validates
    l = y.size
    f = RhsWorkspace(l, kernel, model, method=method)
    mass_transfer = isinstance(model, BreakupTable) and model.allows_mass_transfer(l)

    mass0 = mass_norm(y)
    clip = cfg.negative_clip if cfg.negative_clip is not None else 1e-14 * mass0
    rtol, atol = cfg.rtol, cfg.atol
    stats = StepStats()

    times = [0.0]
    snaps = [y.copy()]
    targets = [t for t in cfg.output_times if t > 0]
    if not targets or targets[-1] < cfg.t_end:
        targets.append(cfg.t_end)
    emit = set(t for t in cfg.output_times if t > 0) | {cfg.t_end}

    t = 0.0
    k1 = f(y)
    stats.rhs_evals += 1

    def finish(reason: str) -> Trajectory:
        stats.h_final = h
        return Trajectory(np.array(times), np.array(snaps), stats, reason, mass_transfer)

    h = rtol ** (1.0 / ORDER) / (1.0 + mass_norm(k1))
    if cfg.steady_eps is not None and detect_steady_state(y, k1, cfg.steady_eps):
        return finish("steady_state")

    err_prev = 1.0
    steps = 0
    K = np.empty((7, l))
    for target in targets:
        while t < target:
            if steps >= cfg.max_steps:
                traj = finish("max_steps")
                if strict:
                    raise IntegrationError(f"max_steps={cfg.max_steps} exhausted at t={t:g}", traj)
                return traj
            h_try = min(h, target - t)
            landing = h_try >= target - t
            if h_try < 1e-14 * max(1.0, abs(t)):
                raise IntegrationError(f"step size underflow at t={t:g} (h={h_try:g})", finish("max_steps"))

            K[0] = k1
            for s in range(1, 6):
                K[s] = f(y + h_try * (_A[s] @ K[:s]))
            y_new = y + h_try * (_B5[:6] @ K[:6])
            K[6] = f(y_new)
            stats.rhs_evals += 6
            steps += 1

            err = h_try * (_E @ K)
            en = _error_norm(err, y, y_new, rtol, atol)
            negative = y_new.min() < -clip

            if en <= 1.0 and not negative:
                stats.accepted += 1
                t = target if landing else t + h_try
                k1 = K[6].copy()
                if y_new.min() < 0:
                    neg = y_new < 0
                    stats.clipped_mass += float(np.dot(np.nonzero(neg)[0] + 1.0, -y_new[neg]))
                    y_new = np.where(neg, 0.0, y_new)
                    k1 = f(y_new)
                    stats.rhs_evals += 1
                y = y_new
                en = max(en, 1e-10)
                fac = SAFETY * en ** -ALPHA * err_prev ** BETA
                err_prev = en
                h_next = h_try * min(FAC_MAX, max(FAC_MIN, fac))
                # don't let a shortened landing step shrink the controller's h
                h = max(h, h_next) if landing else h_next
                if step_callback is not None:
                    step_callback(t, y)
                if cfg.steady_eps is not None and detect_steady_state(y, k1, cfg.steady_eps):
                    if t > times[-1]:
                        times.append(t)
                        snaps.append(y.copy())
                    return finish("steady_state")
            else:
                stats.rejected += 1
                if negative and en <= 1.0:
                    stats.rejected_negative += 1
                    h = 0.5 * h_try
                else:
                    h = h_try * max(FAC_MIN, SAFETY * en ** -(1.0 / ORDER))
        if target in emit:
            times.append(t)
            snaps.append(y.copy())
    return finish("reached_t_end")
