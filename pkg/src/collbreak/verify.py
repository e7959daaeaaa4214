"""Executable checks of conservation laws, moment bounds and limits.

Each check returns a :class:`CheckReport`. ``worst`` is expressed in the
same units as ``tolerance`` so that ``worst <= tolerance`` exactly when the
check passes. Checks whose hypotheses do not hold report ``inapplicable``
instead of guessing.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .integrator import Trajectory
from .kernels import BreakupTable, CollisionKernel, DaughterDistribution
from .rhs import Model, gross_flux, pair_flux, rhs_B_form, rhs_b_form
from .state import MomentWeight, _vector, moment, tail_masses

PASS, FAIL, INAPPLICABLE = "pass", "fail", "inapplicable"

REFS = {
    "mass_conservation": "total mass is constant in time",
    "mass_rate": "mass-weighted rate of the truncated system vanishes identically",
    "tail_monotonicity": "tail masses sum_{i>=r} i w_i are nonincreasing",
    "gmoment_monotone": "moments of convex weights with concave derivative are nonincreasing",
    "dissipation_identity": "moment rate equals minus the weighted fragmentation dissipation",
    "continuous_dependence": "Gronwall stability bound in the mass norm; uniqueness",
    "support_invariance": "no clusters larger than the initial support appear",
    "large_time": "only monomers remain at large times when a(i,i) > 0",
    "truncation_convergence": "truncated solutions converge in the mass norm as l grows",
    "kernel": "collision kernel symmetric, nonnegative, with quadratic growth bound",
    "daughter": "fragment mass balance and dominance bound",
    "breakup": "breakup table symmetric and mass conserving",
}


@dataclass
class CheckReport:
    name: str
    status: str
    worst: float = 0.0
    tolerance: float = 0.0
    time: Optional[float] = None
    index: Optional[int] = None
    detail: str = ""
    scenario: str = ""
    paper_ref: str = ""

    def __post_init__(self):
        if not self.paper_ref:
            self.paper_ref = REFS.get(self.name, "")

    @property
    def passed(self) -> bool:
        return self.status == PASS

    @property
    def applicable(self) -> bool:
        return self.status != INAPPLICABLE

    def __str__(self) -> str:
        where = []
        if self.time is not None:
            where.append(f"t={self.time:g}")
        if self.index is not None:
            where.append(f"i={self.index}")
        loc = f" at {', '.join(where)}" if where else ""
        msg = f"[{self.status.upper()}] {self.name}: worst={self.worst:.3g}{loc} tol={self.tolerance:.3g}"
        return msg + (f" ({self.detail})" if self.detail else "")


def _status(worst: float, tol: float) -> str:
    return PASS if worst <= tol else FAIL


def _masses(traj: Trajectory) -> np.ndarray:
    return traj.w @ np.arange(1.0, traj.l + 1)


def _max_rise(series: np.ndarray) -> tuple[float, int]:
    """Largest ``series[t] - min_{s<t} series[s]`` over all ordered pairs."""
    if series.shape[0] < 2:
        return 0.0, 0
    running_min = np.minimum.accumulate(series, axis=0)
    rise = series[1:] - running_min[:-1]
    idx = int(np.argmax(rise.max(axis=1) if rise.ndim > 1 else rise))
    return float(np.max(rise[idx])), idx + 1


def check_mass_conservation(traj: Trajectory, tol: float) -> CheckReport:
    """Pass iff ``max_t |M1(t) - M1(0)| <= tol * M1(0)``."""
    m = _masses(traj)
    scale = m[0] if m[0] > 0 else 1.0
    dev = np.abs(m - m[0]) / scale
    n = int(np.argmax(dev))
    return CheckReport("mass_conservation", _status(dev[n], tol), float(dev[n]), tol,
                       time=float(traj.times[n]))


def check_mass_rate(state, kernel: CollisionKernel, d: Model,
                    tol: float = 1e-12) -> CheckReport:
    """Algebraic identity ``sum_i i rhs_i = 0`` at a single state, relative to gross flux.

    ``d`` may be a daughter distribution or a breakup table.
    """
    w = _vector(state)
    rhs = rhs_B_form(w, kernel, d) if isinstance(d, BreakupTable) else rhs_b_form(w, kernel, d)
    rate = float(np.dot(np.arange(1.0, w.size + 1), rhs))
    scale = gross_flux(w, kernel)
    worst = abs(rate) / scale if scale > 0 else abs(rate)
    return CheckReport("mass_rate", _status(worst, tol), worst, tol)


def check_tail_monotonicity(traj: Trajectory, tol: float) -> CheckReport:
    """Pass iff every tail mass is nonincreasing between any two snapshots, within ``tol * M1(0)``."""
    tails = tail_masses(traj.w)
    scale = tails[0, 0] if tails[0, 0] > 0 else 1.0
    rise, n = _max_rise(tails / scale)
    r = None
    if traj.times.size > 1:
        running_min = np.minimum.accumulate(tails, axis=0)
        r = int(np.argmax(tails[n] - running_min[n - 1])) + 1
    return CheckReport("tail_monotonicity", _status(rise, tol), rise, tol,
                       time=float(traj.times[n]), index=r)


def check_gmoment_monotone(traj: Trajectory, G: MomentWeight, tol: float) -> CheckReport:
    """Pass iff ``sum_i G(i) w_i`` never rises, within ``tol`` times its initial value."""
    if not G.in_G1:
        return CheckReport("gmoment_monotone", INAPPLICABLE, tolerance=tol,
                           detail=f"{G.name} fails: {', '.join(G.failed_checks())}")
    if G.n < traj.l:
        raise ValueError(f"weight sampled up to {G.n}, trajectory needs {traj.l}")
    mg = traj.w @ G.values[1: traj.l + 1]
    scale = mg[0] if mg[0] > 0 else 1.0
    rise, n = _max_rise(mg / scale)
    detail = G.name
    if G.bound is not None:
        over = float(np.max(mg)) - G.bound
        detail += f"; max M_G={np.max(mg):.6g} vs bound {G.bound:.6g}"
        if over > 0:
            return CheckReport("gmoment_monotone", FAIL, over / scale, tol, detail=detail)
    return CheckReport("gmoment_monotone", _status(rise, tol), rise, tol,
                       time=float(traj.times[n]), detail=detail)


def dissipation_terms(state, kernel: CollisionKernel, d: DaughterDistribution,
                      G: MomentWeight) -> np.ndarray:
    """Terms ``(G(j)/j - G(i)/i) i b(i,j;k) a(j,k) w_j w_k`` for ``i < j``, ``j + k <= l``.

    Returned as an ``(l, l, l)`` array indexed ``[i-1, j-1, k-1]``.
    """
    w = _vector(state)
    l = w.size
    F = pair_flux(w, kernel.matrix(l))
    g1 = G.over_size()[:l]
    coeff = (g1[None, :] - g1[:, None]) * np.arange(1.0, l + 1)[:, None]  # [i, j]
    return coeff[:, :, None] * d.tensor(l) * F[None, :, :]


def check_dissipation_identity(state, kernel: CollisionKernel, d: DaughterDistribution,
                               G: MomentWeight, tol: float = 1e-10) -> CheckReport:
    """Compare ``sum_i G(i) rhs_i`` with minus the dissipation triple sum.

    Also requires every term of the triple sum to be nonnegative.
    """
    w = _vector(state)
    l = w.size
    if not G.in_G1:
        return CheckReport("dissipation_identity", INAPPLICABLE, tolerance=tol,
                           detail=f"{G.name} fails: {', '.join(G.failed_checks())}")
    rhs = rhs_b_form(w, kernel, d)
    Gi = G.values[1: l + 1]
    lhs = float(np.dot(Gi, rhs))
    terms = dissipation_terms(w, kernel, d, G)
    triple = float(terms.sum())
    scale = abs(triple) + float(np.dot(np.abs(Gi), np.abs(rhs)))
    worst = abs(lhs + triple) / scale if scale > 0 else abs(lhs + triple)
    most_negative = float(terms.min()) if terms.size else 0.0
    # tiny negatives can only come from rounding in G(j)/j - G(i)/i
    if most_negative < -1e-14 * max(scale, 1e-300):
        return CheckReport("dissipation_identity", FAIL, worst, tol,
                           detail=f"negative dissipation term {most_negative:.3g}")
    return CheckReport("dissipation_identity", _status(worst, tol), worst, tol,
                       detail=f"lhs={lhs:.6g}, triple={triple:.6g}")


def gronwall_factor(kernel: CollisionKernel, w_in, w_hat_in, t) -> np.ndarray:
    """``exp(2 A_gamma t min(M_{1+gamma}(w_in), M_{1+gamma}(w_hat_in)))``."""
    Ag, g = kernel.power_bound
    m = min(moment(w_in, 1.0 + g), moment(w_hat_in, 1.0 + g))
    with np.errstate(over="ignore"):
        return np.exp(2.0 * Ag * np.asarray(t, dtype=float) * m)


def check_continuous_dependence(traj: Trajectory, traj_hat: Trajectory,
                                kernel: CollisionKernel, tol: float) -> CheckReport:
    """``||w(t) - w_hat(t)|| <= kappa(t) ||w_in - w_hat_in||`` in the mass norm.

    With identical initial data the trajectories must coincide to ``tol``
    times the initial mass.
    """
    name = "continuous_dependence"
    if kernel.power_bound is None:
        return CheckReport(name, INAPPLICABLE, tolerance=tol, detail="kernel declares no power bound")
    if traj.l != traj_hat.l or traj.times.shape != traj_hat.times.shape or \
            not np.allclose(traj.times, traj_hat.times, rtol=1e-12, atol=0):
        raise ValueError("trajectories must share truncation size and snapshot times")
    sizes = np.arange(1.0, traj.l + 1)
    diff = np.abs(traj.w - traj_hat.w) @ sizes
    d0 = diff[0]
    if d0 == 0:
        m0 = float(traj.w[0] @ sizes) or 1.0
        rel = diff / m0
        n = int(np.argmax(rel))
        return CheckReport(name, _status(rel[n], tol), float(rel[n]), tol,
                           time=float(traj.times[n]), detail="identical initial data")
    kappa = gronwall_factor(kernel, traj.w[0], traj_hat.w[0], traj.times)
    ratio = diff / (kappa * d0)
    n = int(np.argmax(ratio))
    worst = float(ratio[n] - 1.0)
    return CheckReport(name, _status(worst, tol), worst, tol, time=float(traj.times[n]),
                       detail=f"max ||w-w_hat||/(kappa*d0) = {ratio[n]:.3g}")


def check_support_invariance(traj: Trajectory, m: int, tol: float = 1e-14) -> CheckReport:
    """Pass iff ``w_i(t) <= tol * M1(0)`` for every ``i > m`` at every snapshot."""
    name = "support_invariance"
    w0 = traj.w[0]
    if np.any(w0[m:] != 0):
        raise ValueError(f"initial data has clusters larger than m={m}")
    if traj.mass_transfer:
        return CheckReport(name, INAPPLICABLE, tolerance=tol,
                           detail="breakup table allows products larger than both colliders")
    mass0 = float(w0 @ np.arange(1.0, traj.l + 1)) or 1.0
    upper = traj.w[:, m:] / mass0
    if upper.size == 0:
        return CheckReport(name, PASS, 0.0, tol, detail="m >= l")
    n, i = np.unravel_index(int(np.argmax(upper)), upper.shape)
    worst = float(upper[n, i])
    return CheckReport(name, _status(worst, tol), worst, tol, time=float(traj.times[n]),
                       index=int(i) + m + 1)


def check_large_time(traj: Trajectory, kernel: CollisionKernel, tol_mass: float) -> CheckReport:
    """At the final snapshot, all mass sits in monomers up to ``tol_mass * M1(0)``."""
    name = "large_time"
    l = traj.l
    diag = np.diag(kernel.matrix(l))[1:]
    if np.any(diag <= 0):
        zero = [int(i) + 2 for i in np.nonzero(diag <= 0)[0]]
        return CheckReport(name, INAPPLICABLE, tolerance=tol_mass,
                           detail=f"a(i,i) = 0 for i in {zero[:5]}; limit not characterized")
    sizes = np.arange(1.0, l + 1)
    mass0 = float(traj.w[0] @ sizes)
    scale = mass0 or 1.0
    final = traj.w[-1]
    monomer_gap = abs(final[0] - mass0) / scale
    residual = float(final[1:] @ sizes[1:]) / scale
    worst = max(monomer_gap, residual)
    return CheckReport(name, _status(worst, tol_mass), worst, tol_mass, time=float(traj.times[-1]),
                       detail=f"w1={final[0]:.6g}, non-monomer mass={residual * scale:.3g}")


@dataclass
class ConvergenceReport:
    l_values: list[int]
    deltas: list[float]
    slack: float
    noise_floor: float
    passed: bool
    t_probe: float
    detail: str = ""

    def rows(self) -> list[tuple[int, float]]:
        return list(zip(self.l_values, self.deltas))


def truncation_delta(scenario, l: int, t_probe: float) -> float:
    """``sum_{i<=l} i |w^l_i(t) - w^{2l}_i(t)|``."""
    # a steady-state stop would end the run before t_probe
    a = scenario.run(l=l, t_end=t_probe, steady_eps=None).final
    b = scenario.run(l=2 * l, t_end=t_probe, steady_eps=None).final
    return float(np.abs(a - b[:l]) @ np.arange(1.0, l + 1))


def truncation_convergence(scenario, l_values: Sequence[int], t_probe: float,
                           slack: float = 1.5, noise_floor: float = 1e-8) -> ConvergenceReport:
    """Distance between truncations ``l`` and ``2l`` at ``t_probe`` for each ``l``.

    Passes when each delta is at most ``slack`` times its predecessor or at
    most ``noise_floor`` times the initial mass; below the floor the deltas
    are integration noise and their ordering carries no information.
    """
    l_values = [int(x) for x in l_values]
    if not l_values or any(b <= a for a, b in zip(l_values, l_values[1:])):
        raise ValueError("l values must be a nonempty, strictly increasing list")
    support = scenario.initial.support(min(l_values))
    if support > min(l_values):
        raise ValueError(f"initial support {support} exceeds smallest l={min(l_values)}")
    mass0 = float(scenario.initial.resolve(min(l_values)) @ np.arange(1.0, min(l_values) + 1)) or 1.0
    deltas = [truncation_delta(scenario, l, t_probe) for l in l_values]
    floor = noise_floor * mass0
    ok = all(b <= slack * a or b <= floor for a, b in zip(deltas, deltas[1:]))
    return ConvergenceReport(l_values, deltas, slack, floor, ok, t_probe)
