"""Run the checks configured for a scenario."""

from __future__ import annotations

import numpy as np

from .config import Scenario
from .integrator import Trajectory
from .kernels import ValidationReport, validate_B, validate_daughter, validate_kernel
from .state import InitialData, build_dlvp_weight, power_weight
from .verify import (
    FAIL,
    INAPPLICABLE,
    PASS,
    CheckReport,
    check_continuous_dependence,
    check_dissipation_identity,
    check_gmoment_monotone,
    check_large_time,
    check_mass_conservation,
    check_mass_rate,
    check_support_invariance,
    check_tail_monotonicity,
)


def validation_check(name: str, report: ValidationReport) -> CheckReport:
    """Turn a validation report into a check; ``worst`` counts violations."""
    n = len(report)
    return CheckReport(name, PASS if n == 0 else FAIL, float(n), 0.0,
                       detail="" if n == 0 else report.summary(3))


def validate_scenario(sc: Scenario) -> list[CheckReport]:
    """Static validation of the kernel and the fragmentation model."""
    out = [validation_check("kernel", validate_kernel(sc.kernel, sc.l))]
    if sc.daughter is not None:
        out.append(validation_check("daughter", validate_daughter(sc.daughter, sc.l, sc.l)))
    if sc.uses_breakup:
        out.append(validation_check("breakup", validate_B(sc.model(), sc.l)))
    return out


def _worst(reports: list[CheckReport], name: str, tol: float) -> CheckReport:
    """Combine per-state reports into the single worst one."""
    bad = [r for r in reports if r.status == FAIL]
    if bad:
        return max(bad, key=lambda r: r.worst)
    done = [r for r in reports if r.status == PASS]
    if not done:
        detail = reports[0].detail if reports else "no states"
        return CheckReport(name, INAPPLICABLE, tolerance=tol, detail=detail)
    return max(done, key=lambda r: r.worst)


def _weight(sc: Scenario, spec: dict):
    if spec.get("weight", "power") == "dlvp":
        return build_dlvp_weight(sc.initial, sc.l)
    return power_weight(float(spec.get("p", 2.0)), sc.l)


class ScenarioRunner:
    """Lazily integrates a scenario and evaluates its configured checks."""

    def __init__(self, scenario: Scenario, sample_every: int = 0):
        self.scenario = scenario
        self.sample_every = sample_every
        self._traj: Trajectory | None = None
        self.step_states: list[tuple[float, np.ndarray]] = []

    @property
    def trajectory(self) -> Trajectory:
        if self._traj is None:
            counter = {"n": 0}

            def sample(t, y):
                counter["n"] += 1
                if self.sample_every and counter["n"] % self.sample_every == 0:
                    self.step_states.append((t, y.copy()))

            self._traj = self.scenario.run(step_callback=sample if self.sample_every else None)
        return self._traj

    @property
    def default_tol(self) -> float:
        return 100.0 * self.scenario.integration.rtol

    def run_check(self, spec: dict) -> CheckReport:
        sc = self.scenario
        name = spec["check"]
        tol = float(spec.get("tol", self.default_tol))
        if name == "kernel":
            report = validation_check(name, validate_kernel(sc.kernel, sc.l))
        elif name == "daughter":
            if sc.daughter is None:
                report = CheckReport(name, INAPPLICABLE, detail="scenario uses a breakup table")
            else:
                report = validation_check(name, validate_daughter(sc.daughter, sc.l, sc.l))
        elif name == "breakup":
            if not sc.uses_breakup:
                report = CheckReport(name, INAPPLICABLE, detail="scenario uses a daughter distribution")
            else:
                report = validation_check(name, validate_B(sc.model(), sc.l))
        elif name == "mass_rate":
            tol = float(spec.get("tol", 1e-12))
            model = sc.model()
            reps = [check_mass_rate(w, sc.kernel, model, tol) for w in self.trajectory.w]
            report = _worst(reps, name, tol)
        elif name == "mass_conservation":
            report = check_mass_conservation(self.trajectory, tol)
        elif name == "tail_monotonicity":
            report = check_tail_monotonicity(self.trajectory, tol)
        elif name == "gmoment_monotone":
            report = check_gmoment_monotone(self.trajectory, _weight(sc, spec), tol)
        elif name == "dissipation_identity":
            report = self._dissipation(spec)
        elif name == "continuous_dependence":
            report = self._continuous_dependence(spec, tol)
        elif name == "support_invariance":
            m = int(spec.get("m", sc.initial.support(sc.l)))
            report = check_support_invariance(self.trajectory, m, float(spec.get("tol", 1e-14)))
        elif name == "large_time":
            report = check_large_time(self.trajectory, sc.kernel, float(spec.get("tol_mass", 1e-3)))
        else:
            raise ValueError(f"unknown check {name!r}")
        report.scenario = sc.name
        return report

    def _dissipation(self, spec: dict) -> CheckReport:
        sc = self.scenario
        tol = float(spec.get("tol", 1e-10))
        if sc.daughter is None or sc.breakup is not None:
            return CheckReport("dissipation_identity", INAPPLICABLE, tolerance=tol,
                               detail="needs a daughter distribution")
        G = _weight(sc, spec)
        states = list(self.trajectory.w)
        n_steps = int(spec.get("steps", 0))
        if n_steps and self.step_states:
            idx = np.linspace(0, len(self.step_states) - 1, min(n_steps, len(self.step_states)))
            states += [self.step_states[int(i)][1] for i in np.unique(idx.astype(int))]
        reps = [check_dissipation_identity(w, sc.kernel, sc.daughter, G, tol) for w in states]
        return _worst(reps, "dissipation_identity", tol)

    def _continuous_dependence(self, spec: dict, tol: float) -> CheckReport:
        sc = self.scenario
        traj = self.trajectory
        w0 = traj.initial.copy()
        index = int(spec.get("index", sc.initial.support(sc.l)))
        if not 1 <= index <= sc.l:
            raise ValueError(f"perturbation index {index} outside 1..{sc.l}")
        w0[index - 1] += float(spec.get("delta", 1e-6))
        perturbed = sc.run(initial=InitialData.explicit(w0))
        return check_continuous_dependence(traj, perturbed, sc.kernel, tol)

    def run_all(self) -> list[CheckReport]:
        return [self.run_check(spec) for spec in self.scenario.checks]


def run_scenario_checks(scenario: Scenario) -> list[CheckReport]:
    sample = 0
    if any(c["check"] == "dissipation_identity" and c.get("steps") for c in scenario.checks):
        sample = 1
    return ScenarioRunner(scenario, sample_every=sample).run_all()
