"""Command-line interface: ``simulate``, ``verify``, ``converge``, ``validate``.

Exit codes: 0 success, 1 check failure, 2 configuration error,
3 integrator failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import ConfigError, Scenario, load_scenario, load_suite
from .integrator import IntegrationError, Trajectory
from .state import tail_masses
from .suite import run_scenario_checks, validate_scenario
from .verify import FAIL, CheckReport, truncation_convergence

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_INTEGRATOR = 0, 1, 2, 3

logger = logging.getLogger("collbreak")


def fmt(x: float) -> str:
    """17 significant digits: float round-trips exactly."""
    return f"{float(x):.17g}"


def _writer(path: Path):
    fh = open(path, "w", newline="")
    return fh, csv.writer(fh, lineterminator="\n")


def write_trajectory(traj: Trajectory, path: Path) -> None:
    fh, out = _writer(path)
    with fh:
        out.writerow(["t", "i", "w_i"])
        for t, w in zip(traj.times, traj.w):
            ts = fmt(t)
            for i, wi in enumerate(w, start=1):
                out.writerow([ts, i, fmt(wi)])


def write_moments(traj: Trajectory, tail_r: Sequence[int], path: Path) -> None:
    sizes = np.arange(1.0, traj.l + 1)
    tails = tail_masses(traj.w)
    fh, out = _writer(path)
    with fh:
        out.writerow(["t", "M0", "M1", "M2"] + [f"tail_{r}" for r in tail_r])
        for n, (t, w) in enumerate(zip(traj.times, traj.w)):
            row = [t, w.sum(), w @ sizes, w @ sizes ** 2] + [tails[n, r - 1] for r in tail_r]
            out.writerow([fmt(x) for x in row])


def write_report(reports: Sequence[CheckReport], path: Path) -> None:
    fh, out = _writer(path)
    with fh:
        out.writerow(["check", "scenario", "pass", "worst_violation", "tolerance", "paper_ref"])
        for r in reports:
            out.writerow([r.name, r.scenario, r.status, fmt(r.worst), fmt(r.tolerance), r.paper_ref])


def _error(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _rejections(sc: Scenario) -> list[CheckReport]:
    return [r for r in validate_scenario(sc) if r.status == FAIL]


def cmd_simulate(args) -> int:
    sc = load_scenario(args.config)
    bad = _rejections(sc)
    if bad:
        for r in bad:
            _error(f"{args.config}: invalid {r.name}: {r.detail}")
        return EXIT_CONFIG
    try:
        traj = sc.run()
    except IntegrationError as exc:
        _error(f"integration failed: {exc}")
        return EXIT_INTEGRATOR
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_trajectory(traj, out / "trajectory.csv")
    write_moments(traj, sc.tail_r or [1], out / "moments.csv")
    s = traj.stats
    print(f"{sc.name}: {traj.termination} at t={traj.times[-1]:g}; "
          f"{s.accepted} steps accepted, {s.rejected} rejected; wrote {out}")
    return EXIT_OK


def _checks_job(sc: Scenario):
    try:
        return run_scenario_checks(sc), None
    except IntegrationError as exc:
        return [], f"{sc.name}: integration failed: {exc}"


def cmd_verify(args) -> int:
    scenarios = load_suite(args.config)
    if args.jobs > 1 and len(scenarios) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_checks_job, scenarios))
    else:
        results = [_checks_job(sc) for sc in scenarios]
    reports = [r for rs, _ in results for r in rs]
    errors = [e for _, e in results if e]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(reports, out / "report.csv")
    for r in reports:
        print(f"{r.scenario}: {r}")
    for e in errors:
        _error(e)
    if errors:
        return EXIT_INTEGRATOR
    return EXIT_CHECK if any(r.status == FAIL for r in reports) else EXIT_OK


def _parse_l_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--l must be a comma-separated list of integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise ConfigError("--l needs at least one positive integer")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(f"--l must be strictly increasing, got {values}")
    return values


def cmd_converge(args) -> int:
    sc = load_scenario(args.config)
    l_values = _parse_l_list(args.l)
    support = sc.initial.support(l_values[0])
    if support > l_values[0]:
        raise ConfigError(f"initial support {support} exceeds smallest l={l_values[0]}", args.config)
    bad = _rejections(sc)
    if bad:
        for r in bad:
            _error(f"{args.config}: invalid {r.name}: {r.detail}")
        return EXIT_CONFIG
    t_probe = args.t if args.t is not None else sc.integration.t_end
    try:
        rep = truncation_convergence(sc, l_values, t_probe, slack=args.slack, noise_floor=args.noise_floor)
    except IntegrationError as exc:
        _error(f"integration failed: {exc}")
        return EXIT_INTEGRATOR
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fh, w = _writer(out / "convergence.csv")
    with fh:
        w.writerow(["l", "delta"])
        for l, d in rep.rows():
            w.writerow([l, fmt(d)])
    for l, d in rep.rows():
        print(f"l={l}: delta={d:.6g}")
    print("converged" if rep.passed else "NOT monotone within slack")
    return EXIT_OK if rep.passed else EXIT_CHECK


def cmd_validate(args) -> int:
    status = EXIT_OK
    for sc in load_suite(args.config):
        for r in validate_scenario(sc):
            print(f"{sc.name}: {r}")
            if r.status == FAIL:
                status = EXIT_CONFIG
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="collbreak", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="integrate a scenario and write trajectory and moment CSVs")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("verify", help="run the configured checks and write report.csv")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=1, help="scenarios run concurrently")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("converge", help="truncation convergence study, writes convergence.csv")
    s.add_argument("--config", required=True)
    s.add_argument("--l", required=True, help="comma-separated increasing truncation sizes")
    s.add_argument("--out", required=True)
    s.add_argument("--t", type=float, default=None, help="probe time (default: the scenario's t_end)")
    s.add_argument("--slack", type=float, default=1.5)
    s.add_argument("--noise-floor", type=float, default=1e-8)
    s.set_defaults(func=cmd_converge)

    s = sub.add_parser("validate", help="parse a config and validate kernel and fragmentation model")
    s.add_argument("--config", required=True)
    s.set_defaults(func=cmd_validate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        _error(str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
