"""Scenario configuration: JSON schema, validation and domain objects.

A scenario file looks like::

    {
      "name": "S1",
      "l": 64,
      "kernel": {"family": "product", "A": 1.0},
      "daughter": {"family": "monomer-shatter"},
      "initial": {"mode": "monodisperse", "size": 32, "mass": 1.0},
      "rtol": 1e-8, "atol": 1e-14, "t_end": 10.0, "output_times": [0.1, 1, 10],
      "checks": ["mass_conservation", {"check": "large_time", "tol_mass": 1e-3}]
    }

``daughter`` may be replaced by ``breakup``: either ``{"table": "file.csv"}``
or ``{"from_daughter": {...daughter spec...}}``. Relative table paths are
resolved against the config file's directory. Unknown keys are errors.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional, Union

from .integrator import IntegrationConfig, Trajectory, integrate
from .kernels import (
    DAUGHTER_FAMILIES,
    BreakupTable,
    CollisionKernel,
    DaughterDistribution,
    load_breakup_csv,
    load_daughter_csv,
    load_kernel_csv,
)
from .state import InitialData

SCENARIO_KEYS = {
    "name", "l", "kernel", "daughter", "breakup", "initial", "checks", "tail_r",
    "rtol", "atol", "t_end", "output_times", "max_steps", "steady_eps", "negative_clip",
}
INTEGRATION_KEYS = ("rtol", "atol", "t_end", "output_times", "max_steps", "steady_eps", "negative_clip")
KERNEL_KEYS = {
    "product": {"family", "A", "A1", "power_bound"},
    "power": {"family", "A", "gamma", "A1", "power_bound"},
    "constant": {"family", "A", "A1", "power_bound"},
    "user-table": {"family", "table", "A1", "power_bound"},
}
DAUGHTER_KEYS = {"family", "beta0", "beta1", "table"}
INITIAL_KEYS = {
    "monodisperse": {"mode", "size", "mass"},
    "geometric": {"mode", "ratio", "mass"},
    "explicit": {"mode", "w"},
}
CHECK_PARAMS = {
    "kernel": set(),
    "daughter": set(),
    "breakup": set(),
    "mass_rate": {"tol"},
    "mass_conservation": {"tol"},
    "tail_monotonicity": {"tol"},
    "gmoment_monotone": {"tol", "weight", "p"},
    "dissipation_identity": {"tol", "weight", "p", "steps"},
    "continuous_dependence": {"tol", "index", "delta"},
    "support_invariance": {"tol", "m"},
    "large_time": {"tol_mass"},
}


class ConfigError(ValueError):
    """Invalid configuration; ``line`` points into the source when known."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.message = message
        self.path = path
        self.line = line
        where = path or ""
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


@dataclass
class Scenario:
    name: str
    l: int
    kernel: CollisionKernel
    initial: InitialData
    integration: IntegrationConfig
    daughter: Optional[DaughterDistribution] = None
    breakup: Optional[BreakupTable] = None
    breakup_from_daughter: bool = False
    checks: list[dict] = field(default_factory=list)
    tail_r: list[int] = field(default_factory=list)

    def model(self, l: int | None = None) -> Union[DaughterDistribution, BreakupTable]:
        l = self.l if l is None else l
        if self.breakup_from_daughter:
            return BreakupTable.from_daughter(self.daughter, l)
        if self.breakup is not None:
            return self.breakup
        return self.daughter

    @property
    def uses_breakup(self) -> bool:
        return self.breakup is not None or self.breakup_from_daughter

    def run(self, l: int | None = None, initial: InitialData | None = None,
            step_callback=None, **overrides) -> Trajectory:
        """Integrate at truncation ``l`` (default: the scenario's own)."""
        l = self.l if l is None else l
        cfg = self.integration
        if overrides:
            if "t_end" in overrides and "output_times" not in overrides:
                overrides["output_times"] = [overrides["t_end"]]
            cfg = replace(cfg, **overrides)
        data = self.initial if initial is None else initial
        return integrate(data, self.kernel, self.model(l), cfg, l=l, step_callback=step_callback)


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------


class _Locator:
    """Maps key paths to line numbers of the raw JSON text (best effort)."""

    def __init__(self, text: str | None):
        self.text = text

    def line(self, *path) -> Optional[int]:
        if not self.text:
            return None
        pos = 0
        found = None
        for key in path:
            if isinstance(key, int):
                continue
            m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(self.text, pos)
            if m is None:
                break
            pos = m.start()
            found = pos
        if found is None:
            return None
        return self.text.count("\n", 0, found) + 1


class _Parser:
    def __init__(self, text: str | None, path: str | None, base: Path):
        self.loc = _Locator(text)
        self.path = path
        self.base = base

    def fail(self, message: str, *keys) -> None:
        raise ConfigError(message, self.path, self.loc.line(*keys))

    def obj(self, value, *keys) -> dict:
        if not isinstance(value, dict):
            self.fail(f"{'.'.join(map(str, keys)) or 'config'} must be an object", *keys)
        return value

    def keys(self, d: dict, allowed: set, *keys) -> None:
        for k in d:
            if k not in allowed:
                self.fail(f"unknown key {k!r} in {'.'.join(map(str, keys)) or 'config'}", *keys, k)

    def number(self, d: dict, key: str, *keys, positive=False, nonneg=False, default=None,
               required=False) -> Optional[float]:
        if key not in d:
            if required:
                self.fail(f"missing key {key!r}", *keys)
            return default
        v = d[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(f"{key} must be a number", *keys, key)
        if positive and not v > 0:
            self.fail(f"{key} must be positive", *keys, key)
        if nonneg and not v >= 0:
            self.fail(f"{key} must be nonnegative", *keys, key)
        return float(v)

    def integer(self, d: dict, key: str, *keys, minimum=1, default=None, required=False) -> Optional[int]:
        if key not in d:
            if required:
                self.fail(f"missing key {key!r}", *keys)
            return default
        v = d[key]
        if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
            self.fail(f"{key} must be an integer >= {minimum}", *keys, key)
        return v

    def table_path(self, value, *keys) -> Path:
        if not isinstance(value, str):
            self.fail("table must be a file path", *keys)
        p = Path(value)
        if not p.is_absolute():
            p = self.base / p
        if not p.exists():
            self.fail(f"table file not found: {p}", *keys)
        return p

    # sections -------------------------------------------------------------

    def power_bound(self, d: dict, *keys):
        if "power_bound" not in d:
            return None
        pb = d["power_bound"]
        if not (isinstance(pb, list) and len(pb) == 2 and all(isinstance(x, (int, float)) for x in pb)):
            self.fail("power_bound must be [A_gamma, gamma]", *keys, "power_bound")
        return (float(pb[0]), float(pb[1]))

    def kernel(self, spec, l: int) -> CollisionKernel:
        spec = self.obj(spec, "kernel")
        fam = spec.get("family")
        if fam not in KERNEL_KEYS:
            self.fail(f"kernel family must be one of {sorted(KERNEL_KEYS)}", "kernel", "family")
        self.keys(spec, KERNEL_KEYS[fam], "kernel")
        A1 = self.number(spec, "A1", "kernel", positive=True)
        try:
            if fam == "user-table":
                path = self.table_path(spec.get("table"), "kernel", "table")
                kern = load_kernel_csv(path, quad_bound=A1, power_bound=self.power_bound(spec, "kernel"))
            else:
                A = self.number(spec, "A", "kernel", nonneg=True, default=1.0)
                if fam == "product":
                    kern = CollisionKernel.product(A, quad_bound=A1)
                elif fam == "constant":
                    kern = CollisionKernel.constant(A, quad_bound=A1)
                else:
                    g = self.number(spec, "gamma", "kernel", required=True)
                    kern = CollisionKernel.power(A, g, quad_bound=A1)
                pb = self.power_bound(spec, "kernel")
                if pb is not None:
                    kern = replace(kern, power_bound=pb)
        except ConfigError:
            raise
        except (ValueError, IndexError) as exc:
            self.fail(str(exc), "kernel")
        return kern

    def daughter(self, spec, *keys) -> DaughterDistribution:
        spec = self.obj(spec, *keys)
        self.keys(spec, DAUGHTER_KEYS, *keys)
        fam = spec.get("family")
        if fam not in DAUGHTER_FAMILIES:
            self.fail(f"daughter family must be one of {list(DAUGHTER_FAMILIES)}", *keys, "family")
        dom = None
        if "beta0" in spec or "beta1" in spec:
            dom = (self.number(spec, "beta0", *keys, nonneg=True, default=0.0),
                   self.number(spec, "beta1", *keys, nonneg=True, default=0.0))
        try:
            if fam == "user-table":
                path = self.table_path(spec.get("table"), *keys, "table")
                return load_daughter_csv(path, dominance=dom or (0.0, 1.0))
            if "table" in spec:
                self.fail("table is only valid for the user-table family", *keys, "table")
            return DaughterDistribution.builtin(fam, dom)
        except ConfigError:
            raise
        except (ValueError, IndexError) as exc:
            self.fail(str(exc), *keys)

    def initial(self, spec) -> InitialData:
        spec = self.obj(spec, "initial")
        mode = spec.get("mode")
        if mode not in INITIAL_KEYS:
            self.fail(f"initial mode must be one of {sorted(INITIAL_KEYS)}", "initial", "mode")
        self.keys(spec, INITIAL_KEYS[mode], "initial")
        if mode == "monodisperse":
            size = self.integer(spec, "size", "initial", required=True)
            mass = self.number(spec, "mass", "initial", nonneg=True, default=1.0)
            return InitialData.monodisperse(size, mass)
        if mode == "geometric":
            ratio = self.number(spec, "ratio", "initial", positive=True, required=True)
            if ratio >= 1:
                self.fail("ratio must lie in (0, 1)", "initial", "ratio")
            return InitialData.geometric(ratio, self.number(spec, "mass", "initial", nonneg=True))
        w = spec.get("w")
        if not isinstance(w, list) or not w or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in w):
            self.fail("w must be a nonempty list of numbers", "initial", "w")
        for i, x in enumerate(w, start=1):
            if x < 0:
                self.fail(f"w_{i} = {x} is negative; initial data must be nonnegative", "initial", "w")
        return InitialData.explicit(w)

    def checks(self, spec) -> list[dict]:
        if spec is None:
            return []
        if not isinstance(spec, list):
            self.fail("checks must be a list", "checks")
        out = []
        for entry in spec:
            if isinstance(entry, str):
                entry = {"check": entry}
            if not isinstance(entry, dict) or "check" not in entry:
                self.fail("each check is a name or an object with a 'check' key", "checks")
            name = entry["check"]
            if name not in CHECK_PARAMS:
                self.fail(f"unknown check {name!r}", "checks")
            self.keys(entry, CHECK_PARAMS[name] | {"check"}, "checks")
            if "weight" in entry and entry["weight"] not in ("power", "dlvp"):
                self.fail("weight must be 'power' or 'dlvp'", "checks", "weight")
            out.append(dict(entry))
        return out

    def scenario(self, cfg, default_name: str = "scenario") -> Scenario:
        cfg = self.obj(cfg)
        self.keys(cfg, SCENARIO_KEYS)
        for key in ("kernel", "initial", "t_end"):
            if key not in cfg:
                self.fail(f"missing key {key!r}")
        l = self.integer(cfg, "l", minimum=2, required=True)
        if ("daughter" in cfg) == ("breakup" in cfg):
            self.fail("exactly one of 'daughter' and 'breakup' is required")

        kernel = self.kernel(cfg["kernel"], l)
        daughter = breakup = None
        from_d = False
        if "daughter" in cfg:
            daughter = self.daughter(cfg["daughter"], "daughter")
        else:
            spec = self.obj(cfg["breakup"], "breakup")
            self.keys(spec, {"table", "from_daughter"}, "breakup")
            if ("table" in spec) == ("from_daughter" in spec):
                self.fail("breakup needs exactly one of 'table' and 'from_daughter'", "breakup")
            if "table" in spec:
                try:
                    breakup = load_breakup_csv(self.table_path(spec["table"], "breakup", "table"), l_max=l)
                except ValueError as exc:
                    self.fail(str(exc), "breakup")
            else:
                daughter = self.daughter(spec["from_daughter"], "breakup", "from_daughter")
                from_d = True

        initial = self.initial(cfg["initial"])
        try:
            support = initial.support(l)
        except ValueError as exc:
            self.fail(str(exc), "initial")
        if support > l:
            self.fail(f"initial support {support} exceeds truncation size l={l}", "l")

        kw: dict[str, Any] = {}
        for key in ("rtol", "atol", "t_end"):
            if key in cfg:
                kw[key] = self.number(cfg, key, positive=True)
        for key in ("steady_eps", "negative_clip"):
            if key in cfg:
                kw[key] = self.number(cfg, key, nonneg=True)
        if "max_steps" in cfg:
            kw["max_steps"] = self.integer(cfg, "max_steps")
        if "output_times" in cfg:
            ot = cfg["output_times"]
            if not isinstance(ot, list) or not all(isinstance(x, (int, float)) for x in ot):
                self.fail("output_times must be a list of numbers", "output_times")
            kw["output_times"] = [float(x) for x in ot]
        try:
            integration = IntegrationConfig(**kw)
        except ValueError as exc:
            bad = next((k for k in INTEGRATION_KEYS if k in str(exc)), None)
            self.fail(str(exc), *([bad] if bad else []))

        tail_r = cfg.get("tail_r", [])
        if not isinstance(tail_r, list) or not all(isinstance(r, int) and 1 <= r <= l for r in tail_r):
            self.fail(f"tail_r must be a list of integers in 1..{l}", "tail_r")
        name = cfg.get("name", default_name)
        if not isinstance(name, str):
            self.fail("name must be a string", "name")

        return Scenario(name=name, l=l, kernel=kernel, initial=initial, integration=integration,
                        daughter=daughter, breakup=breakup, breakup_from_daughter=from_d,
                        checks=self.checks(cfg.get("checks")), tail_r=list(tail_r))


def read_json(path: str | Path) -> tuple[Any, str]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", str(path), exc.lineno) from None


def parse_scenario(cfg: dict, text: str | None = None, path: str | None = None,
                   base: Path | None = None) -> Scenario:
    """Build a :class:`Scenario` from an already-decoded config mapping."""
    default = Path(path).stem if path else "scenario"
    return _Parser(text, path, base or Path.cwd()).scenario(cfg, default)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    cfg, text = read_json(path)
    return parse_scenario(cfg, text, str(path), path.parent)


def load_suite(path: str | Path) -> list[Scenario]:
    """Scenarios of a verification config.

    Either a single scenario, or ``{"scenarios": [...]}`` whose entries are
    inline scenario objects or paths to scenario files.
    """
    path = Path(path)
    cfg, text = read_json(path)
    if isinstance(cfg, dict) and "scenarios" in cfg:
        parser = _Parser(text, str(path), path.parent)
        parser.keys(cfg, {"scenarios"})
        entries = cfg["scenarios"]
        if not isinstance(entries, list):
            parser.fail("scenarios must be a list", "scenarios")
        out = []
        for n, entry in enumerate(entries):
            if isinstance(entry, str):
                sub = Path(entry)
                out.append(load_scenario(sub if sub.is_absolute() else path.parent / sub))
            else:
                out.append(parser.scenario(entry, f"scenario{n + 1}"))
        return out
    return [parse_scenario(cfg, text, str(path), path.parent)]
