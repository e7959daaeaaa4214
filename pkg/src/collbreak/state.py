"""Cluster states, initial data, moments and convex moment weights."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

INITIAL_MODES = ("explicit", "monodisperse", "geometric")


@dataclass(frozen=True, eq=False)
class ClusterState:
    """Concentrations ``w[i-1]`` of ``i``-clusters, ``i = 1..l``, at time ``t``."""

    w: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        w = np.array(self.w, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("state vector must be a nonempty 1-D array")
        if not np.all(np.isfinite(w)):
            raise ValueError("state vector has non-finite entries")
        if np.any(w < 0):
            i = int(np.argmin(w)) + 1
            raise ValueError(f"negative concentration w_{i} = {w[i - 1]!r}")
        if not (np.isfinite(self.t) and self.t >= 0):
            raise ValueError(f"time must be finite and nonnegative, got {self.t!r}")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "t", float(self.t))

    @property
    def l(self) -> int:
        return self.w.size


def _vector(state) -> np.ndarray:
    if isinstance(state, ClusterState):
        return state.w
    return np.asarray(state, dtype=float)


@dataclass(frozen=True)
class InitialData:
    """Initial distribution, resolved against a truncation size by :meth:`resolve`.

    ``monodisperse`` puts total mass ``mass`` on clusters of ``size``;
    ``geometric`` uses ``w_i`` proportional to ``ratio**i`` on ``1..l``,
    scaled to ``mass`` when given; ``explicit`` takes ``w`` verbatim.
    """

    mode: str
    size: Optional[int] = None
    mass: Optional[float] = None
    ratio: Optional[float] = None
    w: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if self.mode not in INITIAL_MODES:
            raise ValueError(f"unknown initial mode {self.mode!r}")
        if self.mode == "monodisperse":
            if self.size is None or int(self.size) != self.size or self.size < 1:
                raise ValueError("monodisperse data needs an integer size >= 1")
            if self.mass is None or not (np.isfinite(self.mass) and self.mass >= 0):
                raise ValueError("monodisperse data needs a finite mass >= 0")
        elif self.mode == "geometric":
            if self.ratio is None or not 0 < self.ratio < 1:
                raise ValueError("geometric data needs a ratio in (0, 1)")
            if self.mass is not None and not (np.isfinite(self.mass) and self.mass >= 0):
                raise ValueError("geometric mass must be finite and >= 0")
        else:
            if self.w is None:
                raise ValueError("explicit data needs a vector w")
            w = np.asarray(self.w, dtype=float)
            if w.ndim != 1 or not np.all(np.isfinite(w)):
                raise ValueError("explicit w must be a finite 1-D vector")
            if np.any(w < 0):
                i = int(np.argmin(w)) + 1
                raise ValueError(f"explicit w has negative entry w_{i} = {w[i - 1]!r}")
            object.__setattr__(self, "w", tuple(float(x) for x in w))

    @classmethod
    def monodisperse(cls, size: int, mass: float = 1.0) -> "InitialData":
        return cls("monodisperse", size=size, mass=mass)

    @classmethod
    def geometric(cls, ratio: float, mass: float | None = None) -> "InitialData":
        return cls("geometric", ratio=ratio, mass=mass)

    @classmethod
    def explicit(cls, w: Sequence[float]) -> "InitialData":
        return cls("explicit", w=tuple(w))

    def support(self, l: int | None = None) -> int:
        """Largest size carrying positive concentration (0 for empty data)."""
        if self.mode == "monodisperse":
            return int(self.size) if self.mass > 0 else 0
        if self.mode == "geometric":
            if l is None:
                raise ValueError("geometric data has support up to the truncation size")
            return l if (self.mass is None or self.mass > 0) else 0
        nz = np.nonzero(np.asarray(self.w))[0]
        return int(nz[-1]) + 1 if nz.size else 0

    def resolve(self, l: int) -> np.ndarray:
        if l < 1:
            raise ValueError("truncation size must be >= 1")
        w = np.zeros(l)
        if self.mode == "monodisperse":
            if self.size > l:
                raise ValueError(f"monodisperse size {self.size} exceeds truncation size {l}")
            w[self.size - 1] = self.mass / self.size
        elif self.mode == "geometric":
            sizes = np.arange(1, l + 1)
            w = self.ratio ** sizes.astype(float)
            if self.mass is not None:
                w *= self.mass / np.dot(sizes, w)
        else:
            v = np.asarray(self.w, dtype=float)
            if v.size > l and np.any(v[l:] != 0):
                raise ValueError(f"explicit data has support beyond truncation size {l}")
            n = min(v.size, l)
            w[:n] = v[:n]
        return w

    def state(self, l: int) -> ClusterState:
        return ClusterState(self.resolve(l), 0.0)


# --------------------------------------------------------------------------
# moments
# --------------------------------------------------------------------------


def moment(state, alpha: float) -> float:
    """``sum_i i**alpha * w_i``."""
    w = _vector(state)
    sizes = np.arange(1.0, w.size + 1)
    return float(np.dot(sizes ** alpha, w))


def tail_mass(state, r: int) -> float:
    """``sum_{i >= r} i * w_i``."""
    w = _vector(state)
    if not 1 <= r <= w.size:
        raise ValueError(f"tail index r={r} outside 1..{w.size}")
    sizes = np.arange(r, w.size + 1, dtype=float)
    return float(np.dot(sizes, w[r - 1:]))


def tail_masses(w: np.ndarray) -> np.ndarray:
    """All tails at once: ``out[..., r-1] = sum_{i >= r} i * w_i``."""
    w = np.asarray(w, dtype=float)
    iw = w * np.arange(1.0, w.shape[-1] + 1)
    return np.flip(np.cumsum(np.flip(iw, axis=-1), axis=-1), axis=-1)


def mass_norm(v) -> float:
    """Weighted l1 norm ``sum_i i * |v_i|``."""
    v = np.asarray(_vector(v), dtype=float)
    return float(np.dot(np.arange(1.0, v.size + 1), np.abs(v)))


# --------------------------------------------------------------------------
# moment weights
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MomentWeight:
    """Convex weight sampled on ``0..n``: ``values[i] = G(i)``, ``derivative[i] = G'(i)``.

    The class flags are discrete evidence for membership in the weights for
    which moment monotonicity holds: ``G(0) = 0``, ``G >= 0``, nonnegative
    second differences of ``G``, nonpositive second differences of ``G'``
    and ``G'(0) >= 0``. ``superlinear`` records evidence that ``G'`` grows
    without bound.
    """

    values: np.ndarray
    derivative: np.ndarray
    name: str = "G"
    superlinear: bool = False
    thresholds: tuple[int, ...] = ()
    bound: Optional[float] = None
    convex: bool = field(init=False)
    derivative_concave: bool = field(init=False)
    derivative_at_zero_ok: bool = field(init=False)

    def __post_init__(self):
        G = np.array(self.values, dtype=float)
        dG = np.array(self.derivative, dtype=float)
        if G.shape != dG.shape or G.ndim != 1 or G.size < 2:
            raise ValueError("values and derivative must be matching 1-D samples on 0..n")
        G.setflags(write=False)
        dG.setflags(write=False)
        object.__setattr__(self, "values", G)
        object.__setattr__(self, "derivative", dG)
        scale = max(float(np.max(np.abs(G))), 1.0)
        dscale = max(float(np.max(np.abs(dG))), 1.0)
        tol, dtol = 1e-12 * scale, 1e-12 * dscale
        object.__setattr__(self, "convex", bool(G.size < 3 or np.all(np.diff(G, 2) >= -tol)))
        object.__setattr__(self, "derivative_concave", bool(dG.size < 3 or np.all(np.diff(dG, 2) <= dtol)))
        object.__setattr__(self, "derivative_at_zero_ok", bool(dG[0] >= 0))

    @property
    def n(self) -> int:
        return self.values.size - 1

    @property
    def zero_at_origin(self) -> bool:
        return self.values[0] == 0.0

    @property
    def nonnegative(self) -> bool:
        return bool(np.all(self.values >= 0))

    @property
    def in_G1(self) -> bool:
        return (self.zero_at_origin and self.nonnegative and self.convex
                and self.derivative_concave and self.derivative_at_zero_ok)

    @property
    def in_G1_inf(self) -> bool:
        return self.in_G1 and self.superlinear

    def failed_checks(self) -> list[str]:
        names = {
            "G(0) = 0": self.zero_at_origin,
            "G >= 0": self.nonnegative,
            "G convex": self.convex,
            "G' concave": self.derivative_concave,
            "G'(0) >= 0": self.derivative_at_zero_ok,
        }
        return [k for k, ok in names.items() if not ok]

    def over_size(self) -> np.ndarray:
        """``G(i)/i`` for ``i = 1..n``."""
        return self.values[1:] / np.arange(1.0, self.n + 1)


def power_weight(p: float, n: int) -> MomentWeight:
    """``G(z) = z**p`` sampled on ``0..n``; in the class for ``1 <= p <= 2``."""
    z = np.arange(0.0, n + 1)
    with np.errstate(divide="ignore"):
        dG = p * z ** (p - 1) if p != 1 else np.ones_like(z)
    if p > 1:
        dG[0] = 0.0
    return MomentWeight(z ** p, dG, name=f"z^{p:g}", superlinear=p > 1)


def weight_from_function(G: Callable, dG: Callable, n: int, name: str = "G",
                         superlinear: bool = False) -> MomentWeight:
    z = np.arange(0.0, n + 1)
    return MomentWeight(np.array([G(x) for x in z]), np.array([dG(x) for x in z]),
                        name=name, superlinear=superlinear)


def g_moment(state, G: MomentWeight) -> float:
    """``sum_i G(i) * w_i``."""
    w = _vector(state)
    if G.n < w.size:
        raise ValueError(f"weight sampled up to {G.n}, state needs {w.size}")
    return float(np.dot(G.values[1: w.size + 1], w))


def build_dlvp_weight(data, l: int) -> MomentWeight:
    """Superlinear convex weight ``G0`` with ``sum_i G0(i) w_i`` finite.

    Thresholds ``n_0 = 1 < n_1 < n_2 < ...`` are chosen with
    ``n_{k+1} >= 2 n_k`` and tail mass ``T(n_k) <= T(1) 2**-k``. ``G0'`` is
    piecewise linear through ``(0, 0), (n_1, 1), (n_2, 2), ...``; the
    doubling makes the gaps nondecreasing, hence ``G0'`` concave. ``G0`` is
    the running integral of ``G0'``, exact at integers.

    ``bound`` is ``2 T(1) sum_k (k+1) 2**-k = 8 T(1)``, an upper bound on
    ``sum_i G0(i) w_i`` (since ``G0(i) <= i G0'(i) <= (k+1) i`` on
    ``[n_k, n_{k+1})``).
    """
    w = data.resolve(l) if isinstance(data, InitialData) else np.asarray(_vector(data), dtype=float)
    if w.size > l:
        raise ValueError(f"data longer than truncation size {l}")
    w = np.pad(w, (0, l - w.size))
    tails = tail_masses(w)
    total = float(tails[0])
    if not total > 0:
        raise ValueError("initial data has zero mass")

    def tail(n: int) -> float:
        return float(tails[n - 1]) if n <= l else 0.0

    knots = [1]
    k = 0
    while knots[-1] < l:
        n = 2 * knots[-1]
        target = total * 2.0 ** -(k + 1)
        while tail(n) > target:
            n += 1
        knots.append(n)
        k += 1
    thresholds = tuple(knots[1:])
    xs = np.array((0,) + thresholds, dtype=float)
    ys = np.arange(len(xs), dtype=float)

    z = np.arange(0.0, l + 1)
    dG = np.interp(z, xs, ys)
    G = np.concatenate(([0.0], np.cumsum(0.5 * (dG[1:] + dG[:-1]))))
    return MomentWeight(G, dG, name="dlvp", superlinear=True, thresholds=thresholds,
                        bound=2.0 * total * 4.0)
