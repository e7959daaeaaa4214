"""Collision kernels, daughter distributions and breakup tables.

Sizes are 1-based throughout the public API; arrays returned by the
``matrix``/``tensor`` helpers are 0-based, so entry ``[i-1, j-1]`` holds the
value for sizes ``(i, j)``.

Monomer convention: a monomer taking part in a collision re-emerges intact,
``b(1, 1; k) = 1``. Every other ``b(i, j; k)`` with ``i >= j`` is zero.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

KERNEL_FAMILIES = ("product", "power", "constant", "user-table")
DAUGHTER_FAMILIES = (
    "discrete-uniform",
    "paper-remark-uniform",
    "monomer-shatter",
    "binary-split",
    "user-table",
)

# relative slack for float comparisons in validation
REL_TOL = 1e-12


@dataclass(frozen=True)
class Violation:
    kind: str
    index: tuple
    value: float
    bound: float

    def __post_init__(self):
        object.__setattr__(self, "index", tuple(int(x) for x in self.index))
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "bound", float(self.bound))

    def __str__(self) -> str:
        return f"{self.kind} at {self.index}: {self.value!r} vs {self.bound!r}"


@dataclass
class ValidationReport:
    """Collected invariant violations; an empty report means valid."""

    subject: str
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {v.kind for v in self.violations}

    def first(self, kind: str) -> Optional[Violation]:
        for v in self.violations:
            if v.kind == kind:
                return v
        return None

    def __len__(self) -> int:
        return len(self.violations)

    def summary(self, limit: int = 5) -> str:
        if self.ok:
            return f"{self.subject}: ok"
        head = "; ".join(str(v) for v in self.violations[:limit])
        more = len(self.violations) - limit
        tail = f" (+{more} more)" if more > 0 else ""
        return f"{self.subject}: {len(self.violations)} violation(s): {head}{tail}"


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


# --------------------------------------------------------------------------
# collision kernels
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CollisionKernel:
    """Symmetric nonnegative collision rate ``a(i, j)``.

    ``quad_bound`` is the declared constant ``A1`` in ``a(i,j) <= A1*i*j``;
    ``power_bound`` is an optional ``(A_gamma, gamma)`` pair declaring
    ``a(i,j) <= A_gamma*(i*j)**gamma``. Both are claims to be checked by
    :func:`validate_kernel`, not assumptions.
    """

    family: str
    A: float = 1.0
    gamma: float = 1.0
    quad_bound: float = 1.0
    power_bound: Optional[tuple[float, float]] = None
    table: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.family not in KERNEL_FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == "user-table":
            if self.table is None or self.table.ndim != 2 or self.table.shape[0] != self.table.shape[1]:
                raise ValueError("user-table kernel needs a square table")
            object.__setattr__(self, "table", _frozen(self.table))
        if not self.quad_bound > 0:
            raise ValueError("quad_bound must be positive")
        if self.family == "power" and not 0.0 <= self.gamma <= 1.0:
            raise ValueError("power kernel exponent must lie in [0, 1]")

    # constructors ---------------------------------------------------------

    @classmethod
    def product(cls, A: float = 1.0, quad_bound: float | None = None) -> "CollisionKernel":
        return cls("product", A=A, gamma=1.0, quad_bound=A if quad_bound is None else quad_bound,
                   power_bound=(A, 1.0))

    @classmethod
    def power(cls, A: float = 1.0, gamma: float = 0.5, quad_bound: float | None = None,
              ) -> "CollisionKernel":
        return cls("power", A=A, gamma=gamma, quad_bound=A if quad_bound is None else quad_bound,
                   power_bound=(A, gamma))

    @classmethod
    def constant(cls, A: float = 1.0, quad_bound: float | None = None) -> "CollisionKernel":
        return cls("constant", A=A, gamma=0.0, quad_bound=A if quad_bound is None else quad_bound,
                   power_bound=(A, 0.0))

    @classmethod
    def from_table(cls, table, quad_bound: float | None = None,
                   power_bound: tuple[float, float] | None = None) -> "CollisionKernel":
        """Kernel from a dense table, ``table[i-1, j-1] = a(i, j)``.

        Without an explicit ``quad_bound`` the smallest admissible constant
        ``max a(i,j)/(i*j)`` is used.
        """
        table = np.asarray(table, dtype=float)
        if quad_bound is None:
            n = table.shape[0]
            ij = np.outer(np.arange(1, n + 1), np.arange(1, n + 1))
            quad_bound = max(float(np.max(table / ij)), np.finfo(float).tiny)
        return cls("user-table", quad_bound=quad_bound, power_bound=power_bound, table=table)

    # evaluation -----------------------------------------------------------

    @property
    def l_max(self) -> Optional[int]:
        return None if self.table is None else self.table.shape[0]

    def __call__(self, i: int, j: int) -> float:
        return kernel_eval(self, i, j)

    def matrix(self, l: int) -> np.ndarray:
        """Dense ``(l, l)`` array of rates for sizes ``1..l``."""
        if self.family == "user-table":
            if l > self.table.shape[0]:
                raise IndexError(f"kernel table covers sizes up to {self.table.shape[0]}, asked for {l}")
            return np.array(self.table[:l, :l])
        sizes = np.arange(1.0, l + 1)
        ij = np.outer(sizes, sizes)
        if self.family == "product":
            return self.A * ij
        if self.family == "power":
            return self.A * ij ** self.gamma
        return np.full((l, l), float(self.A))

    def separable_factor(self, l: int) -> Optional[np.ndarray]:
        """``phi`` with ``a(i,j) = phi(i)*phi(j)``, or None for tables."""
        sizes = np.arange(1.0, l + 1)
        root = np.sqrt(self.A)
        if self.family == "product":
            return root * sizes
        if self.family == "power":
            return root * sizes ** self.gamma
        if self.family == "constant":
            return np.full(l, root)
        return None

    @property
    def separable(self) -> bool:
        return self.family != "user-table"


def kernel_eval(kernel: CollisionKernel, i: int, j: int) -> float:
    """Collision rate ``a(i, j)`` for cluster sizes ``i, j >= 1``."""
    if i < 1 or j < 1:
        raise ValueError(f"cluster sizes must be >= 1, got ({i}, {j})")
    fam = kernel.family
    if fam == "product":
        return kernel.A * float(i * j)
    if fam == "power":
        return kernel.A * float(i * j) ** kernel.gamma
    if fam == "constant":
        return float(kernel.A)
    n = kernel.table.shape[0]
    if i > n or j > n:
        raise IndexError(f"kernel table covers sizes up to {n}, asked for ({i}, {j})")
    return float(kernel.table[i - 1, j - 1])


def validate_kernel(kernel: CollisionKernel, l_max: int) -> ValidationReport:
    """Check symmetry, nonnegativity and the declared growth bounds on ``1..l_max``."""
    if l_max < 2:
        raise ValueError("l_max must be >= 2")
    report = ValidationReport(f"kernel[{kernel.family}]")
    if kernel.l_max is not None and kernel.l_max < l_max:
        l_max = kernel.l_max
        report.violations.append(Violation("table-range", (kernel.l_max,), kernel.l_max, l_max))
    a = kernel.matrix(l_max)
    sizes = np.arange(1.0, l_max + 1)
    ij = np.outer(sizes, sizes)

    for i, j in zip(*np.nonzero(a != a.T)):
        if i < j:
            report.violations.append(Violation("symmetry", (i + 1, j + 1), a[i, j], a[j, i]))
    for i, j in zip(*np.nonzero(a < 0)):
        report.violations.append(Violation("negativity", (i + 1, j + 1), a[i, j], 0.0))

    bound = kernel.quad_bound * ij
    for i, j in zip(*np.nonzero(a > bound * (1 + REL_TOL))):
        report.violations.append(Violation("quadratic-growth", (i + 1, j + 1), a[i, j], bound[i, j]))

    if kernel.power_bound is not None:
        Ag, g = kernel.power_bound
        pbound = Ag * ij ** g
        for i, j in zip(*np.nonzero(a > pbound * (1 + REL_TOL))):
            report.violations.append(Violation("power-growth", (i + 1, j + 1), a[i, j], pbound[i, j]))
    return report


# --------------------------------------------------------------------------
# daughter distributions
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DaughterDistribution:
    """Fragment distribution ``b(i, j; k)``: expected number of ``i``-clusters
    produced when a ``j``-cluster breaks after hitting a ``k``-cluster.

    ``dominance`` holds the ``(beta0, beta1)`` pair claimed for the bound
    ``b(s, i; j) <= beta0 + beta1 * b(s, j; i)`` (``s < i <= j``).

    User tables are ``table[i-1, j-1]`` (k-independent) or
    ``table[i-1, j-1, k-1]``; entries with ``i >= j`` are ignored.
    """

    family: str
    dominance: tuple[float, float] = (2.0, 0.0)
    table: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.family not in DAUGHTER_FAMILIES:
            raise ValueError(f"unknown daughter family {self.family!r}")
        if self.family == "user-table":
            if self.table is None or self.table.ndim not in (2, 3):
                raise ValueError("user-table daughter needs a 2-D or 3-D table")
            object.__setattr__(self, "table", _frozen(self.table))

    @classmethod
    def builtin(cls, family: str, dominance: tuple[float, float] | None = None) -> "DaughterDistribution":
        if dominance is None:
            dominance = (0.0, 1.0) if family == "monomer-shatter" else (2.0, 0.0)
        return cls(family, dominance=tuple(dominance))

    @classmethod
    def from_table(cls, table, dominance: tuple[float, float] = (0.0, 1.0)) -> "DaughterDistribution":
        return cls("user-table", dominance=tuple(dominance), table=np.asarray(table, dtype=float))

    @property
    def k_independent(self) -> bool:
        if self.family != "user-table" or self.table.ndim == 2:
            return True
        t = self.table
        return bool(np.all(t == t[:, :, :1]))

    @property
    def l_max(self) -> Optional[int]:
        return None if self.table is None else self.table.shape[0]

    def __call__(self, i: int, j: int, k: int = 1) -> float:
        return daughter_eval(self, i, j, k)

    def matrix(self, l: int, k: int | None = None) -> np.ndarray:
        """``(l, l)`` array ``D[i-1, j-1] = b(i, j; k)`` for ``i < j``; zero elsewhere.

        The monomer convention value is not included. ``k`` is required only
        for k-dependent tables.
        """
        if self.family == "user-table":
            self._check_range(l)
            if self.table.ndim == 3:
                if k is None:
                    if not self.k_independent:
                        raise ValueError("k-dependent daughter: use tensor() or pass k")
                    k = 1
                self._check_range(k)
                src = self.table[:l, :l, k - 1]
            else:
                src = self.table[:l, :l]
            return np.triu(src, 1)

        sizes = np.arange(1, l + 1)
        i = sizes[:, None]
        j = sizes[None, :]
        below = i < j
        fam = self.family
        if fam == "discrete-uniform":
            vals = np.where(below, 2.0 / np.maximum(j - 1, 1), 0.0)
        elif fam == "paper-remark-uniform":
            vals = np.where(below, 2.0 / j, 0.0)
        elif fam == "monomer-shatter":
            vals = np.where(below & (i == 1), j.astype(float), 0.0)
        else:  # binary-split
            lo = j // 2
            hi = j - lo
            vals = np.where(below & (i == lo), 1.0, 0.0) + np.where(below & (i == hi), 1.0, 0.0)
        return vals.astype(float)

    def tensor(self, l: int) -> np.ndarray:
        """``(l, l, l)`` array ``T[i-1, j-1, k-1] = b(i, j; k)`` for ``i < j``."""
        if self.family == "user-table" and self.table.ndim == 3:
            self._check_range(l)
            t = np.array(self.table[:l, :l, :l])
            mask = np.triu(np.ones((l, l), dtype=bool), 1)
            t[~mask] = 0.0
            return t
        return np.repeat(self.matrix(l)[:, :, None], l, axis=2)

    def _check_range(self, n: int) -> None:
        if n > self.table.shape[0]:
            raise IndexError(f"daughter table covers sizes up to {self.table.shape[0]}, asked for {n}")


def daughter_eval(d: DaughterDistribution, i: int, j: int, k: int) -> float:
    """``b(i, j; k)`` including the monomer convention ``b(1, 1; k) = 1``."""
    if i < 1 or j < 1 or k < 1:
        raise ValueError(f"sizes must be >= 1, got ({i}, {j}; {k})")
    if d.family == "user-table":
        n = d.table.shape[0]
        if j > n or (d.table.ndim == 3 and k > n):
            raise IndexError(f"daughter table covers sizes up to {n}, asked for ({i}, {j}; {k})")
    if i >= j:
        return 1.0 if i == j == 1 else 0.0
    fam = d.family
    if fam == "discrete-uniform":
        return 2.0 / (j - 1)
    if fam == "paper-remark-uniform":
        return 2.0 / j
    if fam == "monomer-shatter":
        return float(j) if i == 1 else 0.0
    if fam == "binary-split":
        lo = j // 2
        return float((i == lo) + (i == j - lo))
    if d.table.ndim == 2:
        return float(d.table[i - 1, j - 1])
    return float(d.table[i - 1, j - 1, k - 1])


def validate_daughter(d: DaughterDistribution, j_max: int, k_max: int) -> ValidationReport:
    """Check fragment mass balance and the declared ``(beta0, beta1)`` dominance."""
    if j_max < 2 or k_max < 1:
        raise ValueError("need j_max >= 2 and k_max >= 1")
    report = ValidationReport(f"daughter[{d.family}]")
    n = max(j_max, k_max)
    if d.l_max is not None and d.l_max < n:
        report.violations.append(Violation("table-range", (d.l_max,), d.l_max, n))
        j_max, k_max = min(j_max, d.l_max), min(k_max, d.l_max)
        n = max(j_max, k_max)
    T = d.tensor(n)  # T[i, j, k], strict i < j
    sizes = np.arange(1.0, n + 1)

    for i, j, k in zip(*np.nonzero(T < 0)):
        report.violations.append(Violation("negativity", (i + 1, j + 1, k + 1), T[i, j, k], 0.0))
    if d.family == "user-table":
        raw = d.table[:n, :n] if d.table.ndim == 2 else d.table[:n, :n, 0]
        for i, j in zip(*np.nonzero(np.tril(raw) != 0)):
            report.violations.append(Violation("support", (i + 1, j + 1), raw[i, j], 0.0))

    # sum_i i*b(i, j; k) = j
    mass = np.einsum("i,ijk->jk", sizes, T)
    for j in range(2, j_max + 1):
        row = mass[j - 1, :k_max]
        bad = np.nonzero(np.abs(row - j) > REL_TOL * j)[0]
        for k in bad:
            report.violations.append(Violation("mass", (j, k + 1), float(row[k]), float(j)))

    # b(s, i; j) <= beta0 + beta1 * b(s, j; i) for s < i <= j
    b0, b1 = d.dominance
    m = min(j_max, k_max)
    for i in range(2, m + 1):
        for j in range(i, m + 1):
            lhs = T[: i - 1, i - 1, j - 1]
            rhs = b0 + b1 * T[: i - 1, j - 1, i - 1]
            bad = np.nonzero(lhs > rhs + REL_TOL * np.maximum(np.abs(rhs), 1.0))[0]
            for s in bad:
                report.violations.append(Violation("dominance", (s + 1, i, j), float(lhs[s]), float(rhs[s])))
    return report


# --------------------------------------------------------------------------
# breakup tables
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BreakupTable:
    """Two-body breakup distribution ``B(s; i, j)`` for sizes ``i, j <= l_max``.

    Stored as ``data[s-1, i-1, j-1]`` with ``s`` up to ``2*l_max - 1``.
    """

    data: np.ndarray
    provenance: str = "user-specified"

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 3 or data.shape[1] != data.shape[2] or data.shape[0] != 2 * data.shape[1] - 1:
            raise ValueError("breakup table must have shape (2n-1, n, n)")
        object.__setattr__(self, "data", _frozen(data))
        if self.provenance not in ("derived-from-b", "user-specified"):
            raise ValueError(f"unknown provenance {self.provenance!r}")

    @property
    def l_max(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_daughter(cls, d: DaughterDistribution, l_max: int) -> "BreakupTable":
        """Table ``B(s; i, j) = [i>=s] b(s, i; j) + [j>=s] b(s, j; i)`` on ``1..l_max``."""
        T = d.tensor(l_max)
        T[0, 0, :] = 1.0  # monomer convention
        data = np.zeros((2 * l_max - 1, l_max, l_max))
        data[:l_max] = T + T.transpose(0, 2, 1)
        return cls(data, provenance="derived-from-b")

    @classmethod
    def from_entries(cls, entries: dict[tuple[int, int, int], float], l_max: int) -> "BreakupTable":
        """Build from ``{(s, i, j): value}``; entries are mirrored to ``(s, j, i)``."""
        data = np.zeros((2 * l_max - 1, l_max, l_max))
        for (s, i, j), v in entries.items():
            data[s - 1, i - 1, j - 1] = v
            data[s - 1, j - 1, i - 1] = v
        return cls(data)

    def row(self, i: int, j: int) -> np.ndarray:
        """``B(s; i, j)`` for ``s = 1..i+j-1``."""
        if not (1 <= i <= self.l_max and 1 <= j <= self.l_max):
            raise IndexError(f"breakup table covers sizes up to {self.l_max}, asked for ({i}, {j})")
        return np.array(self.data[: i + j - 1, i - 1, j - 1])

    def allows_mass_transfer(self, l: int | None = None) -> bool:
        """True if some product is larger than both colliders."""
        n = self.l_max if l is None else min(l, self.l_max)
        s = np.arange(1, 2 * n)[:, None, None]
        big = np.maximum.outer(np.arange(1, n + 1), np.arange(1, n + 1))[None]
        return bool(np.any(self.data[: 2 * n - 1, :n, :n][np.broadcast_to(s > big, (2 * n - 1, n, n))] > 0))


def map_b_to_B(d: DaughterDistribution, i: int, j: int) -> np.ndarray:
    """Breakup row ``B(s; i, j)``, ``s = 1..i+j-1``, of a no-mass-transfer model."""
    if i < 1 or j < 1:
        raise ValueError("sizes must be >= 1")
    out = np.zeros(i + j - 1)
    for s in range(1, i + j):
        if i >= s:
            out[s - 1] += daughter_eval(d, s, i, j)
        if j >= s:
            out[s - 1] += daughter_eval(d, s, j, i)
    return out


def validate_B(B: BreakupTable, l_max: int) -> ValidationReport:
    """Check symmetry, nonnegativity and ``sum_s s*B(s; i, j) = i + j``."""
    if l_max < 2:
        raise ValueError("l_max must be >= 2")
    report = ValidationReport(f"breakup[{B.provenance}]")
    if B.l_max < l_max:
        report.violations.append(Violation("table-range", (B.l_max,), B.l_max, l_max))
        l_max = B.l_max
    data = B.data[: 2 * l_max - 1, :l_max, :l_max]
    for s, i, j in zip(*np.nonzero(data != data.transpose(0, 2, 1))):
        if i < j:
            report.violations.append(Violation("symmetry", (s + 1, i + 1, j + 1), data[s, i, j], data[s, j, i]))
    for s, i, j in zip(*np.nonzero(data < 0)):
        report.violations.append(Violation("negativity", (s + 1, i + 1, j + 1), data[s, i, j], 0.0))

    sizes = np.arange(1, l_max + 1)
    total = sizes[:, None] + sizes[None, :]
    s_idx = np.arange(1, 2 * l_max)[:, None, None]
    # products beyond i+j-1 are not admissible
    outside = (s_idx > total[None] - 1) & (data != 0)
    for s, i, j in zip(*np.nonzero(outside)):
        report.violations.append(Violation("support", (s + 1, i + 1, j + 1), data[s, i, j], 0.0))
    mass = np.einsum("s,sij->ij", np.arange(1.0, 2 * l_max), data)
    for i, j in zip(*np.nonzero(np.abs(mass - total) > REL_TOL * total)):
        report.violations.append(Violation("mass", (i + 1, j + 1), float(mass[i, j]), float(total[i, j])))
    return report


# --------------------------------------------------------------------------
# CSV tables
# --------------------------------------------------------------------------


def _read_rows(path, columns: tuple[str, ...]) -> list[tuple]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(columns) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing column(s) {sorted(missing)}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            try:
                idx = tuple(int(rec[c]) for c in columns[:-1])
                val = float(rec[columns[-1]])
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if min(idx) < 1:
                raise ValueError(f"{path}:{lineno}: sizes must be >= 1")
            rows.append((*idx, val))
    return rows


def load_kernel_csv(path: str | Path, l_max: int | None = None, **bounds) -> CollisionKernel:
    """Kernel table from CSV columns ``i, j, value`` (entries mirrored)."""
    rows = _read_rows(path, ("i", "j", "value"))
    n = l_max or max(max(r[0], r[1]) for r in rows)
    given = {(r[0], r[1]) for r in rows}
    table = np.zeros((n, n))
    for i, j, v in rows:
        table[i - 1, j - 1] = v
        if (j, i) not in given:
            table[j - 1, i - 1] = v
    return CollisionKernel.from_table(table, **bounds)


def load_daughter_csv(path: str | Path, l_max: int | None = None,
                      dominance: tuple[float, float] = (0.0, 1.0)) -> DaughterDistribution:
    """Daughter table from CSV columns ``i, j, k, value``."""
    rows = _read_rows(path, ("i", "j", "k", "value"))
    n = l_max or max(max(r[:3]) for r in rows)
    table = np.zeros((n, n, n))
    for i, j, k, v in rows:
        table[i - 1, j - 1, k - 1] = v
    return DaughterDistribution.from_table(table, dominance=dominance)


def load_breakup_csv(path: str | Path, l_max: int | None = None) -> BreakupTable:
    """Breakup table from CSV columns ``i, j, s, value`` (entries mirrored)."""
    rows = _read_rows(path, ("i", "j", "s", "value"))
    n = l_max or max(max(r[0], r[1]) for r in rows)
    return BreakupTable.from_entries({(s, i, j): v for i, j, s, v in rows}, n)
