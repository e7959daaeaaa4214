"""Right-hand side of the truncated collision-induced breakage system.

Only pairs ``(j, k)`` with ``j + k <= l`` collide, in gain and loss alike;
this is what makes total mass an exact invariant of the truncated system.

With the per-cluster collision rate ``R_j = sum_{k <= l-j} a(j,k) w_j w_k``
the daughter form reads::

    dw_i/dt = sum_{j > i} sum_k b(i, j; k) a(j, k) w_j w_k  -  R_i   (i >= 2)

and the monomer loss ``R_1`` is cancelled by the convention ``b(1,1;k) = 1``,
so it is left out.

Evaluation tiers, picked by :class:`RhsWorkspace`:

``separable``  kernel ``a = phi(j) phi(k)`` and k-independent daughter,
               ``R_j = phi_j w_j P_{l-j}`` from prefix sums ``P``; O(l^2).
``rowsum``     any kernel, k-independent daughter; O(l^2).
``tensor``     k-dependent daughter; O(l^3).
``naive``      explicit triple sum, kept as the reference path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .kernels import BreakupTable, CollisionKernel, DaughterDistribution
from .state import ClusterState

Model = Union[DaughterDistribution, BreakupTable]

# extended precision above this size
LONG_SUM_THRESHOLD = 1024


def _vector(state) -> np.ndarray:
    if isinstance(state, ClusterState):
        return state.w
    w = np.asarray(state, dtype=float)
    if w.ndim != 1:
        raise ValueError("state must be a 1-D vector")
    return w


def pair_mask(l: int) -> np.ndarray:
    """Boolean ``(l, l)`` mask of admissible pairs ``j + k <= l``."""
    s = np.arange(1, l + 1)
    return (s[:, None] + s[None, :]) <= l


def pair_flux(w: np.ndarray, a: np.ndarray) -> np.ndarray:
    """``F[j-1, k-1] = a(j,k) w_j w_k`` on admissible pairs, zero elsewhere."""
    l = w.size
    return np.where(pair_mask(l), a * np.outer(w, w), 0.0)


def gross_flux(state, kernel: CollisionKernel) -> float:
    """``sum_{j+k<=l} j a(j,k) w_j w_k``, the scale of mass exchanged per unit time."""
    w = _vector(state)
    F = pair_flux(w, kernel.matrix(w.size))
    return float(np.dot(np.arange(1.0, w.size + 1), F.sum(axis=1)))


@dataclass
class RhsWorkspace:
    """Precomputed tables for repeated evaluation at a fixed truncation size.

    Not shared between threads; build one per worker.
    """

    l: int
    kernel: CollisionKernel
    model: Model
    method: str = "auto"
    tier: str = field(init=False)
    _a: Optional[np.ndarray] = field(init=False, default=None, repr=False)
    _phi: Optional[np.ndarray] = field(init=False, default=None, repr=False)
    _D: Optional[np.ndarray] = field(init=False, default=None, repr=False)
    _T: Optional[np.ndarray] = field(init=False, default=None, repr=False)
    _B: Optional[np.ndarray] = field(init=False, default=None, repr=False)
    _mask: Optional[np.ndarray] = field(init=False, default=None, repr=False)

    def __post_init__(self):
        l = self.l
        if l < 1:
            raise ValueError("truncation size must be >= 1")
        if isinstance(self.model, BreakupTable):
            if self.model.l_max < l:
                raise ValueError(f"breakup table covers sizes up to {self.model.l_max}, need {l}")
            self.tier = "breakup"
            self._B = np.array(self.model.data[:l, :l, :l])
            self._a = self.kernel.matrix(l)
            self._mask = pair_mask(l)
            return

        d = self.model
        tier = self.method
        if tier == "auto":
            if not d.k_independent:
                tier = "tensor"
            elif self.kernel.separable:
                tier = "separable"
            else:
                tier = "rowsum"
        if tier not in ("separable", "rowsum", "tensor", "naive"):
            raise ValueError(f"unknown rhs method {tier!r}")
        if tier in ("separable", "rowsum") and not d.k_independent:
            raise ValueError(f"{tier} path needs a k-independent daughter")
        if tier == "separable" and not self.kernel.separable:
            raise ValueError("separable path needs a separable kernel")
        self.tier = tier

        if tier == "separable":
            self._phi = self.kernel.separable_factor(l)
        else:
            self._a = self.kernel.matrix(l)
            self._mask = pair_mask(l)
        if tier == "tensor":
            self._T = d.tensor(l)
        elif tier == "naive" and not d.k_independent:
            self._T = d.tensor(l)
        else:
            self._D = d.matrix(l)

    def collision_rates(self, w: np.ndarray) -> np.ndarray:
        """``R_j = sum_{k <= l-j} a(j,k) w_j w_k``."""
        if self._phi is not None:
            pw = self._phi * w
            prefix = np.concatenate(([0.0], np.cumsum(pw)))  # prefix[m] = P_m
            return pw * prefix[self.l - np.arange(1, self.l + 1)]
        return w * ((self._a * self._mask) @ w)

    def __call__(self, w: np.ndarray) -> np.ndarray:
        w = _vector(w)
        if w.size != self.l:
            raise ValueError(f"state has {w.size} entries, workspace built for {self.l}")
        if self.tier == "breakup":
            return self._breakup(w)
        if self.tier == "naive":
            return self._naive(w)
        if self.tier == "tensor":
            F = np.where(self._mask, self._a * np.outer(w, w), 0.0)
            gain = np.tensordot(self._T, F, axes=([1, 2], [0, 1]))
            loss = F.sum(axis=1)
        else:
            if self.l > LONG_SUM_THRESHOLD:
                wl = w.astype(np.longdouble)
                R = self._rates_long(wl)
                gain = (self._D.astype(np.longdouble) @ R).astype(float)
                loss = R.astype(float)
            else:
                R = self.collision_rates(w)
                gain = self._D @ R
                loss = R
        out = gain - loss
        out[0] = gain[0]
        return out

    def _rates_long(self, w: np.ndarray) -> np.ndarray:
        if self._phi is not None:
            pw = self._phi.astype(np.longdouble) * w
            prefix = np.concatenate((np.zeros(1, dtype=np.longdouble), np.cumsum(pw)))
            return pw * prefix[self.l - np.arange(1, self.l + 1)]
        return w * ((self._a * self._mask).astype(np.longdouble) @ w)

    def _naive(self, w: np.ndarray) -> np.ndarray:
        l = self.l
        a = self._a
        F = np.where(self._mask, a * np.outer(w, w), 0.0)
        out = np.zeros(l)
        for i in range(1, l + 1):
            # triple sum over j > i, k <= l - j; F is already zero outside
            if self._T is not None:
                bij = self._T[i - 1, i:, :]
            else:
                bij = self._D[i - 1, i:, None]
            gain = np.sum(bij * F[i:, :])
            loss = np.sum(F[i - 1, :]) if i >= 2 else 0.0
            out[i - 1] = gain - loss
        return out

    def _breakup(self, w: np.ndarray) -> np.ndarray:
        F = np.where(self._mask, self._a * np.outer(w, w), 0.0)
        gain = 0.5 * np.tensordot(self._B, F, axes=([1, 2], [0, 1]))
        return gain - F.sum(axis=1)


def rhs_b_form(state, kernel: CollisionKernel, d: DaughterDistribution,
               method: str = "auto") -> np.ndarray:
    """Time derivative of the truncated daughter-form system."""
    w = _vector(state)
    return RhsWorkspace(w.size, kernel, d, method=method)(w)


def rhs_B_form(state, kernel: CollisionKernel, B: BreakupTable) -> np.ndarray:
    """Time derivative of the truncated breakup-table form.

    ``dw_i/dt = 1/2 sum_{p+q<=l} B(i; p, q) a(p,q) w_p w_q - sum_{j<=l-i} a(i,j) w_i w_j``.
    """
    w = _vector(state)
    return RhsWorkspace(w.size, kernel, B)(w)


def gain_loss(state, kernel: CollisionKernel, d: DaughterDistribution) -> tuple[np.ndarray, np.ndarray]:
    """Gain and loss parts of the daughter form, ``rhs = gain - loss``."""
    w = _vector(state)
    l = w.size
    F = pair_flux(w, kernel.matrix(l))
    if d.k_independent:
        gain = d.matrix(l) @ F.sum(axis=1)
    else:
        gain = np.tensordot(d.tensor(l), F, axes=([1, 2], [0, 1]))
    loss = F.sum(axis=1)
    loss[0] = 0.0
    return gain, loss


def moment_rate_gme(state, kernel: CollisionKernel, d: DaughterDistribution, mu) -> float:
    """Rate of change of ``sum_i mu_i w_i`` along the truncated system.

    Evaluates ``sum_{k=2}^{l-1} sum_{j=1}^{l-k} (sum_{i<k} mu_i b(i,k;j) - mu_k) a(j,k) w_j w_k``
    directly; the ``k = 1`` term vanishes under the monomer convention.
    """
    w = _vector(state)
    mu = np.asarray(mu, dtype=float)
    l = w.size
    if mu.shape != (l,):
        raise ValueError(f"weight vector must have length {l}")
    a = kernel.matrix(l)
    D = d.matrix(l) if d.k_independent else None
    total = 0.0
    for k in range(2, l):
        js = np.arange(1, l - k + 1)
        if d.k_independent:
            frag = np.dot(mu[: k - 1], D[: k - 1, k - 1])
        else:
            frag = np.array([sum(mu[i - 1] * d(i, k, j) for i in range(1, k)) for j in js])
        coeff = frag - mu[k - 1]
        total += float(np.sum(coeff * a[js - 1, k - 1] * w[js - 1] * w[k - 1]))
    return total
