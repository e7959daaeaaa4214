"""Shared fixtures and independent reference implementations.

The reference functions below are written from the model definitions with
plain Python loops and share no code with the package.
"""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

BUILTIN_DAUGHTERS = ("discrete-uniform", "monomer-shatter", "binary-split")
ALL_BUILTIN_DAUGHTERS = BUILTIN_DAUGHTERS + ("paper-remark-uniform",)

# criterion lines collected by test_acceptance, echoed in the terminal summary
ACCEPTANCE_LINES: dict[str, str] = {}


def ref_kernel(family, A=1.0, gamma=1.0):
    if family == "product":
        return lambda i, j: A * i * j
    if family == "power":
        return lambda i, j: A * (i * j) ** gamma
    if family == "constant":
        return lambda i, j: A
    raise ValueError(family)


def ref_daughter(family):
    """``b(i, j; k)`` with the monomer convention."""

    def b(i, j, k):
        if i >= j:
            return 1.0 if i == j == 1 else 0.0
        if family == "discrete-uniform":
            return 2.0 / (j - 1)
        if family == "paper-remark-uniform":
            return 2.0 / j
        if family == "monomer-shatter":
            return float(j) if i == 1 else 0.0
        if family == "binary-split":
            halves = (j // 2, (j + 1) // 2)
            return float(halves.count(i))
        raise ValueError(family)

    return b


def ref_rhs_b(w, a, b):
    """Daughter form by direct summation; gain counts j >= i so the monomer
    term b(1,1;k) cancels the monomer loss."""
    l = len(w)
    out = []
    for i in range(1, l + 1):
        gain = 0.0
        for j in range(i, l + 1):
            for k in range(1, l - j + 1):
                gain += b(i, j, k) * a(j, k) * w[j - 1] * w[k - 1]
        loss = sum(a(i, k) * w[i - 1] * w[k - 1] for k in range(1, l - i + 1))
        out.append(gain - loss)
    return np.array(out)


def ref_B_from_b(b):
    def B(s, p, q):
        v = 0.0
        if p >= s:
            v += b(s, p, q)
        if q >= s:
            v += b(s, q, p)
        return v

    return B


def ref_rhs_B(w, a, B):
    l = len(w)
    out = []
    for i in range(1, l + 1):
        gain = 0.0
        for p in range(1, l):
            for q in range(1, l - p + 1):
                gain += 0.5 * B(i, p, q) * a(p, q) * w[p - 1] * w[q - 1]
        loss = sum(a(i, k) * w[i - 1] * w[k - 1] for k in range(1, l - i + 1))
        out.append(gain - loss)
    return np.array(out)


def random_state(rng, l, sparsity=0.3):
    w = rng.random(l) * rng.choice([1e-3, 1.0, 10.0])
    w[rng.random(l) < sparsity] = 0.0
    return w


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k.split("-")[0]), k)):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
