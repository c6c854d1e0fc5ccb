import numpy as np
import pytest

from flscaling import EnsembleSpec, validate_and_normalize


def regular_spec(l, r, n=1024, s=0):
    return EnsembleSpec(kind="standard", lam=validate_and_normalize({l: 1.0}),
                        rho=validate_and_normalize({r: 1.0}), n=n, s=s)


def poisson_spec(l, rate, n=1024, s=0):
    return EnsembleSpec(kind="poisson", lam=validate_and_normalize({l: 1.0}),
                        rate=rate, n=n, s=s)


@pytest.fixture
def d36():
    return regular_spec(3, 6)


@pytest.fixture
def poisson3():
    return poisson_spec(3, 0.0)


@pytest.fixture
def cycle_half():
    return poisson_spec(2, 0.5)


def reference_peel_outcome(graph, erased):
    """Order-free peeling (confluent): returns the residual size.

    Removes any variable attached to a degree-one check until none remains;
    the result is the maximal stopping set inside the erased set and does
    not depend on removal order.
    """
    erased = set(int(v) for v in erased)
    cdeg = {}
    for v in erased:
        for c in graph.var_checks(v):
            cdeg[int(c)] = cdeg.get(int(c), 0) + 1
    changed = True
    while changed:
        changed = False
        for v in list(erased):
            if any(cdeg[int(c)] == 1 for c in graph.var_checks(v)):
                erased.discard(v)
                for c in graph.var_checks(v):
                    cdeg[int(c)] -= 1
                changed = True
    return len(erased)


def contains_stopping_set_table(graph):
    """fail[S] over all erasure bitmasks S: does S contain a stopping set.

    Built by subset dynamic programming from the direct definition, so it is
    independent of any peeling implementation.
    """
    n = graph.n
    checks = [tuple(int(c) for c in graph.var_checks(v)) for v in range(n)]
    is_stop = np.zeros(1 << n, dtype=bool)
    for mask in range(1, 1 << n):
        deg = {}
        for v in range(n):
            if mask >> v & 1:
                for c in checks[v]:
                    deg[c] = deg.get(c, 0) + 1
        is_stop[mask] = all(d >= 2 for d in deg.values())
    fail = np.zeros(1 << n, dtype=bool)
    for mask in range(1, 1 << n):
        if is_stop[mask]:
            fail[mask] = True
            continue
        f = False
        m = mask
        while m:
            v = (m & -m).bit_length() - 1
            if fail[mask & ~(1 << v)]:
                f = True
                break
            m &= m - 1
        fail[mask] = f
    return fail
