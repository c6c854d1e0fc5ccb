"""Degree distributions, ensemble descriptors and Tanner graph sampling.

Ensembles come in two flavors: "standard" ensembles given by a pair of
edge-perspective degree distributions (lambda, rho), sampled with the
configuration model, and "poisson" ensembles given by lambda and a design
rate, where every edge picks its check node uniformly at random.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

__all__ = [
    "DegreeDistribution",
    "EnsembleSpec",
    "TannerGraph",
    "validate_and_normalize",
    "sample_graph",
    "sample_graph_expurgated",
    "min_stopping_set_leq",
    "ExpurgationBudgetError",
]

# exhaustive stopping-set search is exponential; beyond this we refuse
STOPPING_SET_MAX_S = 6
STOPPING_SET_MAX_N = 64


class ExpurgationBudgetError(ValueError):
    """Requested exact stopping-set search above the supported budget."""


@dataclass(frozen=True)
class DegreeDistribution:
    """Edge-perspective degree distribution, poly(x) = sum_i c_i x^(i-1).

    Coefficients are fractions of edges attached to nodes of each degree;
    they are normalized to sum to one.
    """

    coeffs: tuple[tuple[int, float], ...]  # sorted (degree, coefficient)

    def __post_init__(self):
        total = sum(c for _, c in self.coeffs)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"coefficients sum to {total!r}, expected 1")

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(d for d, _ in self.coeffs)

    @property
    def max_degree(self) -> int:
        return self.coeffs[-1][0]

    @property
    def min_degree(self) -> int:
        return self.coeffs[0][0]

    def coeff(self, degree: int) -> float:
        for d, c in self.coeffs:
            if d == degree:
                return c
        return 0.0

    def __call__(self, x):
        return sum(c * np.asarray(x) ** (d - 1) for d, c in self.coeffs)

    def derivative(self, x):
        return sum(c * (d - 1) * np.asarray(x) ** (d - 2) for d, c in self.coeffs if d >= 2)

    def integral(self) -> float:
        """Integral over [0, 1]; reciprocal of the average node degree."""
        return sum(c / d for d, c in self.coeffs)

    @property
    def avg_node_degree(self) -> float:
        return 1.0 / self.integral()

    def node_fractions(self) -> dict[int, float]:
        """Node-perspective fractions (fraction of nodes with each degree)."""
        raw = {d: c / d for d, c in self.coeffs}
        tot = sum(raw.values())
        return {d: v / tot for d, v in raw.items()}

    def node_poly(self, x):
        """Normalized node-perspective polynomial, value 1 at x = 1."""
        fr = self.node_fractions()
        return sum(v * np.asarray(x) ** d for d, v in fr.items())

    def is_regular(self) -> bool:
        return len(self.coeffs) == 1

    def regular_degree(self) -> int:
        if not self.is_regular():
            raise ValueError("degree distribution is not regular")
        return self.coeffs[0][0]


def validate_and_normalize(raw: dict[int, float]) -> DegreeDistribution:
    """Build a DegreeDistribution from raw degree -> weight, rescaling to sum 1."""
    items = []
    for d, c in raw.items():
        d = int(d)
        c = float(c)
        if not math.isfinite(c):
            raise ValueError(f"non-finite coefficient at degree {d}")
        if c < 0:
            raise ValueError(f"negative coefficient at degree {d}")
        if d < 1:
            raise ValueError(f"degree {d} below 1")
        if c > 0:
            items.append((d, c))
    if not items:
        raise ValueError("all coefficients are zero")
    total = sum(c for _, c in items)
    items = sorted((d, c / total) for d, c in items)
    # re-normalize exactly so the sum is 1 bit-for-bit
    s = sum(c for _, c in items)
    items = [(d, c / s) for d, c in items]
    return DegreeDistribution(tuple(items))


@dataclass(frozen=True)
class EnsembleSpec:
    """Descriptor of an LDPC ensemble: kind, degree structure, n, expurgation s."""

    kind: str  # "standard" | "poisson"
    lam: DegreeDistribution
    n: int
    rho: DegreeDistribution | None = None
    rate: float | None = None
    s: int = 0

    def __post_init__(self):
        if self.kind not in ("standard", "poisson"):
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if self.kind == "standard" and self.rho is None:
            raise ValueError("standard ensemble requires rho")
        if self.kind == "poisson":
            if self.rate is None:
                raise ValueError("poisson ensemble requires rate")
            if not (0.0 <= self.rate < 1.0):
                raise ValueError("poisson design rate must be in [0, 1)")
        if self.n < 1:
            raise ValueError("blocklength must be positive")
        if self.s < 0:
            raise ValueError("expurgation parameter must be nonnegative")

    # ---- rate bookkeeping ----

    def design_rate(self) -> float:
        if self.kind == "poisson":
            return self.rate
        return 1.0 - self.rho.integral() / self.lam.integral()

    @property
    def rbar(self) -> float:
        return 1.0 - self.design_rate()

    @property
    def num_checks(self) -> int:
        if self.kind == "poisson":
            return int(round(self.n * self.rbar))
        return int(sum(self.check_node_counts().values()))

    @property
    def poisson_check_mean(self) -> float:
        """Mean residual-free check degree of the poisson ensemble."""
        if self.kind != "poisson":
            raise ValueError("only defined for poisson ensembles")
        return 1.0 / (self.rbar * self.lam.integral())

    # ---- unified check-side evaluation used by density evolution ----

    def rho_fn(self, y):
        if self.kind == "standard":
            return self.rho(y)
        c = self.poisson_check_mean
        return np.exp((np.asarray(y) - 1.0) * c)

    def rho_prime(self, y):
        if self.kind == "standard":
            return self.rho.derivative(y)
        c = self.poisson_check_mean
        return c * np.exp((np.asarray(y) - 1.0) * c)

    def rho_fn_m1(self, w):
        """rho(1 - w) - 1 without cancellation for small w."""
        w = np.asarray(w, dtype=float)
        if self.kind == "poisson":
            return np.expm1(-self.poisson_check_mean * w)
        out = np.zeros_like(w)
        log1mw = np.log1p(-np.minimum(w, 1.0 - 1e-300))
        for d, c in self.rho.coeffs:
            if d == 1:
                continue  # degree-one checks contribute (1-w)^0 - 1 = 0
            out = out + c * np.expm1((d - 1) * log1mw)
        return out

    def is_regular(self) -> bool:
        if self.kind == "standard":
            return self.lam.is_regular() and self.rho.is_regular()
        return self.lam.is_regular()

    # ---- node counts with rounding repair ----

    def variable_node_counts(self) -> dict[int, int]:
        """Integer per-degree variable node counts summing to n.

        Non-integral targets are rounded; any count mismatch is absorbed by
        the largest-degree bucket.
        """
        fr = self.lam.node_fractions()
        counts = {d: int(round(self.n * v)) for d, v in fr.items()}
        gap = self.n - sum(counts.values())
        dmax = max(counts)
        counts[dmax] += gap
        if counts[dmax] < 0:
            raise ValueError("rounding repair failed: negative node count")
        return counts

    def check_node_counts(self) -> dict[int, int]:
        """Integer per-degree check node counts with socket balance repair.

        The counts are rounded to the targets implied by rho; the largest
        degree bucket is adjusted so that check sockets match variable
        sockets.  A remainder smaller than the largest degree is absorbed by
        one extra check of the remainder degree.
        """
        if self.kind != "standard":
            raise ValueError("check node counts are only defined for standard specs")
        edges = sum(d * c for d, c in self.variable_node_counts().items())
        # target fractions of check nodes per degree
        fr = self.rho.node_fractions()
        m_target = self.n * self.rbar
        counts = {d: int(round(m_target * v)) for d, v in fr.items()}
        dmax = max(counts)
        gap = edges - sum(d * c for d, c in counts.items())
        counts[dmax] += gap // dmax  # floor division keeps the residual in [0, dmax)
        gap = edges - sum(d * c for d, c in counts.items())
        if gap:
            # residual 0 < gap < dmax: one repair node of off-target degree
            counts[int(gap)] = counts.get(int(gap), 0) + 1
        if any(c < 0 for c in counts.values()):
            raise ValueError("rounding repair failed: negative check count")
        return counts

    # ---- JSON round trip ----

    @classmethod
    def from_json(cls, doc: str | dict) -> "EnsembleSpec":
        if isinstance(doc, str):
            doc = json.loads(doc)
        kind = doc["kind"]
        lam = validate_and_normalize({int(k): float(v) for k, v in doc["lambda"].items()})
        n = int(doc["n"])
        s = int(doc.get("s", 0))
        if kind == "standard":
            rho = validate_and_normalize({int(k): float(v) for k, v in doc["rho"].items()})
            return cls(kind="standard", lam=lam, rho=rho, n=n, s=s)
        return cls(kind="poisson", lam=lam, rate=float(doc["rate"]), n=n, s=s)

    def to_json(self) -> str:
        doc = {"kind": self.kind, "lambda": {str(d): c for d, c in self.lam.coeffs},
               "n": self.n, "s": self.s}
        if self.kind == "standard":
            doc["rho"] = {str(d): c for d, c in self.rho.coeffs}
        else:
            doc["rate"] = self.rate
        return json.dumps(doc, sort_keys=True)


@dataclass
class TannerGraph:
    """Bipartite multigraph in CSR form on the variable side.

    var_ptr[v]:var_ptr[v+1] indexes var_adj, which stores the check node of
    each socket of variable v.  Parallel edges are allowed.
    """

    n: int
    m: int
    var_ptr: np.ndarray
    var_adj: np.ndarray

    @property
    def num_edges(self) -> int:
        return len(self.var_adj)

    def var_degree(self, v: int) -> int:
        return int(self.var_ptr[v + 1] - self.var_ptr[v])

    def var_checks(self, v: int) -> np.ndarray:
        return self.var_adj[self.var_ptr[v]:self.var_ptr[v + 1]]

    def check_degrees(self) -> np.ndarray:
        return np.bincount(self.var_adj, minlength=self.m)


def _degree_array(counts: dict[int, int]) -> np.ndarray:
    out = np.concatenate([np.full(c, d, dtype=np.int64) for d, c in sorted(counts.items())])
    return out


def sample_graph(spec: EnsembleSpec, rng) -> TannerGraph:
    """Sample one Tanner graph.

    Standard: uniform socket matching (configuration model).  Poisson: each
    variable socket attaches to a uniform check node independently.
    """
    rng = np.random.default_rng(rng)
    vdeg = _degree_array(spec.variable_node_counts())
    var_ptr = np.zeros(spec.n + 1, dtype=np.int64)
    np.cumsum(vdeg, out=var_ptr[1:])
    ne = int(var_ptr[-1])
    if spec.kind == "poisson":
        m = spec.num_checks
        var_adj = rng.integers(0, m, size=ne, dtype=np.int64)
    else:
        cdeg = _degree_array(spec.check_node_counts())
        m = len(cdeg)
        check_socket_owner = np.repeat(np.arange(m, dtype=np.int64), cdeg)
        if len(check_socket_owner) != ne:
            raise AssertionError("socket imbalance after rounding repair")
        var_adj = check_socket_owner[rng.permutation(ne)]
    return TannerGraph(n=spec.n, m=m, var_ptr=var_ptr, var_adj=var_adj)


def _cycle_projected_edges(g: TannerGraph):
    for v in range(g.n):
        cks = g.var_checks(v)
        if len(cks) != 2:
            raise ValueError("cycle specialization requires all degrees equal 2")
        yield int(cks[0]), int(cks[1])


def min_stopping_set_leq(g: TannerGraph, s: int) -> bool:
    """True iff some nonempty variable subset of size <= s is a stopping set.

    A stopping set induces no degree-one check.  Cycle graphs (all variable
    degrees two) use girth shortcuts for s <= 2; otherwise the search is
    exhaustive and limited to small s and n.
    """
    if s <= 0:
        return False
    all_deg2 = all(g.var_degree(v) == 2 for v in range(g.n))
    if all_deg2 and s <= 2:
        seen = set()
        for a, b in _cycle_projected_edges(g):
            if a == b:
                return True  # projected self loop: size-1 stopping set
            if s >= 2:
                key = (a, b) if a < b else (b, a)
                if key in seen:
                    return True  # parallel pair: size-2 stopping set
                seen.add(key)
        return False
    if s > STOPPING_SET_MAX_S or g.n > STOPPING_SET_MAX_N:
        raise ExpurgationBudgetError(
            f"exact stopping-set search supports s <= {STOPPING_SET_MAX_S} "
            f"and n <= {STOPPING_SET_MAX_N} (got s={s}, n={g.n})")
    for size in range(1, s + 1):
        for subset in combinations(range(g.n), size):
            deg = {}
            for v in subset:
                for c in g.var_checks(v):
                    deg[int(c)] = deg.get(int(c), 0) + 1
            if all(d >= 2 for d in deg.values()):
                return True
    return False


def sample_graph_expurgated(spec: EnsembleSpec, rng, max_tries: int = 100000) -> TannerGraph:
    """Rejection-sample a graph whose minimum stopping set exceeds spec.s.

    Falls back to an unexpurgated sample with a warning when the exact
    search budget does not cover (spec.s, spec.n).
    """
    rng = np.random.default_rng(rng)
    if spec.s == 0:
        return sample_graph(spec, rng)
    try:
        for _ in range(max_tries):
            g = sample_graph(spec, rng)
            if not min_stopping_set_leq(g, spec.s):
                return g
        raise RuntimeError(f"expurgation rejection did not accept in {max_tries} tries")
    except ExpurgationBudgetError:
        warnings.warn(
            f"expurgation s={spec.s} beyond exact search budget at n={spec.n}; "
            "sampling unexpurgated", RuntimeWarning)
        return sample_graph(spec, rng)
