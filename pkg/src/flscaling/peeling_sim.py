"""Finite-length Monte Carlo: erasure channels, peeling decoder, curves.

Graphs are resampled every trial (ensemble averages).  The heavy loops
live in compiled kernels; trials get independent counter-derived RNG
streams, and accumulation happens in fixed chunks of exact integer
counters, so outputs are bit-identical for any thread count.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .density_evolution import MarginallyStableError, critical_data
from .ensembles import (EnsembleSpec, ExpurgationBudgetError, TannerGraph,
                        min_stopping_set_leq, sample_graph_expurgated)

__all__ = [
    "Channel",
    "McCurve",
    "McRow",
    "PeelOutcome",
    "erase",
    "peel",
    "mc_curve",
    "trajectory_stats",
    "TrajectoryCheckpoint",
]

N_CHUNKS = 256  # fixed accumulation granularity, independent of thread count


@dataclass(frozen=True)
class Channel:
    """Erasure channel: iid with probability eps, or exactly count erasures."""

    kind: str  # "rand" | "exact"
    eps: float = 0.0
    count: int = 0

    @staticmethod
    def rand(eps: float) -> "Channel":
        if not 0.0 <= eps <= 1.0:
            raise ValueError("erasure probability must be in [0, 1]")
        return Channel(kind="rand", eps=eps)

    @staticmethod
    def exact(count: int) -> "Channel":
        if count < 0:
            raise ValueError("erasure count must be nonnegative")
        return Channel(kind="exact", count=count)


def erase(n: int, channel: Channel, rng) -> np.ndarray:
    """Sample the erased index set for one transmission."""
    rng = np.random.default_rng(rng)
    if channel.kind == "rand":
        return np.flatnonzero(rng.random(n) < channel.eps)
    if channel.count > n:
        raise ValueError("cannot erase more bits than the blocklength")
    return rng.choice(n, size=channel.count, replace=False)


@dataclass(frozen=True)
class PeelOutcome:
    success: bool
    v_stop: int


def peel(graph: TannerGraph, erased, seed: int = 0) -> PeelOutcome:
    """Run the peeling decoder on one graph and erasure pattern."""
    mask = np.zeros(graph.n, dtype=np.uint8)
    mask[np.asarray(erased, dtype=np.int64)] = 1
    v_stop = int(_kernels.peel_graph_once(
        graph.n, graph.var_ptr.astype(np.int64), graph.var_adj.astype(np.int64),
        graph.m, mask, np.uint64(seed)))
    return PeelOutcome(success=(v_stop == 0), v_stop=v_stop)


@dataclass(frozen=True)
class McRow:
    eps: float
    trials: int
    block_failures: int
    large_failures: int
    residual_bits: int
    p_block: float
    p_block_se: float
    p_block_gamma: float
    p_block_gamma_se: float
    p_bit: float
    p_bit_se: float


@dataclass(frozen=True)
class McCurve:
    spec: EnsembleSpec
    gamma: float
    channel_kind: str
    seed: int
    rows: tuple[McRow, ...]


def _kernel_inputs(spec: EnsembleSpec):
    """Degree data for the compiled samplers; regular left degree required."""
    if not spec.lam.is_regular():
        raise ValueError("the Monte Carlo kernels require a regular left degree")
    l = spec.lam.regular_degree()
    if spec.kind == "standard":
        counts = spec.check_node_counts()
        cdeg = np.concatenate([np.full(c, d, dtype=np.int64)
                               for d, c in sorted(counts.items())])
        m = len(cdeg)
        socket_owner = np.repeat(np.arange(m, dtype=np.int64), cdeg)
        if len(socket_owner) != spec.n * l:
            raise AssertionError("socket imbalance after rounding repair")
        return l, m, True, socket_owner
    m = spec.num_checks
    return l, m, False, np.empty(0, dtype=np.int64)


def _expurgation_mode(spec: EnsembleSpec) -> int | None:
    """In-kernel expurgation level.

    Returns the level for specs the kernels handle natively (s = 0, or
    cycle specs with s <= 2); None requests the slower rejection-sampling
    path in Python.  Above the exact search budget the rejection sampler
    itself warns and degrades to unexpurgated sampling.
    """
    if spec.s == 0:
        return 0
    if spec.kind == "poisson" and spec.lam.is_regular() and spec.lam.regular_degree() == 2 \
            and spec.s <= 2:
        return spec.s
    return None


def _nu_star_or_none(spec: EnsembleSpec):
    try:
        return critical_data(spec).nu_star
    except MarginallyStableError:
        return None


def mc_curve(spec: EnsembleSpec, eps_grid, trials: int, gamma: float = 0.1,
             seed: int = 0, channel: str = "rand",
             nu_star: float | None = None) -> McCurve:
    """Estimate block/bit erasure probabilities over a grid of channel values.

    A failure counts toward the gamma-classified block rate when its
    residual size is at least gamma * nu_star * n; for marginally stable
    specs every failure counts.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must be in (0, 1)")
    l, m, standard, socket_owner = _kernel_inputs(spec)
    expurg = _expurgation_mode(spec)
    if nu_star is None:
        nu_star = _nu_star_or_none(spec)
    if nu_star is None:
        vthresh = 1  # marginally stable: every failure is a failure
    else:
        vthresh = max(int(np.ceil(gamma * nu_star * spec.n)), 1)
    rows = []
    chan_rand = channel == "rand"
    for ie, eps in enumerate(np.atleast_1d(np.asarray(eps_grid, dtype=float))):
        e_exact = int(round(eps * spec.n))
        eps_eff = float(eps) if chan_rand else e_exact / spec.n
        if expurg is None:
            tot, nb, ng, bits, bits2 = _mc_point_rejection(
                spec, chan_rand, eps_eff, e_exact, vthresh, trials,
                seed + 0x51ED2701 * ie)
        else:
            acc = _kernels.mc_block_kernel(
                spec.n, l, m, standard, socket_owner, expurg,
                chan_rand, float(eps), e_exact, vthresh,
                trials, np.uint64(seed + 0x51ED2701 * ie), N_CHUNKS)
            tot = int(acc[:, 0].sum())
            nb = int(acc[:, 1].sum())
            ng = int(acc[:, 2].sum())
            bits = int(acc[:, 3].sum())
            bits2 = int(acc[:, 4].sum())
        pb = nb / tot
        pg = ng / tot
        pbit = bits / (tot * spec.n)
        var_bits = max(bits2 / tot - (bits / tot) ** 2, 0.0)
        rows.append(McRow(
            eps=eps_eff, trials=tot, block_failures=nb, large_failures=ng,
            residual_bits=bits,
            p_block=pb, p_block_se=float(np.sqrt(pb * (1 - pb) / tot)),
            p_block_gamma=pg, p_block_gamma_se=float(np.sqrt(pg * (1 - pg) / tot)),
            p_bit=pbit, p_bit_se=float(np.sqrt(var_bits / tot) / spec.n)))
    return McCurve(spec=spec, gamma=gamma, channel_kind=channel, seed=seed,
                   rows=tuple(rows))


def _mc_point_rejection(spec, chan_rand, eps, e_exact, vthresh, trials, seed):
    """Slow path: per-trial expurgated graph sampling in Python."""
    rng = np.random.default_rng(seed)
    nb = ng = bits = bits2 = 0
    chan = Channel.rand(eps) if chan_rand else Channel.exact(e_exact)
    for tr in range(trials):
        g = sample_graph_expurgated(spec, rng)
        erased = erase(spec.n, chan, rng)
        out = peel(g, erased, seed=seed + 77003 * tr + 1)
        if not out.success:
            nb += 1
            if out.v_stop >= vthresh:
                ng += 1
            bits += out.v_stop
            bits2 += out.v_stop ** 2
    return trials, nb, ng, bits, bits2


@dataclass(frozen=True)
class TrajectoryCheckpoint:
    v: int
    survivors: int
    mean_s: float
    mean_t: float
    cov_ss: float
    cov_st: float
    cov_tt: float
    se_mean_s: float
    se_mean_t: float
    unreliable: bool


def trajectory_stats(spec: EnsembleSpec, eps: float, trials: int, checkpoints,
                     seed: int = 0, channel: str = "exact") -> list[TrajectoryCheckpoint]:
    """Empirical (s, t) moments at residual sizes v, conditioned on survival.

    Checkpoints are residual variable counts in descending order.  Trials
    whose decoder died above a checkpoint contribute nothing there; fewer
    than 100 survivors flags the estimate unreliable.
    """
    cps = np.asarray(checkpoints, dtype=np.int64)
    if np.any(np.diff(cps) >= 0):
        raise ValueError("checkpoints must be strictly descending")
    l, m, standard, socket_owner = _kernel_inputs(spec)
    expurg = _expurgation_mode(spec)
    if expurg is None:
        warnings.warn("trajectory statistics ignore expurgation outside the "
                      "in-kernel budget", RuntimeWarning)
        expurg = 0
    chan_rand = channel == "rand"
    e_exact = int(round(eps * spec.n))
    acc = _kernels.mc_trajectory_kernel(
        spec.n, l, m, standard, socket_owner, expurg,
        chan_rand, float(eps), e_exact, cps,
        trials, np.uint64(seed), N_CHUNKS)
    out = []
    for i, v in enumerate(cps):
        cnt = int(acc[:, i, 0].sum())
        if cnt == 0:
            out.append(TrajectoryCheckpoint(v=int(v), survivors=0, mean_s=np.nan,
                                            mean_t=np.nan, cov_ss=np.nan, cov_st=np.nan,
                                            cov_tt=np.nan, se_mean_s=np.nan,
                                            se_mean_t=np.nan, unreliable=True))
            continue
        ssum = int(acc[:, i, 1].sum())
        tsum = int(acc[:, i, 2].sum())
        ss = int(acc[:, i, 3].sum())
        st = int(acc[:, i, 4].sum())
        tt = int(acc[:, i, 5].sum())
        ms = ssum / cnt
        mt = tsum / cnt
        denom = max(cnt - 1, 1)
        css = (ss - cnt * ms * ms) / denom
        cst = (st - cnt * ms * mt) / denom
        ctt = (tt - cnt * mt * mt) / denom
        out.append(TrajectoryCheckpoint(
            v=int(v), survivors=cnt, mean_s=ms, mean_t=mt,
            cov_ss=css, cov_st=cst, cov_tt=ctt,
            se_mean_s=float(np.sqrt(max(css, 0.0) / cnt)),
            se_mean_t=float(np.sqrt(max(ctt, 0.0) / cnt)),
            unreliable=cnt < 100))
    return out
