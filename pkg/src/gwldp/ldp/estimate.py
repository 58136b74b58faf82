"""Monte Carlo and semi-exact estimators of P(S_{Z_n}/Z_n >= eps).

Replicate r of a run with master seed ``seed`` uses stream ``(seed, r)``:
it grows Z_0 = 1, ..., Z_n from the offspring table and then draws the
Z_n summands from the same stream, so results do not depend on the number
of workers.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..engine import CHUNK, concat, run_chunked
from ..errors import DomainError
from ..gw.offspring import OffspringLaw
from ..gw.series import MAX_K, pmf_Zn

DEFAULT_BUDGET = 10 ** 8
MIN_REPLICATES = 10 ** 4
UNRELIABLE_COUNT = 20
MAX_DISCARD_RATE = 1e-6
SIDES = ("upper", "lower", "abs")  # S >= eps Z, S <= eps Z, |S| > eps Z


@dataclass(frozen=True)
class MCEstimate:
    """A probability estimate with its provenance."""

    p_hat: float
    replicates: int
    stderr: float
    discard_rate: float = 0.0
    master_seed: int = 0
    wall_time: float = 0.0
    method: str = "direct"
    flags: tuple = ()

    @property
    def unreliable(self) -> bool:
        return "unreliable" in self.flags

    @property
    def accepted(self) -> bool:
        return self.discard_rate < MAX_DISCARD_RATE

    def to_dict(self) -> dict:
        return {"p_hat": self.p_hat, "replicates": self.replicates, "stderr": self.stderr,
                "discard_rate": self.discard_rate, "master_seed": self.master_seed,
                "wall_time": self.wall_time, "method": self.method,
                "flags": list(self.flags)}


def binomial_estimate(hits: int, accepted: int, replicates: int, seed: int,
                      wall: float, method: str = "direct") -> MCEstimate:
    p = hits / accepted if accepted else math.nan
    se = math.sqrt(p * (1 - p) / accepted) if accepted else math.nan
    flags = []
    if hits < UNRELIABLE_COUNT:
        flags.append("unreliable")
    discard = (replicates - accepted) / replicates
    if discard >= MAX_DISCARD_RATE:
        flags.append("discards")
    return MCEstimate(p, replicates, se, discard, seed, wall, method, tuple(flags))


def simulate_pairs(off: OffspringLaw, law, n: int, replicates: int, seed: int,
                   stream0: int = 0, workers: int = 1, backend=None,
                   budget: int = DEFAULT_BUDGET, ratio: bool = False):
    """(Z_n, S) per replicate; Z = -1 marks a discarded replicate.

    ``ratio=False``: S = S_{Z_n}.  ``ratio=True``: S = Z_{n+1} - m Z_n
    (the summand law is then unused).
    """
    if n < 0:
        raise DomainError("n must be >= 0")
    kern = kernels.get(backend)
    off_table = off.kernel_table()
    vec, table = law.kernel_vector(), law.kernel_table()
    mode, mean = (1, off.m) if ratio else (0, 0.0)

    def job(lo, count):
        return kern.ldp_replicates(off_table, vec, table, seed, stream0 + lo, count, n,
                                   budget, mode, mean)

    size = max(64, min(CHUNK, int(2e7 // max(off.m ** n, 1.0))))
    return concat(run_chunked(job, replicates, workers, size))


def _hits(z: np.ndarray, s: np.ndarray, eps: float, side: str) -> int:
    ok = z > 0
    zz, ss = z[ok].astype(np.float64), s[ok]
    if side == "upper":
        return int(np.count_nonzero(ss >= eps * zz))
    if side == "lower":
        return int(np.count_nonzero(ss <= eps * zz))
    if side == "abs":
        return int(np.count_nonzero(np.abs(ss) > eps * zz))
    raise DomainError(f"side must be one of {SIDES}")


def estimate_from_pairs(z, s, eps_values, seed: int, wall: float = 0.0,
                        side: str = "upper") -> list[MCEstimate]:
    accepted = int(np.count_nonzero(z > 0))
    return [binomial_estimate(_hits(z, s, float(e), side), accepted, z.size, seed, wall)
            for e in np.atleast_1d(eps_values)]


def estimate_ldp(off: OffspringLaw, law, eps: float, n: int, replicates: int,
                 seed: int, workers: int = 1, backend=None,
                 budget: int = DEFAULT_BUDGET, side: str = "upper",
                 ratio: bool = False) -> MCEstimate:
    """Direct estimate of P(S_{Z_n}/Z_n >= eps)."""
    return estimate_ldp_grid(off, law, [eps], n, replicates, seed, workers, backend,
                             budget, side, ratio)[0]


def estimate_ldp_grid(off: OffspringLaw, law, eps_values, n: int, replicates: int,
                      seed: int, workers: int = 1, backend=None,
                      budget: int = DEFAULT_BUDGET, side: str = "upper",
                      ratio: bool = False) -> list[MCEstimate]:
    """Estimates for several eps from the same replicates (common random numbers)."""
    if n < 1:
        raise DomainError("estimate_ldp needs n >= 1")
    if replicates < MIN_REPLICATES:
        raise DomainError(f"estimate_ldp needs at least {MIN_REPLICATES} replicates")
    t0 = time.perf_counter()
    z, s = simulate_pairs(off, law, n, replicates, seed, 0, workers, backend, budget, ratio)
    return estimate_from_pairs(z, s, eps_values, seed, time.perf_counter() - t0, side)


# -- semi-exact mixture --------------------------------------------------------------

@dataclass(frozen=True)
class WeightedTail:
    """sum_k w_k P(S_k >= eps k) with its standard error."""

    value: float
    stderr: float
    replicates: int
    ks: np.ndarray = field(repr=False)
    terms: np.ndarray = field(repr=False)   # w_k * P_hat(S_k >= eps k)
    exact: bool = False


def _event(sums: np.ndarray, ks: np.ndarray, eps: float, side: str) -> np.ndarray:
    thr = eps * ks
    if side == "upper":
        return sums >= thr
    if side == "lower":
        return sums <= thr
    return np.abs(sums) > thr


def weighted_tail_sum(law, ks, weights, eps: float, reps: int, seed: int,
                      workers: int = 1, backend=None, side: str = "upper") -> WeightedTail:
    """Estimate sum_k w_k P(S_k >= eps k).

    Each replicate is one random walk read at every k, so the per-replicate
    value ``sum_k w_k 1{S_k >= eps k}`` is unbiased and its sample variance
    gives the standard error.  Lattice laws with an exact ``prob_sum_at_least``
    are summed exactly.
    """
    ks = np.asarray(ks, dtype=np.int64)
    w = np.asarray(weights, dtype=np.float64)
    if ks.size == 0:
        return WeightedTail(0.0, 0.0, 0, ks, w, True)
    if hasattr(law, "prob_sum_at_least") and side == "upper":
        probs = np.array([law.prob_sum_at_least(int(k), eps * k) for k in ks])
        terms = w * probs
        return WeightedTail(math.fsum(terms), 0.0, 0, ks, terms, True)
    kern = kernels.get(backend)
    vec, table = law.kernel_vector(), law.kernel_table()
    kf = ks.astype(np.float64)

    def job(lo, count):
        sums = kern.walk_checkpoints(vec, table, seed, lo, count, ks)
        hit = _event(sums, kf, eps, side)
        return hit @ w, hit.sum(axis=0)

    size = max(16, min(CHUNK, int(4e6 // ks.size), int(2e7 // int(ks[-1]))))
    parts = run_chunked(job, reps, workers, size)
    y = np.concatenate([p[0] for p in parts])
    counts = np.sum([p[1] for p in parts], axis=0)
    terms = w * counts / reps
    return WeightedTail(float(y.mean()), float(y.std(ddof=1) / math.sqrt(reps)), reps,
                        ks, terms)


def default_K(off: OffspringLaw, n: int, tail: float = 1e-9) -> int:
    """Truncation point holding all but ``tail`` of the mass of Z_n."""
    if off.kind == "geom_shift":
        a = off.params[0]
        an = -math.expm1(n * math.log1p(-a))
        return 1 if an == 0 else min(MAX_K, int(math.ceil(math.log(tail) / math.log(an))) + 1)
    return int(min(MAX_K, off.max_support ** n))


def semi_exact(off: OffspringLaw, law, eps: float, n: int, K: int | None = None,
               reps_per_k: int = 10 ** 5, seed: int = 0, workers: int = 1,
               backend=None, tail_bound: float = 1e-6, side: str = "upper") -> MCEstimate:
    """sum_{k <= K} P(Z_n = k) P_hat(S_k >= eps k).

    P(Z_n = k) comes from the exact pmf (truncation mass must stay below
    ``tail_bound``); the conditional probabilities come from
    :func:`weighted_tail_sum` with ``reps_per_k`` walks.
    """
    t0 = time.perf_counter()
    if n == 0 and side == "upper" and hasattr(law, "tail_right") \
            and not hasattr(law, "prob_sum_at_least"):
        p = float(law.tail_right(eps))
        return MCEstimate(p, 0, 0.0, 0.0, seed, time.perf_counter() - t0, "exact")
    K = K or default_K(off, n)
    pm = pmf_Zn(off, n, K).require(tail_bound)
    ks = np.nonzero(pm.probs > 0)[0]
    ks = ks[ks >= 1]
    res = weighted_tail_sum(law, ks, pm.probs[ks], eps, reps_per_k, seed, workers,
                            backend, side)
    method = "semi_exact/exact" if res.exact else "semi_exact"
    return MCEstimate(res.value, res.replicates, res.stderr, 0.0, seed,
                      time.perf_counter() - t0, method)
