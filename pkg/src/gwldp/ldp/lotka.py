"""The Lotka-Nagaev estimator Z_{n+1}/Z_n of the offspring mean.

With X = xi - m and xi distributed as Z_1, S_{Z_n}/Z_n has the law of
Z_{n+1}/Z_n - m.  Every sweep runs both constructions (the ratio of one
process and the random sum with centred offspring summands) on independent
streams and reports their agreement.

Modes
-----
UpperDeviation     P(Z_{n+1}/Z_n - m >= eps), a_n = m**((beta-1)n) / L, value I_beta eps**-beta
AbsoluteDeviation  P(|Z_{n+1}/Z_n - m| > eps), a_n = m**(gamma n), value sum_k q_k phi(k, eps)
CLT                P(m**n/b(m**n) (Z_{n+1}/Z_n - m) <= x), a_n = 1,
                   value int P(U <= u**((beta-1)/beta) x) omega(u) du

``phi(k, eps) = P(|(xi_1 + ... + xi_k)/k - m| > eps)`` is computed exactly by
convolution.  UpperDeviation and CLT need ``zeta_shift`` offspring with
1 < beta_z < 2; the tail is exact only below the truncation point, and rows
whose deviation scale reaches a tenth of it are flagged ``truncation``.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from ..errors import DomainError, HypothesisError
from ..gw.martingale import MartingaleLimitModel
from ..gw.offspring import CenteredOffspring, OffspringLaw
from ..gw.series import q_vector
from ..stable import StableLaw, tail_constant
from .estimate import DEFAULT_BUDGET, MIN_REPLICATES
from .regime import Check, Prediction
from .sweep import SweepTable, estimate_row, log_trend, make_row

MODES = ("UpperDeviation", "AbsoluteDeviation", "CLT")
SIDE = {"UpperDeviation": "upper", "AbsoluteDeviation": "abs", "CLT": "lower"}
CROSS_Z = 4.0
SUM_SEED_OFFSET = 0x51D


def zeta_tail_constant(off: OffspringLaw) -> float:
    """L with P(xi > x) ~ L x**-beta_z for zeta_shift offspring (below truncation)."""
    beta_z, K = off.params
    k = np.arange(1, K + 1, dtype=np.float64)
    return 1.0 / (beta_z * math.fsum(k ** -(beta_z + 1)))


def offspring_tail_index(off: OffspringLaw) -> float:
    return off.params[0] if off.kind == "zeta_shift" else math.inf


def limit_stable(off: OffspringLaw) -> StableLaw:
    """Limit of (S_k)/k**(1/beta) for X = xi - m, zeta_shift offspring (skew 1)."""
    beta = offspring_tail_index(off)
    if not 1 < beta < 2:
        raise DomainError("the stable limit needs zeta_shift offspring with 1 < beta_z < 2")
    c = zeta_tail_constant(off)
    return StableLaw(beta, 1.0, (c / tail_constant(beta)) ** (1 / beta))


def check_hypotheses(off: OffspringLaw, mode: str) -> list[Check]:
    """Hypothesis checks for ``mode``; raises HypothesisError at the first failure."""
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}")
    beta, g = offspring_tail_index(off), off.gamma
    checks = [Check("offspring", True, f"{off.label}: m={off.m:.6g}, gamma={g:.6g}")]

    def need(name, ok, evidence):
        checks.append(Check(name, bool(ok), evidence))
        if not ok:
            raise HypothesisError(f"{mode}: {name} fails ({evidence})")

    if mode in ("UpperDeviation", "CLT"):
        need("heavy_tail", 1 < beta < 2, f"tail index beta={beta:g} must lie in (1, 2)")
        if mode == "UpperDeviation":
            need("gamma_gt_beta_minus_1", g > beta - 1, f"gamma={g:.6g}, beta-1={beta - 1:g}")
    else:
        need("gamma_lt_beta_minus_1", g < beta - 1, f"gamma={g:.6g}, beta-1={beta - 1:g}")
        need("moment_1_plus_gamma", off.finite, "finite support gives E[xi**(1+gamma)] < oo")
    return checks


def phi_exact(off: OffspringLaw, K: int, eps: float) -> np.ndarray:
    """phi(k, eps) for k = 0..K (entry 0 is 0), by repeated convolution of the pmf."""
    if not off.finite:
        raise DomainError("exact phi needs finite-support offspring")
    lo, hi = int(off.values[0]), int(off.values[-1])
    base = np.zeros(hi - lo + 1)
    base[off.values - lo] = off.probs
    out = np.zeros(K + 1)
    dist = np.ones(1)  # law of sum - k*lo
    m = off.m
    for k in range(1, K + 1):
        dist = np.convolve(dist, base)
        s = k * lo + np.arange(dist.size)
        far = np.abs(s - k * m) > eps * k * (1 + 1e-12)
        out[k] = math.fsum(dist[far])
    return out


def co_prediction(off: OffspringLaw, eps: float, rel: float = 1e-3,
                  k_cap: int = 8192) -> Prediction:
    """sum_k q_k phi(k, eps) with K doubling until the last term is below rel * sum."""
    K = 16
    while True:
        q, qerr = q_vector(off, K)
        phi = phi_exact(off, K, eps)
        terms = q * phi
        total = math.fsum(terms)
        last = terms[K // 2:].max()
        if last < rel * total or K >= k_cap:
            break
        K *= 2
    return Prediction("value", total, total,
                      {"K": K, "stderr": 0.0, "last_term": float(terms[-1]),
                       "q_error": float(np.abs(qerr * phi).sum())})


def clt_prediction(off: OffspringLaw, x: float, model: MartingaleLimitModel | None = None,
                   stable: StableLaw | None = None) -> Prediction:
    """E_W[P(U <= W**((beta-1)/beta) x)]."""
    model = model or MartingaleLimitModel(off)
    U = stable or limit_stable(off)
    w = model.samples
    vals = 1.0 - np.asarray(U.tail_cdf(x * w ** ((U.alpha - 1) / U.alpha)), dtype=np.float64)
    v = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
    return Prediction("value", v, v, {"x": x, "stderr": se, "stable": U.to_dict()})


def upper_prediction(off: OffspringLaw, eps: float,
                     model: MartingaleLimitModel | None = None) -> Prediction:
    """I_beta eps**-beta."""
    model = model or MartingaleLimitModel(off)
    beta = offspring_tail_index(off)
    ib = model.moment_W(1.0 - beta)
    v = ib.value * eps ** -beta
    return Prediction("value", v, v, {"I_beta": ib.value, "stderr": ib.stderr * eps ** -beta})


def identity_ks(off: OffspringLaw, n: int, reps: int, seed: int, workers: int = 1,
                backend=None) -> float:
    """KS distance between draws of Z_{n+1}/Z_n - m and of S_{Z_n}/Z_n with X = xi - m."""
    law = CenteredOffspring(off)
    _, (z1, s1) = estimate_row(off, law, n, 0.0, reps, seed, workers, backend, ratio=True)
    _, (z0, s0) = estimate_row(off, law, n, 0.0, reps, seed + SUM_SEED_OFFSET, workers,
                               backend)
    a = s1[z1 > 0] / z1[z1 > 0]
    b = s0[z0 > 0] / z0[z0 > 0]
    return float(stats.ks_2samp(a, b).statistic)


def lotka_nagaev(off: OffspringLaw, mode: str, n_range, replicates: int,
                 eps: float | None = None, x: float | None = None, seed: int = 0,
                 workers: int = 1, backend=None, budget: int = DEFAULT_BUDGET,
                 model: MartingaleLimitModel | None = None,
                 config: dict | None = None) -> SweepTable:
    """Sweep of the Lotka-Nagaev deviation probability with both estimators."""
    checks = check_hypotheses(off, mode)
    if replicates < MIN_REPLICATES:
        raise DomainError(f"a sweep needs at least {MIN_REPLICATES} replicates")
    if mode == "CLT":
        if x is None:
            raise DomainError("CLT mode needs x")
    elif eps is None or not eps > 0:
        raise DomainError(f"{mode} needs eps > 0")
    m, g = off.m, off.gamma
    beta = offspring_tail_index(off)
    law = CenteredOffspring(off)
    if mode == "UpperDeviation":
        pred = upper_prediction(off, eps, model)
        L = zeta_tail_constant(off)
    elif mode == "AbsoluteDeviation":
        pred = co_prediction(off, eps)
    else:
        pred = clt_prediction(off, x, model)
    side = SIDE[mode]
    k_trunc = off.params[1] if off.kind == "zeta_shift" else math.inf
    rows, cross = [], []
    for n in sorted(int(n) for n in n_range):
        if n < 1:
            raise DomainError("sweep generations must be >= 1")
        if mode == "CLT":
            scale = m ** (n / beta)
            thr = x * scale / m ** n
            a_n = 1.0
        else:
            scale = eps * m ** n
            thr = eps
            a_n = m ** ((beta - 1) * n) / L if mode == "UpperDeviation" else m ** (g * n)
        flags = ["truncation"] if scale >= k_trunc / 10 else []
        e1, _ = estimate_row(off, law, n, thr, replicates, seed, workers, backend, budget,
                             side, ratio=True)
        e0, _ = estimate_row(off, law, n, thr, replicates, seed + SUM_SEED_OFFSET, workers,
                             backend, budget, side)
        se = math.hypot(e1.stderr, e0.stderr)
        zc = (e1.p_hat - e0.p_hat) / se if se > 0 else 0.0
        if abs(zc) > CROSS_Z:
            flags.append("cross_check")
        cross.append({"n": n, "p_ratio": e1.p_hat, "p_sum": e0.p_hat, "z": zc})
        rows.append(make_row(n, a_n, e1, pred, flags))
    trend = log_trend([r.n for r in rows], [r.normalized for r in rows],
                      [r.a_n * r.stderr for r in rows])
    pdict = {"theorem_id": {"UpperDeviation": "A941", "AbsoluteDeviation": "SCmain3Co",
                            "CLT": "corox"}[mode],
             "mode": mode, "predicted": pred.to_dict(),
             "assumptions": [{"name": c.name, "passed": c.passed, "evidence": c.evidence}
                             for c in checks]}
    return SweepTable(rows, trend, pdict, seed, dict(config or {}), {"cross_check": cross})
