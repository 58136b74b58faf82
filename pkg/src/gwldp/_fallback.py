"""Pure-numpy implementation of the Monte Carlo kernels.

Same signatures and the same stream arithmetic as the compiled module
``gwldp._core``.  Replicates are processed one at a time with the draws of
a replicate vectorised, so running sums are accumulated in the same order
as in the compiled loops (``np.cumsum`` is sequential).
"""

from __future__ import annotations

import math

import numpy as np

from .rng import raw_draws, stream_key, to_unit

KAHAN_THRESHOLD = 1e6
E_CONST = math.e


def uniforms(key: int, start: int, count: int) -> np.ndarray:
    return to_unit(raw_draws(key, start, count))


def _sv(kind: int, delta: float, x):
    if kind == 0:
        return np.ones_like(x)
    if kind == 1:
        return np.log(E_CONST + x) ** delta
    return np.log(E_CONST + np.log(E_CONST + x)) ** delta


def _tail(mass, idx, lk, delta, l0, x0, z):
    return mass * (z / x0) ** (-idx) * _sv(lk, delta, z) / l0


def _tail_inverse(mass, idx, lk, delta, l0, x0, u):
    u = np.asarray(u, dtype=np.float64)
    if lk == 0:
        return np.where(u >= mass, x0, x0 * (mass / u) ** (1.0 / idx))
    guess = math.log(x0) + np.log(mass / u) / idx
    lo = np.full_like(u, math.log(x0))
    hi = guess.copy()
    ok = _tail(mass, idx, lk, delta, l0, x0, np.exp(hi)) >= u
    lo = np.where(ok, hi, lo)
    hi = np.where(ok, hi + 1.0, hi)
    while True:
        still = _tail(mass, idx, lk, delta, l0, x0, np.exp(hi)) >= u
        if not still.any():
            break
        lo = np.where(still, hi, lo)
        hi = np.where(still, hi + 2.0, hi)
    for _ in range(200):
        live = hi - lo > 1e-12
        if not live.any():
            break
        mid = 0.5 * (lo + hi)
        up = _tail(mass, idx, lk, delta, l0, x0, np.exp(mid)) >= u
        lo = np.where(live & up, mid, lo)
        hi = np.where(live & ~up, mid, hi)
    return np.where(u >= mass, x0, np.exp(0.5 * (lo + hi)))


def table_draw(table, u):
    kind, log_a, prob, alias, values = table
    u = np.asarray(u, dtype=np.float64)
    if kind == 1:
        return 1 + np.floor(np.log(u) / log_a).astype(np.int64)
    size = prob.shape[0]
    x = u * size
    i = np.minimum(x.astype(np.int64), size - 1)
    keep = (x - i) < prob[i]
    return np.where(keep, values[i], values[alias[i]])


def law_draw(v, table, u):
    kind = int(v[0])
    u = np.asarray(u, dtype=np.float64)
    if kind == 1:
        return np.where(u < 0.5, -1.0, 1.0)
    if kind == 2:
        return table_draw(table, u).astype(np.float64) - v[5]
    x0, cm, w, cp, shift = v[1], v[2], v[3], v[4], v[5]
    y = np.empty_like(u)
    left = u < cm
    body = (~left) & (u < cm + w)
    right = ~(left | body)
    if left.any():
        y[left] = -_tail_inverse(cm, v[10], int(v[11]), v[12], v[13], x0, u[left])
    if body.any():
        y[body] = -x0 + 2.0 * x0 * (u[body] - cm) / w
    if right.any():
        y[right] = _tail_inverse(cp, v[6], int(v[7]), v[8], v[9], x0, 1.0 - u[right])
    return y + shift


def sample_law(law_vec, sum_table, key, start, count):
    return law_draw(law_vec, sum_table, uniforms(key, start, count))


def _seq_sum(x: np.ndarray) -> float:
    if x.size == 0:
        return 0.0
    if x.size > KAHAN_THRESHOLD:
        return math.fsum(x)
    return float(np.cumsum(x)[-1])


def walk_checkpoints(law_vec, sum_table, seed, stream0, reps, checkpoints):
    checkpoints = np.asarray(checkpoints, dtype=np.int64)
    kmax = int(checkpoints[-1])
    out = np.empty((reps, checkpoints.size))
    for r in range(reps):
        key = stream_key(seed, stream0 + r)
        x = law_draw(law_vec, sum_table, uniforms(key, 0, kmax))
        if kmax > KAHAN_THRESHOLD:
            out[r] = [math.fsum(x[:k]) for k in checkpoints]
        else:
            out[r] = np.cumsum(x)[checkpoints - 1]
    return out


def _grow(table, key, pos, z, draws, budget):
    if draws + z > budget:
        return -1, pos, draws
    total = int(table_draw(table, uniforms(key, pos, z)).sum())
    return total, pos + z, draws + z


def simulate_generations(off_table, seed, stream0, reps, n, budget):
    out = np.empty(reps, dtype=np.int64)
    for r in range(reps):
        key = stream_key(seed, stream0 + r)
        z, pos, draws = 1, 0, 0
        for _ in range(n):
            z, pos, draws = _grow(off_table, key, pos, z, draws, budget)
            if z < 0:
                break
        out[r] = z
    return out


def ldp_replicates(off_table, law_vec, sum_table, seed, stream0, reps, n,
                   budget, mode, mean):
    zout = np.empty(reps, dtype=np.int64)
    sout = np.empty(reps, dtype=np.float64)
    for r in range(reps):
        key = stream_key(seed, stream0 + r)
        z, pos, draws = 1, 0, 0
        for _ in range(n):
            z, pos, draws = _grow(off_table, key, pos, z, draws, budget)
            if z < 0:
                break
        if z < 0:
            zout[r], sout[r] = -1, 0.0
            continue
        if mode == 1:
            z1, pos, draws = _grow(off_table, key, pos, z, draws, budget)
            if z1 < 0:
                zout[r], sout[r] = -1, 0.0
                continue
            zout[r], sout[r] = z, float(z1) - mean * float(z)
            continue
        x = law_draw(law_vec, sum_table, uniforms(key, pos, z))
        zout[r], sout[r] = z, _seq_sum(x)
    return zout, sout
