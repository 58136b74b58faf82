"""Exact Galton-Watson distributions by truncated power-series composition.

``f_{n+1} = f o f_n`` is evaluated on coefficient vectors truncated at
degree K.  Every coefficient involved is nonnegative, so truncation is the
only source of error besides rounding; products use direct convolution for
short series and FFT (with rounding negatives clamped to 0) beyond.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft

from ..errors import DomainError, NonConvergence, TruncationError
from .offspring import OffspringLaw

MAX_K = 10 ** 5
DIRECT_LIMIT = 2048


def series_mul(a: np.ndarray, b: np.ndarray, K: int) -> np.ndarray:
    """Coefficients 0..K of the product of two truncated series."""
    if min(a.size, b.size) <= DIRECT_LIMIT or K <= DIRECT_LIMIT:
        out = np.convolve(a[:K + 1], b[:K + 1])[:K + 1]
    else:
        n = fft.next_fast_len(a.size + b.size - 1, real=True)
        out = fft.irfft(fft.rfft(a, n) * fft.rfft(b, n), n)[:K + 1]
        np.maximum(out, 0.0, out=out)
    if out.size < K + 1:
        out = np.concatenate([out, np.zeros(K + 1 - out.size)])
    return out


def series_reciprocal(c: np.ndarray, K: int) -> np.ndarray:
    """1/c truncated at degree K (c[0] != 0), by Newton iteration."""
    r = np.array([1.0 / c[0]])
    size = 1
    while size < K + 1:
        size = min(2 * size, K + 1)
        cr = series_mul(c[:size], r, size - 1)
        corr = -cr
        corr[0] += 2.0
        r = _mul_signed(r, corr, size - 1)
    return r[:K + 1]


def _mul_signed(a, b, K):
    # product of series with mixed signs (no clamping)
    if min(a.size, b.size) <= DIRECT_LIMIT:
        out = np.convolve(a, b)[:K + 1]
    else:
        n = fft.next_fast_len(a.size + b.size - 1, real=True)
        out = fft.irfft(fft.rfft(a, n) * fft.rfft(b, n), n)[:K + 1]
    if out.size < K + 1:
        out = np.concatenate([out, np.zeros(K + 1 - out.size)])
    return out


def compose(off: OffspringLaw, g: np.ndarray, K: int) -> np.ndarray:
    """Coefficients 0..K of f(g(s)) for a series g with g(0) = 0."""
    if off.kind == "geom_shift":
        a = off.params[0]
        denom = -a * g[:K + 1]
        denom[0] += 1.0
        out = (1 - a) * series_mul(g, series_reciprocal(denom, K), K)
        return out
    vals, probs = off.values, off.probs
    lut = dict(zip(vals.tolist(), probs.tolist()))
    D = int(min(vals[-1], K))
    acc = np.zeros(K + 1)
    acc[0] = lut.get(D, 0.0)
    for d in range(D - 1, 0, -1):
        acc = series_mul(acc, g, K)
        acc[0] += lut.get(d, 0.0)
    # degrees of f above K only reach coefficients above K since g(0) = 0
    return series_mul(acc, g, K)


@dataclass
class Pmf:
    """P(Z_n = k) for k = 0..K (index = k) plus the mass beyond K."""

    n: int
    probs: np.ndarray
    tail_mass: float

    @property
    def K(self) -> int:
        return self.probs.size - 1

    def require(self, bound: float) -> "Pmf":
        if self.tail_mass > bound:
            raise TruncationError(f"tail mass {self.tail_mass:.3g} beyond K={self.K} "
                                  f"exceeds {bound:.3g}")
        return self


def _pmf(n: int, probs: np.ndarray) -> Pmf:
    return Pmf(n, probs, max(0.0, 1.0 - math.fsum(probs)))


def pmf_iterates(off: OffspringLaw, n_max: int, K: int):
    """Yield the Pmf of Z_0, Z_1, ..., Z_{n_max}."""
    if n_max < 0 or K < 1:
        raise DomainError("need n >= 0 and K >= 1")
    if K > MAX_K:
        raise DomainError(f"K is limited to {MAX_K}")
    g = np.zeros(K + 1)
    g[1] = 1.0
    yield _pmf(0, g.copy())
    f1 = off.coefficients(K)
    for n in range(1, n_max + 1):
        g = f1.copy() if n == 1 else compose(off, g, K)
        yield _pmf(n, g)


def pmf_Zn(off: OffspringLaw, n: int, K: int) -> Pmf:
    """Exact P(Z_n = k), k <= K, and the truncated tail mass."""
    out = None
    for out in pmf_iterates(off, n, K):
        pass
    return out


def geom_pmf_closed(a: float, n: int, K: int) -> np.ndarray:
    """Fractional-linear closed form for geom_shift offspring."""
    an = -math.expm1(n * math.log1p(-a)) if n else 0.0
    p = np.zeros(K + 1)
    if n == 0:
        p[1] = 1.0
        return p
    k = np.arange(1, K + 1, dtype=np.float64)
    p[1:] = (1 - an) * an ** (k - 1)
    return p


@dataclass(frozen=True)
class Extrapolated:
    value: float
    error: float
    n_used: int


NOISE = 1e-13  # relative rounding floor of the scaled iterates


def _aitken(seq: list[float], label: str) -> Extrapolated:
    """Aitken extrapolation from the last three terms of a geometric-rate sequence."""
    x0, x1, x2 = seq[-3:]
    d1, d2 = x1 - x0, x2 - x1
    scale = max(abs(x2), 1e-300)
    if abs(d2) <= NOISE * scale:
        return Extrapolated(x2, abs(d2), len(seq) - 1)
    if abs(d2) >= abs(d1):
        raise NonConvergence(f"{label}: increments not decreasing "
                             f"({abs(d1):.3g} -> {abs(d2):.3g})")
    denom = d2 - d1
    val = x2 - d2 * d2 / denom if denom != 0 else x2
    return Extrapolated(val, abs(d2), len(seq) - 1)


def _q_sequence(off: OffspringLaw, K: int, n_max: int):
    p1 = off.p1
    n_cap = min(n_max, int(-600 / math.log(p1)))
    rows = []
    scale = 1.0  # p1**n by the same rounding sequence as the series coefficient of s
    for pm in pmf_iterates(off, n_cap, K):
        if pm.n == 0:
            continue
        scale *= p1
        rows.append(pm.probs / scale)
        if len(rows) >= 3:
            d1 = np.abs(rows[-1] - rows[-2])
            if np.all(d1 <= 0.01 * NOISE * np.maximum(np.abs(rows[-1]), 1e-300)):
                break
    return rows


def q_k(off: OffspringLaw, k: int, n_max: int = 80) -> Extrapolated:
    """q_k = lim m**(gamma n) P(Z_n = k)."""
    if k < 1:
        raise DomainError("q_k needs k >= 1")
    rows = _q_sequence(off, k, n_max)
    if len(rows) < 3:
        raise NonConvergence("q_k needs at least three iterates")
    return _aitken([r[k] for r in rows], f"q_{k}")


def q_vector(off: OffspringLaw, K: int, n_max: int = 80):
    """(q_1..q_K as an array indexed by k, per-k error estimates)."""
    rows = _q_sequence(off, K, n_max)
    vals = np.zeros(K + 1)
    errs = np.zeros(K + 1)
    for k in range(1, K + 1):
        e = _aitken([r[k] for r in rows], f"q_{k}")
        vals[k], errs[k] = e.value, e.error
    return vals, errs


def Q_of(off: OffspringLaw, s: float, n_max: int = 400) -> Extrapolated:
    """Q(s) = lim f_n(s) / p1**n, iterated scalar-wise."""
    if not 0 <= s < 1:
        raise DomainError("Q needs 0 <= s < 1")
    if s == 0:
        return Extrapolated(0.0, 0.0, 0)
    p1 = off.p1
    x, scale = s, 1.0
    seq = []
    for n in range(1, n_max + 1):
        x = float(off.f(x))
        scale *= p1
        if x == 0.0 or scale == 0.0:
            break
        seq.append(x / scale)
        if len(seq) >= 3 and abs(seq[-1] - seq[-2]) <= 0.01 * NOISE * abs(seq[-1]):
            break
    if len(seq) < 3:
        raise NonConvergence("Q(s) iteration underflowed before converging")
    return _aitken(seq, f"Q({s:g})")
