"""Local bounds and harmonic moments of Z_n from the exact pmf.

* ``local_bound_constant``: the smallest C with
  ``P(Z_n = k) <= C min(1/k, k**(gamma-1) m**(-gamma n))`` on a finite range.
* ``harmonic_moment``: ``E[Z_n**t L(eps Z_n)]`` and its ratio to the
  asymptotic ``m**(n t) L(eps m**n) E[W**t]`` (t > -gamma) or, at
  ``t = -gamma``, to ``sum_{k <= m**n} L(eps k) / (k m**(gamma n))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError, TruncationError
from ..laws import CONSTANT, SlowlyVarying
from ..norming import harmonic_sum
from .martingale import MartingaleLimitModel
from .offspring import OffspringLaw
from .series import MAX_K, geom_pmf_closed, pmf_iterates

TAIL_SHARE = 0.01
GEOM_TAIL_LOG = 45.0  # closed-form geometric pmf summed until a_n**k < e**-45


@dataclass(frozen=True)
class LocalBound:
    """Empirical local-bound constant: overall and per generation."""

    C: float
    per_n: dict[int, float]
    argmax: tuple[int, int]
    K: int


def local_envelope(off: OffspringLaw, n: int, k: np.ndarray) -> np.ndarray:
    """min(1/k, k**(gamma-1) m**(-gamma n))."""
    g, m = off.gamma, off.m
    k = np.asarray(k, dtype=np.float64)
    return np.minimum(1.0 / k, np.exp((g - 1) * np.log(k) - g * n * math.log(m)))


def local_bound_constant(off: OffspringLaw, n_range, K: int,
                         closed_form: bool = False) -> LocalBound:
    """max over (n, k) of P(Z_n = k) / envelope, from the series (or closed form)."""
    ns = sorted(int(n) for n in n_range)
    if not ns or ns[0] < 0:
        raise DomainError("n_range must hold nonnegative generations")
    if closed_form and off.kind != "geom_shift":
        raise DomainError("the closed-form pmf exists only for geom_shift offspring")
    k = np.arange(1, K + 1, dtype=np.float64)
    per_n, best, where = {}, -1.0, (0, 0)
    wanted = set(ns)

    def visit(n, probs):
        nonlocal best, where
        r = probs[1:] / local_envelope(off, n, k)
        i = int(np.argmax(r))
        per_n[n] = float(r[i])
        if r[i] > best:
            best, where = float(r[i]), (n, i + 1)

    if closed_form:
        for n in ns:
            visit(n, geom_pmf_closed(off.params[0], n, K))
    else:
        for pm in pmf_iterates(off, ns[-1], K):
            if pm.n in wanted:
                visit(pm.n, pm.probs)
    return LocalBound(best, per_n, where, K)


@dataclass(frozen=True)
class HarmonicResult:
    """E[Z_n**t L(eps Z_n)] with its normalized ratio."""

    t: float
    n: int
    eps: float
    value: float
    reference: float
    ratio: float
    reference_kind: str
    tail_mass: float
    K: int
    extra: dict = field(default_factory=dict)


def _pmf_for_moment(off: OffspringLaw, n: int, K: int | None):
    if off.kind == "geom_shift":
        a = off.params[0]
        an = -math.expm1(n * math.log1p(-a)) if n else 0.0
        if K is None:
            K = 2 if an == 0 else int(math.ceil(GEOM_TAIL_LOG / -math.log(an))) + 1
        return geom_pmf_closed(a, n, K), (an ** K if n else 0.0)
    if K is None:
        K = int(min(MAX_K, max(1000, math.ceil(60 * off.m ** n))))
    pm = None
    for pm in pmf_iterates(off, n, K):
        pass
    return pm.probs, pm.tail_mass


def harmonic_expectation(off: OffspringLaw, t: float, eps: float, n: int,
                         L: SlowlyVarying = CONSTANT, K: int | None = None):
    """(E[Z_n**t L(eps Z_n)] over k <= K, tail mass beyond K, K)."""
    probs, tail = _pmf_for_moment(off, n, K)
    K = probs.size - 1
    k = np.arange(1, K + 1, dtype=np.float64)
    terms = probs[1:] * k ** t * np.asarray(L(eps * k), dtype=np.float64)
    head = math.fsum(terms)
    tail_bound = tail * K ** t * max(1.0, float(L(eps * K)))
    if tail_bound > TAIL_SHARE * head:
        raise TruncationError(f"tail mass {tail:.3g} beyond K={K} is not negligible for "
                              f"the moment of order {t:g}")
    return head, tail, K


def harmonic_moment(off: OffspringLaw, t: float, eps: float, n: int,
                    L: SlowlyVarying = CONSTANT, K: int | None = None,
                    model: MartingaleLimitModel | None = None) -> HarmonicResult:
    """E[Z_n**t L(eps Z_n)] and its ratio to the limit prediction.

    For ``-gamma < t <= 1`` the reference is ``m**(n t) L(eps m**n) E[W**t]``;
    at ``t = -gamma`` it is the harmonic sum
    ``sum_{k <= m**n} L(eps k) / (k m**(gamma n))``.
    """
    g, m = off.gamma, off.m
    at_gamma = math.isclose(t, -g, rel_tol=1e-12, abs_tol=1e-12)
    if not at_gamma and not -g < t <= 1:
        raise DomainError(f"need -gamma <= t <= 1 (gamma={g:.4g}, t={t:g})")
    value, tail, K = harmonic_expectation(off, t, eps, n, L, K)
    if at_gamma:
        ref = harmonic_sum(L, eps, m ** n) / m ** (g * n)
        kind = "harmonic_sum"
    else:
        model = model or MartingaleLimitModel(off)
        mw = model.moment_W(t).value
        ref = m ** (n * t) * float(L(eps * m ** n)) * mw
        kind = "limit_moment"
    return HarmonicResult(t, n, eps, value, ref, value / ref, kind, tail, K)


def geom_harmonic_closed(a: float, n: int) -> float:
    """E[1/Z_n] for geom_shift(a): -(1 - a_n) ln(1 - a_n) / a_n."""
    an = -math.expm1(n * math.log1p(-a))
    q = 1.0 - an
    return -q * math.log(q) / an
