"""Norming function b, its ratio J and asymptotic inverse l, threshold sequences.

``b(x) = x**(1/alpha) s(x)``, ``J(x) = x / b(x)`` and
``l(x) = inf{y >= 0 : J(y) > x}``.  For ``alpha > 1`` the function J is
eventually increasing, and ``l`` is computed by bisection on the exact J.

:class:`Growth` is a symbolic magnitude ``coef * m**(a n) * n**b * (log n)**c``
used to decide limits of sequences in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import BracketError, ConfigError, DomainError
from .laws import CONSTANT, SlowlyVarying

BRACKET = (1.0, 1e30)
EXACT_SUM_LIMIT = 10 ** 7
_EM_HEAD = 10 ** 5


@dataclass(frozen=True)
class Growth:
    """Asymptotic size ``coef * m**(a n) * n**b * (log n)**c`` as n grows."""

    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    coef: float = 1.0

    def __mul__(self, other: "Growth") -> "Growth":
        return Growth(self.a + other.a, self.b + other.b, self.c + other.c,
                      self.coef * other.coef)

    def __truediv__(self, other: "Growth") -> "Growth":
        return self * other ** -1

    def __pow__(self, p: float) -> "Growth":
        return Growth(self.a * p, self.b * p, self.c * p, self.coef ** p)

    def direction(self, tol: float = 1e-12) -> int:
        """+1 if the sequence diverges, -1 if it vanishes, 0 if it has a finite positive limit."""
        for e in (self.a, self.b, self.c):
            if e > tol:
                return 1
            if e < -tol:
                return -1
        return 0

    def limit(self) -> float:
        d = self.direction()
        return math.inf if d > 0 else (0.0 if d < 0 else self.coef)

    def log_value(self, n: float, m: float) -> float:
        out = math.log(self.coef) + self.a * n * math.log(m) + self.b * math.log(n)
        if self.c:
            out += self.c * math.log(math.log(n))
        return out

    def describe(self) -> str:
        parts = [f"{self.coef:g}"]
        if self.a:
            parts.append(f"m^({self.a:g} n)")
        if self.b:
            parts.append(f"n^{self.b:g}")
        if self.c:
            parts.append(f"(log n)^{self.c:g}")
        return " * ".join(parts)


def sv_growth(sv: SlowlyVarying, inner: Growth) -> Growth:
    """Growth of L(x_n) for x_n growing like ``inner`` (which must diverge)."""
    if sv.is_constant:
        return Growth(coef=sv.c)
    if inner.direction() <= 0:
        raise DomainError("slowly varying growth needs a diverging argument")
    if inner.a > 0:
        log_growth = Growth(0.0, 1.0, 0.0, inner.a)  # log x_n ~ a n log m
    elif inner.b > 0:
        log_growth = Growth(0.0, 0.0, 1.0, inner.b)
    else:
        raise DomainError("slowly varying growth of a polylogarithmic argument is not tabulated")
    if sv.kind == "log_power":
        return Growth(coef=sv.c) * log_growth ** sv.delta
    if log_growth.b > 0:
        return Growth(0.0, 0.0, sv.delta, sv.c)
    raise DomainError("log-log growth of a polynomial argument is not tabulated")


@dataclass(frozen=True)
class NormingSequence:
    """``b(x) = x**(1/alpha) * s(x)``."""

    alpha: float
    s: SlowlyVarying = CONSTANT

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise ConfigError("norming index alpha must lie in (0, 2)")

    @classmethod
    def for_law(cls, law) -> "NormingSequence":
        """Norming whose slowly varying part follows the dominant tail of ``law``.

        For a tail ``x**-alpha L(x)`` with ``L = c log(e+x)**delta`` the
        choice ``s(x) = log(e+x)**(delta/alpha)`` keeps ``k P(|X| > b(k))``
        bounded away from 0 and infinity.
        """
        sv = law.L_right if law.p_plus > 0 else law.L_left
        if sv.is_constant:
            return cls(law.alpha)
        return cls(law.alpha, SlowlyVarying(sv.kind, 1.0, sv.delta / law.alpha))

    def b(self, x):
        x = np.asarray(x, dtype=np.float64)
        if np.any(x < 0):
            raise DomainError("b is defined on x >= 0")
        out = x ** (1.0 / self.alpha) * self.s(x)
        return out if out.ndim else float(out)

    def J(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = x ** (1.0 - 1.0 / self.alpha) / self.s(x)
        return out if out.ndim else float(out)

    def log_J(self, log_x: float) -> float:
        return (1.0 - 1.0 / self.alpha) * log_x - math.log(self.s(math.exp(log_x)))

    def l(self, x: float) -> float:
        return l_of(self, x)

    def b_growth(self, inner: Growth) -> Growth:
        """Growth of b(x_n) for x_n growing like ``inner``."""
        return inner ** (1.0 / self.alpha) * sv_growth(self.s, inner)

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "s": self.s.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "NormingSequence":
        return cls(float(d["alpha"]), SlowlyVarying.from_dict(d.get("s")))


def l_growth(nseq: NormingSequence, inner: Growth) -> Growth:
    """Growth of l(x_n) for x_n growing like ``inner`` (alpha > 1).

    ``J(y) = y**((alpha-1)/alpha) / s(y)`` gives
    ``l(x) ~ (x s(l(x)))**(alpha/(alpha-1))`` with ``log l(x) ~ alpha/(alpha-1) log x``.
    """
    if nseq.alpha <= 1:
        raise DomainError("l is only used for alpha > 1")
    q = nseq.alpha / (nseq.alpha - 1)
    base = inner ** q
    if nseq.s.is_constant:
        return base * Growth(coef=nseq.s.c ** q)
    return base * sv_growth(nseq.s, base) ** q


def harmonic_growth(L: SlowlyVarying, eps: Growth, m: float) -> Growth:
    """Growth of ``sum_{k <= m**n} L(eps_n k) / k`` for eps_n = c m**(-rho n) or constant.

    The sum behaves like ``int_{eps}^{eps m**n} L(y) dy / y`` plus
    ``L(0) log(1/eps_n)``.
    """
    if eps.b or eps.c or eps.a > 0:
        raise DomainError("harmonic growth is tabulated for constant or geometrically "
                          "decaying thresholds only")
    rho = -eps.a
    lm = math.log(m)
    if L.is_constant:
        return Growth(b=1.0, coef=L.c * lm)
    if L.kind != "log_power":
        raise DomainError("harmonic growth is tabulated for constant and log-power L")
    d = L.delta
    upper = (1 - rho) * lm  # log(eps_n m**n) ~ (1 - rho) n log m
    if d > 0:
        return Growth(b=d + 1, coef=L.c * upper ** (d + 1) / (d + 1))
    if d > -1:
        # the initial stretch k < 1/eps_n, where L ~ L(0), dominates when rho > 0
        if rho > 0:
            return Growth(b=1.0, coef=L.c * rho * lm)
        return Growth(b=d + 1, coef=L.c * upper ** (d + 1) / (d + 1))
    raise DomainError("harmonic growth needs delta > -1")


def l_of(nseq: NormingSequence, x: float, rtol: float = 1e-10) -> float:
    """inf{y >= 0 : J(y) > x} by bisection on [1, 1e30] (in log y)."""
    if nseq.alpha <= 1:
        raise DomainError("l is only used for alpha > 1 (J does not grow otherwise)")
    if not x > 0:
        raise DomainError("l needs x > 0")
    lo, hi = math.log(BRACKET[0]), math.log(BRACKET[1])
    lx = math.log(x)
    if nseq.log_J(hi) <= lx:
        raise BracketError(f"J stays below {x:g} on [1, 1e30]")
    if nseq.log_J(lo) > lx:
        # the infimum lies in [0, 1); J(0) = 0
        a, b = 0.0, 1.0
        while b - a > rtol * b:
            mid = 0.5 * (a + b)
            if nseq.log_J(math.log(mid)) > lx:
                b = mid
            else:
                a = mid
        return b
    while hi - lo > rtol:
        mid = 0.5 * (lo + hi)
        if nseq.log_J(mid) > lx:
            hi = mid
        else:
            lo = mid
    return math.exp(hi)


THRESHOLD_KINDS = ("constant", "geometric_decay", "clt_scale", "diverging")


@dataclass(frozen=True)
class ThresholdSequence:
    """The deviation level ``eps_n``.

    constant:        eps_n = c
    geometric_decay: eps_n = c * m**(-rho n)
    clt_scale:       eps_n = x * b(m**n) / m**n
    diverging:       eps_n = c * m**(rho n)  (``form="geometric"``) or c * n**rho
    """

    kind: str
    c: float = 1.0
    rho: float = 0.0
    x: float = 0.0
    form: str = "geometric"

    def __post_init__(self):
        if self.kind not in THRESHOLD_KINDS:
            raise ConfigError(f"unknown threshold kind {self.kind!r}")
        if self.kind in ("geometric_decay", "diverging") and not self.rho > 0:
            raise ConfigError(f"{self.kind} thresholds need rho > 0")
        if self.form not in ("geometric", "polynomial"):
            raise ConfigError("diverging form must be 'geometric' or 'polynomial'")

    def __call__(self, n: float, m: float, nseq: NormingSequence | None = None) -> float:
        if self.kind == "clt_scale":
            if nseq is None:
                raise ConfigError("clt_scale thresholds need the norming sequence")
            return self.x / nseq.J(m ** n)
        if self.kind == "constant":
            return self.c
        return math.exp(self.log_value(n, m, nseq))

    def log_value(self, n: float, m: float, nseq: NormingSequence | None = None) -> float:
        if self.kind == "constant":
            return math.log(self.c)
        if self.kind == "geometric_decay":
            return math.log(self.c) - self.rho * n * math.log(m)
        if self.kind == "diverging":
            if self.form == "geometric":
                return math.log(self.c) + self.rho * n * math.log(m)
            return math.log(self.c) + self.rho * math.log(n)
        if self.x <= 0:
            raise DomainError("log of a nonpositive threshold")
        return math.log(self.x) - nseq.log_J(n * math.log(m))

    def growth(self, nseq: NormingSequence | None = None) -> Growth:
        if self.kind == "constant":
            return Growth(coef=self.c)
        if self.kind == "geometric_decay":
            return Growth(a=-self.rho, coef=self.c)
        if self.kind == "diverging":
            if self.form == "geometric":
                return Growth(a=self.rho, coef=self.c)
            return Growth(b=self.rho, coef=self.c)
        if nseq is None:
            raise ConfigError("clt_scale thresholds need the norming sequence")
        mn = Growth(a=1.0)
        return Growth(coef=max(self.x, 1e-300)) * nseq.b_growth(mn) / mn

    def scaled_limit(self, nseq: NormingSequence) -> float:
        """Closed-form limit of eps_n m**n / b(m**n)."""
        if self.kind == "clt_scale":
            return self.x
        mn = Growth(a=1.0)
        return (self.growth(nseq) * mn / nseq.b_growth(mn)).limit()

    def to_dict(self) -> dict:
        return {"kind": self.kind, "c": self.c, "rho": self.rho, "x": self.x,
                "form": self.form}

    @classmethod
    def from_dict(cls, d) -> "ThresholdSequence":
        return cls(d["kind"], float(d.get("c", 1.0)), float(d.get("rho", 0.0)),
                   float(d.get("x", 0.0)), d.get("form", "geometric"))


def l_n(nseq: NormingSequence, eps: ThresholdSequence, m: float, n: int) -> float:
    """l_n = l(1/eps_n)."""
    return l_of(nseq, 1.0 / eps(n, m, nseq))


def _check_chi(nseq, beta):
    if not 1 < nseq.alpha < 2:
        raise DomainError("chi_n and pi_n need 1 < alpha < 2")
    if not nseq.alpha < beta:
        raise DomainError("chi_n and pi_n need alpha < beta")


def log_chi_n(nseq, eps, m, gamma, beta, L, n) -> float:
    """log of b(l_n)**gamma / ((eps_n m**n)**(gamma - beta) L(eps_n m**n) m**n)."""
    _check_chi(nseq, beta)
    ln_ = l_n(nseq, eps, m, n)
    le = eps.log_value(n, m, nseq)
    lmn = n * math.log(m)
    return (gamma * math.log(nseq.b(ln_)) - (gamma - beta) * (le + lmn)
            - math.log(L(math.exp(le + lmn))) - lmn)


def chi_n(nseq, eps, m, gamma, beta, L, n) -> float:
    return math.exp(log_chi_n(nseq, eps, m, gamma, beta, L, n))


def chi_n_first_form(nseq, eps, m, gamma, beta, L, n) -> float:
    """l_n**(gamma-beta) m**((beta-1-gamma) n) b(l_n)**beta / L(b(l_n) m**n / l_n)."""
    _check_chi(nseq, beta)
    ln_ = l_n(nseq, eps, m, n)
    lb = math.log(nseq.b(ln_))
    lmn = n * math.log(m)
    out = ((gamma - beta) * math.log(ln_) + (beta - 1 - gamma) * lmn
           + beta * lb - math.log(L(math.exp(lb - math.log(ln_) + lmn))))
    return math.exp(out)


def harmonic_sum(L, eps: float, N: float) -> float:
    """sum_{1 <= k <= N} L(eps k)/k; exact up to 1e7 terms, Euler-Maclaurin beyond."""
    N = int(math.floor(N + 1e-9))
    if N < 1:
        return 0.0
    if N <= EXACT_SUM_LIMIT:
        parts = []
        for lo in range(1, N + 1, 1 << 20):
            k = np.arange(lo, min(N, lo + (1 << 20) - 1) + 1, dtype=np.float64)
            parts.append(math.fsum(np.asarray(L(eps * k)) / k))
        return math.fsum(parts)
    M = _EM_HEAD
    head = harmonic_sum(L, eps, M)

    def g(x):
        return float(L(eps * x)) / x

    def dg(x):
        ld = L.log_derivative(eps * x) if hasattr(L, "log_derivative") else 0.0
        return g(x) * (eps * ld - 1.0 / x)

    body, _ = integrate.quad(lambda s: float(L(eps * math.exp(s))), math.log(M),
                             math.log(N), limit=200, epsabs=0.0, epsrel=1e-13)
    return head + body + 0.5 * (g(N) - g(M)) + (dg(N) - dg(M)) / 12.0


def pi_n(nseq, eps, m, gamma, beta, L, n) -> float:
    """l_n**gamma eps_n**beta / sum_{1 <= k <= m**n} L(eps_n k)/k."""
    _check_chi(nseq, beta)
    e = eps(n, m, nseq)
    ln_ = l_n(nseq, eps, m, n)
    return ln_ ** gamma * e ** beta / harmonic_sum(L, e, m ** n)
