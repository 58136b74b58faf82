"""Offspring laws of the Galton-Watson process."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from ..errors import ConfigError, DomainError

KINDS = ("binary", "geom_shift", "two_point", "zeta_shift", "custom")
ASSUMPTION = "offspring law must satisfy p0 = 0, 0 < p1 < 1 and m > 1"


def alias_table(probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Walker/Vose alias table: bucket i keeps itself with probability prob[i]."""
    n = probs.size
    scaled = probs * n / probs.sum()
    prob = np.zeros(n)
    alias = np.arange(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s, g = small.pop(), large.pop()
        prob[s], alias[s] = scaled[s], g
        scaled[g] -= 1.0 - scaled[s]
        (small if scaled[g] < 1.0 else large).append(g)
    for i in large + small:
        prob[i] = 1.0
    return prob, alias


@dataclass(frozen=True)
class OffspringLaw:
    """Reproduction law {p_k} with p_0 = 0 and 0 < p_1 < 1.

    Built-ins: ``binary(p)`` (p_1 = p, p_2 = 1-p), ``geom_shift(a)``
    (p_k = (1-a) a**(k-1)), ``two_point(j, p)`` (p_1 = p, p_j = 1-p),
    ``zeta_shift(beta_z, K)`` (p_k proportional to k**-(beta_z+1), k <= K) and
    ``custom(probs)`` with ``probs[k] = p_k`` starting at k = 0.
    """

    kind: str
    params: tuple = ()
    values: np.ndarray = field(default=None, repr=False, compare=False)
    probs: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown offspring kind {self.kind!r}")
        if self.kind != "geom_shift":
            v, p = self._finite_support()
            object.__setattr__(self, "values", v)
            object.__setattr__(self, "probs", p)
        self._validate()

    # -- constructors -------------------------------------------------------
    @classmethod
    def binary(cls, p: float) -> "OffspringLaw":
        return cls("binary", (float(p),))

    @classmethod
    def geom_shift(cls, a: float) -> "OffspringLaw":
        return cls("geom_shift", (float(a),))

    @classmethod
    def two_point(cls, j: int, p: float, i: int = 1) -> "OffspringLaw":
        return cls("two_point", (int(i), int(j), float(p)))

    @classmethod
    def zeta_shift(cls, beta_z: float, k_trunc: int) -> "OffspringLaw":
        return cls("zeta_shift", (float(beta_z), int(k_trunc)))

    @classmethod
    def custom(cls, probs) -> "OffspringLaw":
        return cls("custom", tuple(float(x) for x in probs))

    def _finite_support(self):
        k, pr = self.kind, self.params
        if k == "binary":
            v, p = [1, 2], [pr[0], 1.0 - pr[0]]
        elif k == "two_point":
            i, j, q = pr
            if not 1 <= i < j:
                raise ConfigError("two_point needs 1 <= i < j")
            v, p = [i, j], [q, 1.0 - q]
        elif k == "zeta_shift":
            beta_z, K = pr
            if not (beta_z > 0 and K >= 2):
                raise ConfigError("zeta_shift needs beta_z > 0 and K >= 2")
            v = np.arange(1, K + 1)
            w = v.astype(np.float64) ** -(beta_z + 1)
            p = w / math.fsum(w)
        else:
            arr = np.asarray(pr, dtype=np.float64)
            if arr.size < 3 or np.any(arr < 0) or abs(arr.sum() - 1) > 1e-12:
                raise ConfigError("custom offspring probabilities must be a pmf on 0, 1, 2, ...")
            if arr[0] > 0:
                raise ConfigError(ASSUMPTION + f" (got p0 = {arr[0]:g})")
            nz = np.nonzero(arr)[0]
            v, p = nz, arr[nz]
        return np.asarray(v, dtype=np.int64), np.asarray(p, dtype=np.float64)

    def _validate(self):
        if self.kind == "geom_shift":
            a = self.params[0]
            if not 0 < a < 1:
                raise ConfigError(ASSUMPTION + " (geom_shift needs 0 < a < 1)")
        else:
            if np.any(self.probs < 0) or self.values[0] < 1:
                raise ConfigError(ASSUMPTION)
        p1 = self.p1
        if not 0 < p1 < 1:
            raise ConfigError(ASSUMPTION + f" (got p1 = {p1:g})")
        if not self.m > 1:
            raise ConfigError(ASSUMPTION + f" (got m = {self.m:g})")

    # -- moments and constants -------------------------------------------------
    @property
    def finite(self) -> bool:
        return self.kind != "geom_shift"

    @property
    def p1(self) -> float:
        if self.kind == "geom_shift":
            return 1.0 - self.params[0]
        hit = self.values == 1
        return float(self.probs[hit][0]) if hit.any() else 0.0

    @property
    def m(self) -> float:
        if self.kind == "geom_shift":
            return 1.0 / (1.0 - self.params[0])
        return math.fsum(self.values * self.probs)

    @property
    def variance(self) -> float:
        if self.kind == "geom_shift":
            a = self.params[0]
            return a / (1 - a) ** 2
        return math.fsum(self.probs * (self.values - self.m) ** 2)

    @property
    def gamma(self) -> float:
        """Schroder exponent: p1 = m**-gamma."""
        return -math.log(self.p1) / math.log(self.m)

    @property
    def d(self) -> int:
        """gcd of the differences of support points."""
        if self.kind == "geom_shift":
            return 1
        v = self.values
        return int(reduce(math.gcd, (int(x - v[0]) for x in v[1:]), 0))

    @property
    def max_support(self) -> float:
        return math.inf if self.kind == "geom_shift" else int(self.values[-1])

    def pmf(self, k):
        k = np.asarray(k)
        if self.kind == "geom_shift":
            a = self.params[0]
            out = np.where(k >= 1, (1 - a) * a ** (np.maximum(k, 1) - 1.0), 0.0)
        else:
            lut = dict(zip(self.values.tolist(), self.probs.tolist()))
            out = np.array([lut.get(int(x), 0.0) for x in np.atleast_1d(k)])
            out = out if k.ndim else out[0]
        return out if np.ndim(out) else float(out)

    def sf(self, k):
        """P(xi >= k)."""
        k = np.asarray(k, dtype=np.float64)
        if self.kind == "geom_shift":
            a = self.params[0]
            kk = np.ceil(k)
            out = np.where(kk <= 1, 1.0, a ** (np.maximum(kk, 1) - 1))
        else:
            tail = np.concatenate([np.cumsum(self.probs[::-1])[::-1], [0.0]])
            idx = np.searchsorted(self.values, k, side="left")
            out = tail[idx]
        return out if out.ndim else float(out)

    def moment(self, t: float) -> float:
        """E[xi**t] (infinite support summed until terms vanish)."""
        if self.kind == "geom_shift":
            a = self.params[0]
            K = int(60 / -math.log(a)) + 50
            k = np.arange(1, K + 1, dtype=np.float64)
            return math.fsum((1 - a) * a ** (k - 1) * k ** t)
        return math.fsum(self.probs * self.values.astype(np.float64) ** t)

    # -- generating function ---------------------------------------------------
    def f(self, s):
        s = np.asarray(s, dtype=np.float64)
        if self.kind == "geom_shift":
            a = self.params[0]
            out = (1 - a) * s / (1 - a * s)
        else:
            out = sum(p * s ** int(v) for v, p in zip(self.values, self.probs))
        return out if np.ndim(out) else float(out)

    def f_prime(self, s):
        s = np.asarray(s, dtype=np.float64)
        if self.kind == "geom_shift":
            a = self.params[0]
            out = (1 - a) / (1 - a * s) ** 2
        else:
            out = sum(p * int(v) * s ** (int(v) - 1) for v, p in zip(self.values, self.probs))
        return out if np.ndim(out) else float(out)

    def complement_f(self, u):
        """1 - f(1 - u), accurate for small u."""
        u = np.asarray(u, dtype=np.float64)
        if self.kind == "geom_shift":
            a = self.params[0]
            out = u / (1 - a + a * u)
        else:
            with np.errstate(divide="ignore"):  # u = 1 gives -inf, handled by expm1
                lu = np.log1p(-u)
            out = sum(p * -np.expm1(int(v) * lu) for v, p in zip(self.values, self.probs))
        return out if np.ndim(out) else float(out)

    def coefficients(self, K: int) -> np.ndarray:
        """Coefficients c[0..K] of f(s) truncated at s**K."""
        c = np.zeros(K + 1)
        if self.kind == "geom_shift":
            a = self.params[0]
            k = np.arange(1, K + 1, dtype=np.float64)
            c[1:] = (1 - a) * a ** (k - 1)
        else:
            keep = self.values <= K
            c[self.values[keep]] = self.probs[keep]
        return c

    # -- sampling ---------------------------------------------------------------
    def kernel_table(self):
        """Sampling table shared by both kernel backends."""
        if self.kind == "geom_shift":
            return (1, math.log(self.params[0]), np.ones(1), np.zeros(1, dtype=np.int64),
                    np.ones(1, dtype=np.int64))
        prob, alias = alias_table(self.probs)
        return (0, 0.0, np.ascontiguousarray(prob), np.ascontiguousarray(alias),
                np.ascontiguousarray(self.values, dtype=np.int64))

    def next_generation(self, z: np.ndarray, gen: np.random.Generator) -> np.ndarray:
        """Z_{i+1} for each entry of ``z`` by exact aggregated sampling."""
        z = np.asarray(z, dtype=np.int64)
        if self.kind == "geom_shift":
            a = self.params[0]
            out = z.copy()
            pos = z > 0
            out[pos] += gen.negative_binomial(z[pos], 1 - a)
            return out
        if self.values.size == 2:
            i, j = int(self.values[0]), int(self.values[1])
            return i * z + (j - i) * gen.binomial(z, self.probs[1])
        counts = gen.multinomial(z, self.probs)
        return counts @ self.values

    # -- serialisation -------------------------------------------------------------
    def to_dict(self) -> dict:
        names = {"binary": ["p"], "geom_shift": ["a"], "two_point": ["i", "j", "p"],
                 "zeta_shift": ["beta_z", "k_trunc"]}
        if self.kind == "custom":
            return {"kind": "custom", "probs": list(self.params)}
        return {"kind": self.kind, **dict(zip(names[self.kind], self.params))}

    @classmethod
    def from_dict(cls, d) -> "OffspringLaw":
        kind = d.get("kind")
        if kind == "binary":
            return cls.binary(d["p"])
        if kind == "geom_shift":
            return cls.geom_shift(d["a"])
        if kind == "two_point":
            return cls.two_point(d["j"], d["p"], d.get("i", 1))
        if kind == "zeta_shift":
            return cls.zeta_shift(d["beta_z"], d["k_trunc"])
        if kind == "custom":
            return cls.custom(d["probs"])
        raise ConfigError(f"unknown offspring kind {kind!r}")

    @property
    def label(self) -> str:
        return f"{self.kind}({','.join(f'{p:g}' for p in self.params)})"


@dataclass(frozen=True)
class CenteredOffspring:
    """Summand law X = xi - m with xi distributed as the offspring law.

    Used for the Lotka-Nagaev estimator: S_{Z_n}/Z_n has the law of
    Z_{n+1}/Z_n - m.  For ``zeta_shift`` offspring the right tail has index
    ``beta_z`` up to the truncation point.
    """

    offspring: OffspringLaw

    @property
    def name(self) -> str:
        return f"centered[{self.offspring.label}]"

    @property
    def shift(self) -> float:
        return -self.offspring.m

    @property
    def beta(self) -> float:
        off = self.offspring
        return off.params[0] if off.kind == "zeta_shift" else math.inf

    @property
    def alpha(self) -> float | None:
        b = self.beta
        return b if b < 2 else None

    p_plus = 1.0
    p_minus = 0.0
    symmetric = False

    def kernel_vector(self) -> np.ndarray:
        v = np.zeros(14)
        v[0] = 2.0
        v[5] = self.offspring.m
        return v

    def kernel_table(self):
        return self.offspring.kernel_table()

    def tail_right(self, x):
        """P(xi - m >= x)."""
        return self.offspring.sf(np.asarray(x, dtype=np.float64) + self.offspring.m)

    def abs_tail(self, x):
        x = np.asarray(x, dtype=np.float64)
        m = self.offspring.m
        left = np.where(x > m - 1, 0.0, 1.0 - self.offspring.sf(np.floor(m - x) + 1))
        return self.tail_right(x) + left

    def to_dict(self) -> dict:
        return {"family": "centered_offspring", "offspring": self.offspring.to_dict()}


def require_assumptions(off: OffspringLaw) -> None:
    """Raise DomainError unless the Schroder-case assumptions hold."""
    if not (0 < off.p1 < 1 and off.m > 1):
        raise DomainError(ASSUMPTION)
