"""Heavy-tailed summand laws with closed-form tails and truncated moments.

A :class:`SummandLaw` is a two-piece distribution: a uniform body on
``(-x0, x0)`` and Pareto-type tails glued at ``+-x0``,

    P(Y >= z)  = c_plus  * (z/x0)**(-beta)  * L_right(z) / L_right(x0),  z >= x0
    P(Y <= -z) = c_minus * (z/x0)**(-alpha_left) * L_left(z) / L_left(x0),

and ``X = Y + shift`` where the shift makes ``E[X] = 0`` whenever the
stability index exceeds one.  The distribution function is continuous, so
``P(X >= x) = P(X > x)``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate, special

from . import kernels
from .errors import ConfigError, DomainError
from .rng import Stream

SV_KINDS = ("constant", "log_power", "loglog_power")
_DUMMY_TABLE = (0, 0.0, np.ones(1), np.zeros(1, dtype=np.int64), np.zeros(1, dtype=np.int64))


@dataclass(frozen=True)
class SlowlyVarying:
    """``L(x) = c``, ``c*ln(e+x)**delta`` or ``c*ln(e+ln(e+x))**delta``."""

    kind: str = "constant"
    c: float = 1.0
    delta: float = 0.0

    def __post_init__(self):
        if self.kind not in SV_KINDS:
            raise ConfigError(f"unknown slowly varying kind {self.kind!r}")
        if not self.c > 0:
            raise ConfigError("slowly varying factor needs c > 0")

    @property
    def code(self) -> int:
        return SV_KINDS.index(self.kind)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant" or self.delta == 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if np.any(x < 0):
            raise DomainError("slowly varying functions are defined on x >= 0")
        if self.kind == "constant":
            out = np.full_like(x, self.c)
        elif self.kind == "log_power":
            out = self.c * np.log(np.e + x) ** self.delta
        else:
            out = self.c * np.log(np.e + np.log(np.e + x)) ** self.delta
        return out if out.ndim else float(out)

    def log_derivative(self, x):
        """d/dx log L(x)."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "constant":
            out = np.zeros_like(x)
        elif self.kind == "log_power":
            out = self.delta / ((np.e + x) * np.log(np.e + x))
        else:
            inner = np.log(np.e + x)
            out = self.delta / ((np.e + x) * inner * np.log(np.e + inner))
        return out if out.ndim else float(out)

    def potter_constant(self, eta: float, lo: float = 1.0, hi: float = 1e9,
                        points: int = 200) -> float:
        """Grid maximum of L(z)/L(y) / max((z/y)**eta, (z/y)**-eta) on [lo, hi]^2."""
        g = np.geomspace(lo, hi, points)
        lv = np.log(self(g))
        lr = lv[:, None] - lv[None, :]
        lz = np.log(g)[:, None] - np.log(g)[None, :]
        return float(np.exp(np.max(lr - eta * np.abs(lz))))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "c": self.c, "delta": self.delta}

    @classmethod
    def from_dict(cls, d) -> "SlowlyVarying":
        if d is None:
            return cls()
        return cls(d.get("kind", "constant"), float(d.get("c", 1.0)),
                   float(d.get("delta", 0.0)))


CONSTANT = SlowlyVarying()


def _power_integral(q: float, lo: float, hi: float) -> float:
    """Integral of y**(q-1) over [lo, hi], 0 < lo <= hi <= inf."""
    if hi <= lo:
        return 0.0
    if q == 0.0:
        return math.log(hi / lo)
    if math.isinf(hi):
        if q >= 0:
            return math.inf
        return -lo ** q / q
    return (hi ** q - lo ** q) / q


@dataclass(frozen=True)
class SummandLaw:
    """Two-piece heavy-tailed law for the summands X_i.

    Derived attributes: ``alpha`` (stability index), ``beta`` (right-tail
    index), ``p_plus``/``p_minus`` (limiting tail balance), ``body_mass`` and
    ``shift`` (the centring constant).
    """

    right_index: float
    left_index: float
    right_mass: float
    left_mass: float
    x0: float = 1.0
    L_right: SlowlyVarying = CONSTANT
    L_left: SlowlyVarying = CONSTANT
    name: str = ""
    alpha: float = field(init=False)
    beta: float = field(init=False)
    p_plus: float = field(init=False)
    shift: float = field(init=False)

    def __post_init__(self):
        ri, li = float(self.right_index), float(self.left_index)
        cp, cm = float(self.right_mass), float(self.left_mass)
        if not (ri > 0 and li > 0 and self.x0 > 0):
            raise ConfigError("tail indices and x0 must be positive")
        if not cp > 0:
            raise ConfigError("the right tail must carry mass (P(X >= x) ~ x^-beta L(x))")
        if cm < 0 or cp + cm > 1 + 1e-15:
            raise ConfigError("tail masses must be nonnegative and sum to at most 1")
        for idx, sv in ((ri, self.L_right), (li, self.L_left)):
            if sv.kind != "constant" and sv.delta > idx * math.log(math.e + self.x0):
                raise ConfigError("slowly varying exponent too large: tail would not decrease")
        if cm == 0 or ri < li:
            alpha, p_plus = ri, 1.0
        elif ri > li:
            alpha, p_plus = li, 0.0
        else:
            p_plus = self._balance(cp, cm)
            alpha = ri
        if not 0 < alpha < 2:
            raise ConfigError(f"stability index alpha={alpha} must lie in (0, 2)")
        if alpha == 1.0 and not (self._symmetric_shape(cp, cm) and p_plus == 0.5):
            raise ConfigError("alpha = 1 requires the symmetric construction "
                              "(mu(1;x) = 0, strictly stable limit)")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", ri)
        object.__setattr__(self, "p_plus", p_plus)
        object.__setattr__(self, "shift", 0.0)
        if alpha > 1:
            object.__setattr__(self, "shift", -self._mean_y())

    def _balance(self, cp, cm) -> float:
        lr, ll = self.L_right, self.L_left
        if lr.kind == ll.kind and (lr.delta == ll.delta or lr.kind == "constant"):
            return cp / (cp + cm)
        # equal power index: the slowly varying factors decide
        big = 1e300
        r = (cp * lr(big) / lr(self.x0)) / (cm * ll(big) / ll(self.x0))
        return 1.0 if r > 1 else 0.0

    def _symmetric_shape(self, cp, cm) -> bool:
        return (cp == cm and self.right_index == self.left_index
                and self.L_right == self.L_left)

    # -- basic shape -----------------------------------------------------
    @property
    def body_mass(self) -> float:
        return max(0.0, 1.0 - self.right_mass - self.left_mass)

    @property
    def p_minus(self) -> float:
        return 1.0 - self.p_plus

    @property
    def symmetric(self) -> bool:
        """True when X is symmetric, hence mu(1; x) = 0 for every x."""
        return self._symmetric_shape(self.right_mass, self.left_mass)

    @property
    def skew(self) -> float:
        return self.p_plus - self.p_minus

    def L_effective(self, x):
        """Slowly varying L with P(X >= x) ~ x**-beta * L(x)."""
        return (self.right_mass * self.x0 ** self.beta
                * self.L_right(x) / self.L_right(self.x0))

    @property
    def L_spec(self) -> SlowlyVarying:
        """``L_effective`` as a :class:`SlowlyVarying` (same kind, rescaled c)."""
        sv = self.L_right
        c = self.right_mass * self.x0 ** self.beta * sv.c / float(sv(self.x0))
        return SlowlyVarying(sv.kind, c, sv.delta)

    # -- tails and cdf -----------------------------------------------------
    def _tail_r(self, z):
        return (self.right_mass * (z / self.x0) ** (-self.right_index)
                * self.L_right(z) / self.L_right(self.x0))

    def _tail_l(self, z):
        if self.left_mass == 0:
            return np.zeros_like(z)
        return (self.left_mass * (z / self.x0) ** (-self.left_index)
                * self.L_left(z) / self.L_left(self.x0))

    def _sf_y(self, y):
        y = np.asarray(y, dtype=np.float64)
        out = np.empty_like(y)
        x0, w = self.x0, self.body_mass
        r = y >= x0
        m = (y > -x0) & ~r
        lft = ~(r | m)
        out[r] = self._tail_r(y[r])
        out[m] = self.right_mass + w * (x0 - y[m]) / (2 * x0)
        out[lft] = 1.0 - self._tail_l(-y[lft])
        return out

    def _cdf_y(self, y):
        y = np.asarray(y, dtype=np.float64)
        out = np.empty_like(y)
        x0, w = self.x0, self.body_mass
        lft = y <= -x0
        m = (y < x0) & ~lft
        r = ~(lft | m)
        out[lft] = self._tail_l(-y[lft])
        out[m] = self.left_mass + w * (y[m] + x0) / (2 * x0)
        out[r] = 1.0 - self._tail_r(y[r])
        return out

    def tail_right(self, x):
        """P(X >= x), exact."""
        x = np.asarray(x, dtype=np.float64)
        out = self._sf_y(np.atleast_1d(x) - self.shift)
        return out if x.ndim else float(out[0])

    def tail_left(self, x):
        """P(X <= -x), exact."""
        x = np.asarray(x, dtype=np.float64)
        out = self._cdf_y(-np.atleast_1d(x) - self.shift)
        return out if x.ndim else float(out[0])

    def cdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = self._cdf_y(np.atleast_1d(x) - self.shift)
        return out if x.ndim else float(out[0])

    def abs_tail(self, x):
        """P(|X| >= x)."""
        return self.tail_right(x) + self.tail_left(x)

    def quantile(self, u):
        u = np.asarray(u, dtype=np.float64)
        out = kernels.fallback.law_draw(self.kernel_vector(), _DUMMY_TABLE,
                                        np.atleast_1d(u))
        return out if u.ndim else float(out[0])

    # -- sampling ----------------------------------------------------------
    def kernel_vector(self) -> np.ndarray:
        return np.array([
            0.0, self.x0, self.left_mass, self.body_mass, self.right_mass, self.shift,
            self.right_index, self.L_right.code, self.L_right.delta,
            float(self.L_right(self.x0)) / self.L_right.c,
            self.left_index, self.L_left.code, self.L_left.delta,
            float(self.L_left(self.x0)) / self.L_left.c,
        ], dtype=np.float64)

    def kernel_table(self):
        return _DUMMY_TABLE

    def sample(self, stream: Stream, size: int | None = None, backend=None):
        """Inverse-CDF draws consuming one stream position each."""
        n = 1 if size is None else int(size)
        k = kernels.get(backend)
        out = k.sample_law(self.kernel_vector(), self.kernel_table(), stream.key,
                           stream.position, n)
        stream.position += n
        return float(out[0]) if size is None else out

    def sample_S_k(self, k: int, stream: Stream, backend=None) -> float:
        return sample_S_k(self, k, stream, backend)

    # -- truncated moments ---------------------------------------------------
    def _density_y(self, y):
        """Density of Y on the tails (|y| >= x0)."""
        y = np.asarray(y, dtype=np.float64)
        z = np.abs(y)
        if np.all(y > 0):
            t, idx, sv = self._tail_r(z), self.right_index, self.L_right
        else:
            t, idx, sv = self._tail_l(z), self.left_index, self.L_left
        return t * (idx / z - sv.log_derivative(z))

    def _tail_closed(self, side: str) -> bool:
        sv = self.L_right if side == "r" else self.L_left
        return sv.is_constant

    def _tail_moment(self, side: str, j: float, lo: float, hi: float) -> float:
        """E[Z**j; lo <= Z <= hi] over one tail, Z = |Y| >= x0."""
        lo = max(lo, self.x0)
        if hi <= lo:
            return 0.0
        mass = self.right_mass if side == "r" else self.left_mass
        if mass == 0:
            return 0.0
        idx = self.right_index if side == "r" else self.left_index
        if self._tail_closed(side):
            return mass * idx * self.x0 ** idx * _power_integral(j - idx, lo, hi)
        sgn = 1.0 if side == "r" else -1.0

        def f(s):
            z = math.exp(s)
            return z ** j * float(self._density_y(sgn * z)) * z

        upper = math.log(hi) if math.isfinite(hi) else math.log(lo) + 700.0 / max(idx - j, 1e-3)
        upper = min(upper, 700.0)
        val, _ = integrate.quad(f, math.log(lo), upper, limit=400,
                                epsabs=0.0, epsrel=1e-12)
        return val

    def _y_moment(self, j: int, a: float, b: float) -> float:
        """E[Y**j; a <= Y <= b] for integer j >= 0."""
        if b <= a:
            return 0.0
        x0, w = self.x0, self.body_mass
        out = 0.0
        lo, hi = max(a, -x0), min(b, x0)
        if hi > lo and w > 0:
            out += w / (2 * x0) * (hi ** (j + 1) - lo ** (j + 1)) / (j + 1)
        if b >= x0:
            out += self._tail_moment("r", j, max(a, x0), b)
        if a <= -x0:
            out += (-1) ** j * self._tail_moment("l", j, max(-b, x0), -a)
        return out

    def partial_moment(self, p: int, a: float, b: float) -> float:
        """E[X**p; a <= X <= b] for integer p >= 0."""
        c = self.shift
        return sum(special.comb(p, j) * c ** (p - j) * self._y_moment(j, a - c, b - c)
                   for j in range(p + 1))

    def mu1(self, x: float) -> float:
        """Truncated first moment of X over [-x, x]."""
        if x <= 0:
            raise DomainError("mu1 needs x > 0")
        if self.symmetric:
            return 0.0
        return self.partial_moment(1, -x, x)

    def mu2(self, x: float) -> float:
        """Truncated second moment of X over [-x, x]."""
        if x <= 0:
            raise DomainError("mu2 needs x > 0")
        return self.partial_moment(2, -x, x)

    def A_plus(self, t: float, y: float = math.inf) -> float:
        """E[X**t; 0 <= X <= y]."""
        if t <= 0:
            raise DomainError("A_plus needs t > 0")
        c = self.shift
        if float(t).is_integer():
            return self.partial_moment(int(t), 0.0, y)
        if c == 0.0:
            x0, w = self.x0, self.body_mass
            hi = min(y, x0)
            body = w / (2 * x0) * hi ** (t + 1) / (t + 1) if w > 0 else 0.0
            return body + self._tail_moment("r", t, x0, y)
        return self._shifted_power(t, y)

    def _shifted_power(self, t: float, y: float) -> float:
        c, x0, w = self.shift, self.x0, self.body_mass
        out = 0.0
        lo, hi = max(-c, -x0), min(y - c, x0)
        if hi > lo and w > 0:
            out += w / (2 * x0) * ((hi + c) ** (t + 1) - (lo + c) ** (t + 1)) / (t + 1)
        a, b = max(x0, -c), y - c
        if b > a:
            def f(s):
                z = math.exp(s)
                return (z + c) ** t * float(self._density_y(z)) * z
            # integrand decays like exp(-(index - t) s); keep z**(t+1) finite
            upper = math.log(b) if math.isfinite(b) else min(
                600.0 / (t + 1), math.log(a) + 80.0 / max(self.right_index - t, 1e-3))
            val, _ = integrate.quad(f, math.log(a), upper, limit=400,
                                    epsabs=0.0, epsrel=1e-12)
            out += val
        z_lo = max(x0, c - y)
        if c > z_lo:  # left-tail points -z with 0 <= c - z <= y (large positive shifts)
            def g(s):
                z = math.exp(s)
                return (c - z) ** t * float(self._density_y(-z)) * z
            val, _ = integrate.quad(g, math.log(z_lo), math.log(c), limit=400)
            out += val
        return out

    @functools.lru_cache(maxsize=256)
    def A_t_plus(self, t: float) -> float:
        """E[X**t 1{X >= 0}] (infinite when t >= beta)."""
        if t >= self.beta:
            return math.inf
        return self.A_plus(t, math.inf)

    def mean(self) -> float:
        """E[X] (exactly 0 by construction when alpha > 1)."""
        if self.alpha <= 1:
            raise DomainError("the mean is infinite for alpha <= 1")
        return self._mean_y() + self.shift

    def _mean_y(self) -> float:
        return (self._tail_moment("r", 1.0, self.x0, math.inf)
                - self._tail_moment("l", 1.0, self.x0, math.inf))

    # -- serialisation --------------------------------------------------------
    def to_dict(self) -> dict:
        return {"family": "two_piece", "right_index": self.right_index,
                "left_index": self.left_index, "right_mass": self.right_mass,
                "left_mass": self.left_mass, "x0": self.x0,
                "L_right": self.L_right.to_dict(), "L_left": self.L_left.to_dict(),
                "name": self.name}

    @classmethod
    def from_dict(cls, d) -> "SummandLaw":
        return cls(float(d["right_index"]), float(d["left_index"]),
                   float(d["right_mass"]), float(d["left_mass"]),
                   float(d.get("x0", 1.0)), SlowlyVarying.from_dict(d.get("L_right")),
                   SlowlyVarying.from_dict(d.get("L_left")), d.get("name", ""))


# -- built-in families ---------------------------------------------------------

def matched_body_mass(alpha: float) -> float:
    """Body weight cancelling the t**2 term of 1 - E exp(itX) for the symmetric law.

    With this weight the characteristic function is c|t|**alpha + O(t**4)
    near zero, so normalised sums approach the stable limit quickly.
    """
    return 3 * alpha / (2 + 2 * alpha)


def symmetric_pareto(alpha: float, x0: float = 1.0, body_mass: float = 0.0,
                     L: SlowlyVarying = CONSTANT, name: str = "") -> SummandLaw:
    half = (1.0 - body_mass) / 2
    return SummandLaw(alpha, alpha, half, half, x0, L, L,
                      name or f"symmetric_pareto({alpha:g})")


def two_sided(alpha: float, p_plus: float, x0: float = 1.0, body_mass: float = 0.0,
              L: SlowlyVarying = CONSTANT, name: str = "") -> SummandLaw:
    tail = 1.0 - body_mass
    return SummandLaw(alpha, alpha, tail * p_plus, tail * (1 - p_plus), x0, L, L,
                      name or f"two_sided({alpha:g},{p_plus:g})")


def one_sided(beta: float, x0: float = 1.0, body_mass: float = 0.5,
              L: SlowlyVarying = CONSTANT, name: str = "") -> SummandLaw:
    """p_plus = 1: only a right heavy tail (the left side is the body)."""
    return SummandLaw(beta, beta, 1.0 - body_mass, 0.0, x0, L, CONSTANT,
                      name or f"one_sided({beta:g})")


def spectrally_negative(alpha: float, beta: float, right_mass: float = 0.25,
                        left_mass: float = 0.25, x0: float = 1.0,
                        L_right: SlowlyVarying = CONSTANT,
                        L_left: SlowlyVarying = CONSTANT, name: str = "") -> SummandLaw:
    """p_plus = 0: left tail of index alpha, lighter right tail of index beta > alpha."""
    if not beta > alpha:
        raise ConfigError("p_plus = 0 needs beta > alpha")
    return SummandLaw(beta, alpha, right_mass, left_mass, x0, L_right, L_left,
                      name or f"spectrally_negative({alpha:g},{beta:g})")


@dataclass(frozen=True)
class LatticeSign:
    """Test law: X = +-1 with probability 1/2 each (not heavy-tailed)."""

    name: str = "lattice_sign"
    alpha = None
    beta = None
    p_plus = 0.5
    shift = 0.0
    symmetric = True

    def kernel_vector(self) -> np.ndarray:
        v = np.zeros(14)
        v[0] = 1.0
        return v

    def kernel_table(self):
        return _DUMMY_TABLE

    def tail_right(self, x):
        x = np.asarray(x, dtype=np.float64)
        out = np.where(x > 1, 0.0, np.where(x > -1, 0.5, 1.0))
        return out if out.ndim else float(out)

    def prob_sum_at_least(self, k: int, y: float) -> float:
        """Exact P(S_k >= y): S_k = 2 Bin(k, 1/2) - k."""
        j = math.ceil((y + k) / 2 - 1e-12)
        if j <= 0:
            return 1.0
        if j > k:
            return 0.0
        return float(special.bdtrc(j - 1, k, 0.5))

    def to_dict(self) -> dict:
        return {"family": "lattice_sign"}


def sample_S_k(law, k: int, stream: Stream, backend=None) -> float:
    """One draw of S_k from consecutive positions of ``stream``."""
    if k < 1:
        raise DomainError("k must be >= 1")
    kern = kernels.get(backend)
    vec, table = law.kernel_vector(), law.kernel_table()
    block = 1 << 20
    parts = []
    done = 0
    while done < k:
        n = min(block, k - done)
        x = kern.sample_law(vec, table, stream.key, stream.position, n)
        stream.position += n
        parts.append(x)
        done += n
    x = np.concatenate(parts)
    if k > 1e6:
        return math.fsum(x)
    return float(np.cumsum(x)[-1])


def sample_sums(law, k: int, reps: int, seed: int, stream0: int = 0,
                checkpoints=None, workers: int = 1, backend=None) -> np.ndarray:
    """S_k for ``reps`` independent replicates (streams ``stream0 + r``).

    With ``checkpoints`` (increasing, last equal to ``k``) returns the
    partial sums at each checkpoint, one column per checkpoint.
    """
    from .engine import concat, run_chunked
    kern = kernels.get(backend)
    cps = np.asarray([k] if checkpoints is None else checkpoints, dtype=np.int64)
    if cps[-1] != k or np.any(np.diff(cps) <= 0):
        raise DomainError("checkpoints must increase and end at k")
    vec, table = law.kernel_vector(), law.kernel_table()

    def job(lo, n):
        return kern.walk_checkpoints(vec, table, seed, stream0 + lo, n, cps)

    size = max(1, min(1 << 15, int(2e7 // max(k, 1))))
    out = concat(run_chunked(job, reps, workers, size))
    return out[:, 0] if checkpoints is None else out
