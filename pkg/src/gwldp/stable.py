"""Strictly stable laws: sampler, tabulated distribution function, calibration.

Parameterisation: ``S_alpha(scale, skew, 0)`` in the Samorodnitsky-Taqqu
convention, i.e. ``log E exp(itU) = -scale**alpha |t|**alpha (1 - i skew
sign(t) tan(pi alpha / 2))`` for ``alpha != 1`` and ``-scale |t|`` for the
symmetric ``alpha = 1`` case.  With location zero these laws are strictly
stable.

The distribution function is evaluated from tables ``(x, cdf)`` of the unit
scale law.  Tables shipped in ``gwldp/data/stable`` were counted from 1e8
sampler draws; other ``(alpha, skew)`` pairs are tabulated on first use from
1e7 draws and cached in memory.
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import optimize, special

from .errors import CalibrationFailure, ConfigError, DomainError
from .rng import Stream

TABLE_DIR = Path(__file__).resolve().parent / "data" / "stable"
CACHE_DRAWS = 10 ** 7
GOLDEN_DRAWS = 10 ** 8
TABLE_SEED = 0x5AB1E


@dataclass(frozen=True)
class StableLaw:
    alpha: float
    skew: float = 0.0
    scale: float = 1.0
    ks: float | None = None  # KS distance achieved by calibration, if any

    def __post_init__(self):
        if not 0 < self.alpha < 2:
            raise ConfigError("stable index must lie in (0, 2)")
        if not -1 <= self.skew <= 1:
            raise ConfigError("skewness must lie in [-1, 1]")
        if self.alpha == 1 and self.skew != 0:
            raise ConfigError("alpha = 1 is supported only for the symmetric law")
        if not self.scale > 0:
            raise ConfigError("scale must be positive")

    # -- sampling ---------------------------------------------------------
    def sample(self, stream: Stream, size: int | None = None):
        return sample_stable(self, stream, size)

    # -- distribution function ----------------------------------------------
    def cdf(self, x):
        """P(U <= x)."""
        x = np.asarray(x, dtype=np.float64)
        z = x / self.scale
        if self.alpha == 1:
            out = 0.5 + np.arctan(z) / np.pi
        elif self.alpha == 0.5 and self.skew in (-1.0, 1.0):
            out = _levy_cdf(z if self.skew == 1 else -z)
            if self.skew == -1:
                out = 1.0 - out
        else:
            out = _table(self.alpha, self.skew).cdf(z)
        return out if out.ndim else float(out)

    def tail_cdf(self, x):
        """P(U >= x) (the law is continuous)."""
        return 1.0 - self.cdf(x) if np.ndim(x) == 0 else 1.0 - np.asarray(self.cdf(x))

    def tail_constants(self) -> tuple[float, float]:
        """(c_plus, c_minus) with P(U > x) ~ c_plus x**-alpha, P(U < -x) ~ c_minus x**-alpha."""
        c = tail_constant(self.alpha) * self.scale ** self.alpha
        return c * (1 + self.skew) / 2, c * (1 - self.skew) / 2

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "skew": self.skew, "scale": self.scale,
                "ks": self.ks}


def tail_constant(alpha: float) -> float:
    """C_alpha with P(|U| > x) ~ C_alpha scale**alpha x**-alpha."""
    if alpha == 1:
        return 2 / math.pi
    return 1.0 / (special.gamma(1 - alpha) * math.cos(math.pi * alpha / 2))


def _levy_cdf(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.zeros_like(z)
    pos = z > 0
    out[pos] = special.erfc(np.sqrt(1.0 / (2.0 * z[pos])))
    return out


def cms_transform(alpha: float, skew: float, u1, u2):
    """Chambers-Mallows-Stuck map of two unit uniforms to a unit-scale draw."""
    v = np.pi * (np.asarray(u1) - 0.5)
    w = -np.log(u2)
    if alpha == 1:
        return np.tan(v)
    zeta = skew * math.tan(math.pi * alpha / 2)
    b = math.atan(zeta) / alpha
    s = (1 + zeta * zeta) ** (1 / (2 * alpha))
    a = alpha * (v + b)
    return (s * np.sin(a) / np.cos(v) ** (1 / alpha)
            * (np.cos(v - a) / w) ** ((1 - alpha) / alpha))


def sample_stable(law: StableLaw, stream: Stream, size: int | None = None):
    """Exact draws; each draw consumes two consecutive stream positions."""
    n = 1 if size is None else int(size)
    u = stream.uniform(2 * n)
    x = law.scale * cms_transform(law.alpha, law.skew, u[0::2], u[1::2])
    return float(x[0]) if size is None else x


# -- tables ---------------------------------------------------------------------

class CdfTable:
    """Piecewise-linear distribution function with power-law extrapolation."""

    def __init__(self, alpha: float, skew: float, x: np.ndarray, cdf: np.ndarray):
        self.alpha, self.skew = alpha, skew
        self.x = np.asarray(x, dtype=np.float64)
        self.F = np.asarray(cdf, dtype=np.float64)

    def cdf(self, z):
        shape = np.shape(z)
        z = np.atleast_1d(np.asarray(z, dtype=np.float64))
        out = np.interp(z, self.x, self.F)
        lo, hi = z < self.x[0], z > self.x[-1]
        if lo.any():
            out[lo] = self._extrapolate(-z[lo], -self.x[0], self.F[0], heavy=self.skew < 1)
        if hi.any():
            t = self._extrapolate(z[hi], self.x[-1], 1.0 - self.F[-1], heavy=self.skew > -1)
            out[hi] = 1.0 - t
        return out.reshape(shape)

    def _extrapolate(self, z, z_end, tail_end, heavy):
        # z > z_end on the outer side of the table
        if z_end <= 0:
            return np.zeros_like(z)
        if heavy:
            return tail_end * (z / z_end) ** (-self.alpha)
        if self.alpha <= 1:
            return np.zeros_like(z)
        q = self.alpha / (self.alpha - 1)
        return tail_end * np.exp(-((z / z_end) ** q - 1.0))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "cdf"])
            for a, b in zip(self.x, self.F):
                w.writerow([repr(float(a)), repr(float(b))])

    @classmethod
    def from_csv(cls, alpha, skew, path) -> "CdfTable":
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        return cls(alpha, skew, data[:, 0], data[:, 1])


def _levels() -> np.ndarray:
    tail = np.geomspace(1e-6, 0.02, 150, endpoint=False)
    mid = np.linspace(0.02, 0.98, 481)
    return np.concatenate([tail, mid, 1.0 - tail[::-1]])


def build_table(alpha: float, skew: float, draws: int = CACHE_DRAWS,
                seed: int = TABLE_SEED, chunk: int = 10 ** 6) -> CdfTable:
    """Count ``draws`` unit-scale sampler draws on a quantile-spaced grid."""
    law = StableLaw(alpha, skew)
    pilot = sample_stable(law, Stream.derive(seed, 0), min(draws, 2 * 10 ** 6))
    grid = np.unique(np.quantile(pilot, _levels()))
    counts = np.zeros(grid.size + 1, dtype=np.int64)
    stream = Stream.derive(seed, 1)
    done = 0
    while done < draws:
        n = min(chunk, draws - done)
        x = sample_stable(law, stream, n)
        counts += np.bincount(np.searchsorted(grid, x, side="right"),
                              minlength=grid.size + 1)
        done += n
    cdf = np.cumsum(counts)[:-1] / draws
    return CdfTable(alpha, skew, grid, cdf)


def table_path(alpha: float, skew: float) -> Path:
    return TABLE_DIR / f"stable_a{alpha:g}_s{skew:+g}.csv"


_tables: dict[tuple[float, float], CdfTable] = {}
_lock = threading.Lock()


def _table(alpha: float, skew: float) -> CdfTable:
    key = (float(alpha), float(skew))
    tab = _tables.get(key)
    if tab is not None:
        return tab
    with _lock:
        tab = _tables.get(key)
        if tab is None:
            path = table_path(*key)
            if path.exists():
                tab = CdfTable.from_csv(*key, path)
            else:
                tab = build_table(*key)
            _tables[key] = tab
    return tab


def shipped_tables() -> list[tuple[float, float]]:
    out = []
    for p in sorted(TABLE_DIR.glob("stable_a*_s*.csv")):
        a, s = p.stem[len("stable_a"):].split("_s")
        out.append((float(a), float(s)))
    return out


# -- calibration --------------------------------------------------------------

def ks_distance(samples, cdf) -> float:
    """Kolmogorov-Smirnov distance between a sample and a distribution function."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.size
    F = np.asarray(cdf(x), dtype=np.float64)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def analytic_scale(law, norming) -> float:
    """Scale of the limit of S_k/b(k) implied by the tail constants (first guess)."""
    alpha = law.alpha
    big = 1e12
    bk = norming.b(big)
    c = big * float(law.abs_tail(bk))
    return (c / tail_constant(alpha)) ** (1 / alpha)


def calibrate(law, norming, k: int = 10 ** 5, reps: int = 10 ** 5, seed: int = 1,
              workers: int = 1, sums=None, target: float = 0.02,
              reject: float = 0.05) -> StableLaw:
    """Fit the scale of the stable limit of S_k/b(k) by minimising the KS distance.

    ``sums`` may carry precomputed draws of S_k (k and reps are then ignored
    for sampling).  The returned law records the achieved distance in ``ks``.
    """
    from .laws import sample_sums
    if getattr(law, "alpha", None) is None:
        raise DomainError("calibration needs a heavy-tailed summand law")
    skew = law.p_plus - law.p_minus
    if law.alpha == 1:
        skew = 0.0
    if sums is None:
        sums = sample_sums(law, k, reps, seed, workers=workers)
    z = np.sort(np.asarray(sums) / norming.b(k))
    base = StableLaw(law.alpha, skew)

    def objective(log_scale):
        return ks_distance(z, replace(base, scale=math.exp(log_scale)).cdf)

    s0 = math.log(analytic_scale(law, norming))
    res = optimize.minimize_scalar(objective, bounds=(s0 - 3.0, s0 + 3.0),
                                   method="bounded", options={"xatol": 1e-4})
    scale, ks = math.exp(res.x), float(res.fun)
    if ks >= reject:
        raise CalibrationFailure(f"best KS distance {ks:.4f} (scale {scale:.4g}) "
                                 f"exceeds {reject}")
    return StableLaw(law.alpha, skew, scale, ks)
