"""Numerical model of the martingale limit W = lim Z_n / m**n.

* Laplace transform ``phi(lam) = E exp(-lam W)`` from
  ``phi(lam) = lim f_n(exp(-lam / m**n))``, iterated on the complement
  ``u -> 1 - f(1 - u)`` so that small ``1 - phi`` keeps full precision, and
  through ``phi(m lam) = f(phi(lam))`` once ``phi`` itself is small.
* Moments ``E[W**e]`` for ``-gamma < e < 0`` by the Mellin identity
  ``E[W**-s] = Gamma(s)**-1 * int_0^inf lam**(s-1) phi(lam) dlam`` and for
  ``0 <= e <= 1`` from samples of ``W_N = Z_N / m**N``.
* Density ``omega``: Gaussian KDE of ``log W_N`` globally, and near zero a
  local-linear boundary-corrected KDE of ``Y = W**gamma`` (whose density
  ``gamma**-1 u**(1-gamma) omega(u)`` at ``y = u**gamma`` stays bounded).
"""

from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, interpolate, special, stats

from ..errors import DomainError, InsufficientSamples, NonConvergence, QuadratureError
from ..rng import block_generator
from .offspring import OffspringLaw

SAMPLE_BLOCK = 1 << 16
PHI_TOL = 1e-10
PHI_MAX_ITER = 200
_TAG_W = 0x57


def _complement_iterate(off: OffspringLaw, lam: np.ndarray, n: int) -> np.ndarray:
    """1 - f_n(exp(-lam / m**n))."""
    u = -np.expm1(-lam * off.m ** -float(n))
    for _ in range(n):
        u = off.complement_f(u)
    return u


def _laplace(off: OffspringLaw, lam, complement: bool) -> np.ndarray:
    lam = np.atleast_1d(np.asarray(lam, dtype=np.float64))
    if np.any(lam < 0):
        raise DomainError("the Laplace transform needs lam >= 0")
    m = off.m
    out = np.zeros_like(lam) if complement else np.ones_like(lam)
    pos = lam > 0
    if not pos.any():
        return out
    lp = lam[pos]
    # reduce to lam0 <= 1 and push forward with phi(m lam) = f(phi(lam))
    j = np.maximum(0, np.ceil(np.log(lp) / math.log(m))).astype(np.int64)
    lam0 = lp / m ** j.astype(np.float64)
    n = int(min(PHI_MAX_ITER - 5, max(20, math.ceil(24 * math.log(10) / math.log(m)))))
    u1 = _complement_iterate(off, lam0, n)
    u2 = _complement_iterate(off, lam0, n + 5)
    if np.max(np.abs(u2 - u1)) > PHI_TOL:
        raise NonConvergence("Laplace transform iteration did not settle")
    # iterate 1 - phi for the complement, phi itself once it may be tiny
    val = u2 if complement else 1.0 - u2
    step_fn = off.complement_f if complement else off.f
    for step in range(1, int(j.max()) + 1 if j.size else 1):
        sel = j >= step
        val[sel] = step_fn(val[sel])
    out[pos] = val
    return out


def laplace_exact(off: OffspringLaw, lam) -> np.ndarray:
    """phi(lam) by iteration, vectorised; accurate in relative terms for tiny phi."""
    return _laplace(off, lam, False)


def laplace_complement(off: OffspringLaw, lam) -> np.ndarray:
    """1 - phi(lam), accurate in relative terms for tiny lam."""
    return _laplace(off, lam, True)


@dataclass(frozen=True)
class MomentResult:
    value: float
    stderr: float
    method: str


@dataclass(frozen=True)
class Window:
    """Extremes of u**(1-gamma) omega(u) over a window (a finite-window proxy)."""

    inf_est: float
    sup_est: float
    inf_ci: tuple[float, float]
    sup_ci: tuple[float, float]
    u_lo: float
    u_hi: float
    label: str = "heuristic: estimate of a liminf/limsup on a finite window"


@dataclass
class MartingaleLimitModel:
    offspring: OffspringLaw
    N: int = 18
    n_samples: int = 10 ** 6
    seed: int = 0
    lam_range: tuple[float, float] = (1e-6, 1e6)
    grid_points: int = 241
    _samples: np.ndarray | None = field(default=None, repr=False)
    _grid: tuple | None = field(default=None, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def gamma(self) -> float:
        return self.offspring.gamma

    # -- Laplace transform ----------------------------------------------------
    def phi_exact(self, lam):
        out = laplace_exact(self.offspring, lam)
        return out if np.ndim(lam) else float(out[0])

    @property
    def phi_grid(self) -> tuple[np.ndarray, np.ndarray]:
        if self._grid is None:
            with self._lock:
                if self._grid is None:
                    lam = np.geomspace(*self.lam_range, self.grid_points)
                    self._grid = (lam, laplace_exact(self.offspring, lam))
        return self._grid

    def laplace_W(self, lam):
        """phi(lam), PCHIP-interpolated in log(lam) on the cached grid."""
        lam = np.asarray(lam, dtype=np.float64)
        flat = np.atleast_1d(lam)
        glam, gphi = self.phi_grid
        out = np.empty_like(flat)
        inside = (flat >= glam[0]) & (flat <= glam[-1])
        if inside.any():
            spline = interpolate.PchipInterpolator(np.log(glam), np.log(gphi))
            out[inside] = np.exp(spline(np.log(flat[inside])))
        if (~inside).any():
            out[~inside] = laplace_exact(self.offspring, flat[~inside])
        return out if lam.ndim else float(out[0])

    # -- moments -----------------------------------------------------------------
    def moment_mellin(self, e: float) -> float:
        """E[W**e] for -gamma < e < 1, e != 0, from the Laplace transform."""
        g = self.gamma
        if not -g < e < 1 or e == 0:
            raise DomainError(f"Mellin moments need -gamma < e < 1, e != 0 (gamma={g:.4g})")
        off = self.offspring
        if e < 0:
            s = -e

            def integrand(x):
                return np.exp(s * x) * laplace_exact(off, np.exp(x))
            scale = 1.0 / special.gamma(s)
            lo, hi = -70.0 / s, 70.0 / max(g - s, 1e-3)
        else:
            s = e

            def integrand(x):
                return np.exp(-s * x) * laplace_complement(off, np.exp(x))
            scale = s / special.gamma(1 - s)
            lo, hi = -70.0 / (1 - s), 70.0 / s
        lo, hi = max(lo, -700.0), min(hi, 700.0)
        # trapezoid on a smooth integrand decaying at both ends: compare two step sizes
        x = np.linspace(lo, hi, 16385)
        fx = integrand(x)
        fine = integrate.trapezoid(fx, x)
        coarse = integrate.trapezoid(fx[::2], x[::2])
        total, err = fine, abs(fine - coarse)
        if err > 1e-6 * abs(total):
            raise QuadratureError(f"Mellin quadrature error {err:.2g} for e={e}")
        return scale * total

    def moment_samples(self, e: float) -> MomentResult:
        w = self.samples
        x = w ** e
        return MomentResult(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)), "samples")

    def moment_W(self, e: float) -> MomentResult:
        """E[W**e] for -gamma < e <= 1."""
        g = self.gamma
        if not -g < e <= 1:
            raise DomainError(f"moment exponent must lie in (-gamma, 1] (gamma={g:.4g})")
        if e == 0 or e == 1:
            # E[W] = 1 whenever E[Z_1 log Z_1] < oo
            return MomentResult(1.0, 0.0, "exact")
        return MomentResult(self.moment_mellin(e), 0.0, "mellin")

    def I_t(self, t: float) -> MomentResult:
        """I_t = E[W**(1-t)]."""
        return self.moment_W(1.0 - t)

    # -- samples -------------------------------------------------------------------
    @property
    def samples(self) -> np.ndarray:
        if self._samples is None:
            with self._lock:
                if self._samples is None:
                    self._samples = sample_W(self.offspring, self.N, self.n_samples, self.seed)
        return self._samples

    def set_samples(self, w: np.ndarray) -> None:
        self._samples = np.asarray(w, dtype=np.float64)

    # -- densities ---------------------------------------------------------------------
    def log_kde_bandwidth(self) -> float:
        lw = np.log(self.samples)
        return 1.06 * min(lw.std(), stats.iqr(lw) / 1.34) * lw.size ** -0.2

    def omega(self, u, bandwidth: float | None = None):
        """Global density estimate of W (Gaussian KDE on log W)."""
        u = np.atleast_1d(np.asarray(u, dtype=np.float64))
        lw = np.sort(np.log(self.samples))
        h = bandwidth or self.log_kde_bandwidth()
        out = np.empty_like(u)
        for i, x in enumerate(np.log(u)):
            lo, hi = np.searchsorted(lw, [x - 8 * h, x + 8 * h])
            z = (x - lw[lo:hi]) / h
            out[i] = np.exp(-0.5 * z * z).sum() / (lw.size * h * math.sqrt(2 * math.pi)) / u[i]
        return out

    def survival_kde(self, x, bandwidth: float | None = None, weights=None):
        """int_x^inf omega under the log-W KDE."""
        lw = np.log(self.samples)
        h = bandwidth or self.log_kde_bandwidth()
        w = np.ones_like(lw) if weights is None else weights
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        return np.array([float(np.sum(w * special.ndtr((lw - math.log(v)) / h)) / w.sum())
                         for v in x])

    def omega_near_zero(self, u, weights=None, bandwidth: float | None = None,
                        min_local: int = 1000):
        """u**(1-gamma) omega(u) by a boundary-corrected local-linear KDE of W**gamma."""
        g = self.gamma
        u = np.atleast_1d(np.asarray(u, dtype=np.float64))
        y_all = np.sort(self.samples ** g)
        n_total = y_all.size
        y_max = u.max() ** g
        cut = np.searchsorted(y_all, 3 * y_max)
        local = y_all[:cut]
        if local.size < min_local:
            raise InsufficientSamples(f"only {local.size} samples near zero")
        w = np.ones(local.size) if weights is None else weights[:cut]
        h = bandwidth or _silverman(local)
        out = np.empty_like(u)
        for i, y in enumerate(u ** g):
            p = y / h
            t = (y - local) / h
            k = np.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)
            a0 = special.ndtr(p)
            a1 = -math.exp(-0.5 * p * p) / math.sqrt(2 * math.pi)
            a2 = a0 + p * a1
            dens = np.sum(w * (a2 - a1 * t) * k) / ((a0 * a2 - a1 * a1) * n_total * h)
            out[i] = g * dens
        return out, h

    def omega_window(self, u_lo: float, u_hi: float, points: int = 25,
                     n_boot: int = 40, level: float = 0.95, seed: int = 1) -> Window:
        """Window extremes of u**(1-gamma) omega(u) with bootstrap intervals."""
        if not 0 < u_lo < u_hi <= 0.5:
            raise DomainError("omega_window needs 0 < u_lo < u_hi <= 0.5")
        if self.samples.size < 10 ** 5:
            raise InsufficientSamples("omega_window needs at least 1e5 samples of W")
        grid = np.geomspace(u_lo, u_hi, points)
        est, h = self.omega_near_zero(grid)
        rng = np.random.Generator(np.random.Philox(key=seed))
        order = np.argsort(self.samples ** self.gamma)
        lows, highs = [], []
        for _ in range(n_boot):
            wts = rng.poisson(1.0, self.samples.size).astype(np.float64)[order]
            b, _ = self.omega_near_zero(grid, weights=wts, bandwidth=h)
            lows.append(b.min())
            highs.append(b.max())
        q = [(1 - level) / 2, (1 + level) / 2]
        return Window(float(est.min()), float(est.max()),
                      tuple(np.quantile(lows, q)), tuple(np.quantile(highs, q)), u_lo, u_hi)

    # -- persistence ------------------------------------------------------------------
    def save_samples(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["index", "value"])
            for i, v in enumerate(self.samples):
                wr.writerow([i, repr(float(v))])

    def load_samples(self, path) -> None:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        self.set_samples(data[:, 1])

    def save_phi_grid(self, path) -> None:
        lam, phi = self.phi_grid
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["lambda", "phi"])
            for a, b in zip(lam, phi):
                wr.writerow([repr(float(a)), repr(float(b))])

    def load_phi_grid(self, path) -> None:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        self._grid = (data[:, 0], data[:, 1])


def _silverman(x: np.ndarray) -> float:
    s = min(x.std(ddof=1), stats.iqr(x) / 1.34)
    return 1.06 * s * x.size ** -0.2


def sample_Zn_many(off: OffspringLaw, n: int, count: int, seed: int, tag: int = _TAG_W,
                   block: int = SAMPLE_BLOCK) -> np.ndarray:
    """``count`` independent copies of Z_n by aggregated per-generation sampling."""
    out = np.empty(count, dtype=np.int64)
    for b, lo in enumerate(range(0, count, block)):
        size = min(block, count - lo)
        gen = block_generator(seed, tag, b)
        z = np.ones(size, dtype=np.int64)
        for _ in range(n):
            z = off.next_generation(z, gen)
        out[lo:lo + size] = z
    return out


def sample_W(off: OffspringLaw, N: int, count: int, seed: int) -> np.ndarray:
    """Draws of W_N = Z_N / m**N."""
    return sample_Zn_many(off, N, count, seed) / off.m ** N
