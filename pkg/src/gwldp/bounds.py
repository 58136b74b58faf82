"""Explicit Fuk-Nagaev type upper bounds on P(S_k >= x) and their Monte Carlo check.

Bound kinds
-----------
na3b        k P(X >= x/r) + (e k A(t; 0, x/r) / (r**(1-t) x**t))**r,  0 < t <= 1
na16        k P(X > y) + (e**2 k A_t / (x y**(t-1)))**(x / (2y)),
            1 <= t <= 2, valid when y**t >= 4 k A_t and x > y
prokhorov   C k (P(|X| >= x) + mu2(x)/x**2 + |mu1(x)|/x), C fitted by Monte Carlo
na2special  k P(X > x) + e k mu2(x)/x**2, for laws with mu1 = 0

``A(t; 0, y) = E[X**t; 0 <= X <= y]`` and ``A_t = E[X**t; X >= 0]``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .laws import sample_sums

KINDS = ("na3b", "na16", "prokhorov", "na2special")
NA16_T = (1.0, 1.2, 1.4, 1.6, 1.8)


@dataclass(frozen=True)
class BoundReport:
    kind: str
    value: float          # min(1, raw) when valid
    raw: float
    valid: bool
    params: dict = field(default_factory=dict)
    note: str = ""

    @property
    def clamped(self) -> bool:
        return self.valid and self.raw > 1.0


def _report(kind, raw, params, valid=True, note=""):
    raw = float(raw)
    if not valid:
        return BoundReport(kind, math.inf, raw, False, params, note)
    return BoundReport(kind, min(1.0, raw), raw, True, params, note)


def _check_kx(k, x):
    if k < 1:
        raise DomainError("k must be >= 1")
    if not x > 0:
        raise DomainError("x must be positive")


def bound_na3b(law, k: int, x: float, r: float = 2.0, t: float = 1.0) -> BoundReport:
    """k P(X >= x/r) + (e k A(t; 0, x/r) / (r**(1-t) x**t))**r."""
    _check_kx(k, x)
    if not 0 < t <= 1:
        raise DomainError("na3b needs 0 < t <= 1")
    if not r > 0:
        raise DomainError("na3b needs r > 0")
    y = x / r
    jump = k * law.tail_right(y)
    A = law.A_plus(t, y)
    base = math.e * k * A / (r ** (1 - t) * x ** t)
    params = {"k": k, "x": x, "r": r, "t": t}
    return _report("na3b", jump + base ** r, params)


def bound_na16(law, k: int, x: float, y: float | None = None, t: float = 1.0) -> BoundReport:
    """k P(X > y) + (e**2 k A_t / (x y**(t-1)))**(x/(2y)).

    With ``y=None`` the smallest admissible truncation ``(4 k A_t)**(1/t)``
    is used.  Unmet preconditions give ``valid=False``.
    """
    _check_kx(k, x)
    params = {"k": k, "x": x, "t": t}
    if not 1 <= t <= 2:
        return _report("na16", math.inf, params, False, "needs 1 <= t <= 2")
    A = law.A_t_plus(t)
    if not math.isfinite(A):
        return _report("na16", math.inf, params, False, "A_t is infinite (t >= beta)")
    if y is None:
        y = (4 * k * A) ** (1 / t)
    params["y"] = y
    if y ** t < 4 * k * A * (1 - 1e-12):
        return _report("na16", math.inf, params, False, "y**t < 4 k A_t")
    if not x > y:
        return _report("na16", math.inf, params, False, "needs x > y")
    base = math.e ** 2 * k * A / (x * y ** (t - 1))
    return _report("na16", k * law.tail_right(y) + base ** (x / (2 * y)), params)


def best_na16(law, k: int, x: float, ts=NA16_T) -> BoundReport:
    """Smallest valid na16 bound over a set of exponents t (each with minimal y)."""
    reps = [bound_na16(law, k, x, None, t) for t in ts]
    valid = [r for r in reps if r.valid]
    return min(valid, key=lambda r: r.raw) if valid else reps[0]


def prokhorov_shape(law, k: int, x: float) -> float:
    """k (P(|X| >= x) + mu2(x)/x**2 + |mu1(x)|/x)."""
    _check_kx(k, x)
    return k * (law.abs_tail(x) + law.mu2(x) / x ** 2 + abs(law.mu1(x)) / x)


def bound_prokhorov(law, k: int, x: float, C: float | None = None) -> BoundReport:
    """C times the shape value; without C the report carries the shape only (invalid)."""
    shape = prokhorov_shape(law, k, x)
    params = {"k": k, "x": x, "shape": shape, "C": C}
    if C is None:
        return _report("prokhorov", shape, params, False, "constant not fitted")
    return _report("prokhorov", C * shape, params)


def bound_na2_special(law, k: int, x: float) -> BoundReport:
    """k P(X > x) + e k mu2(x)/x**2, for laws with mu(1; x) = 0 for all x."""
    _check_kx(k, x)
    params = {"k": k, "x": x}
    if not getattr(law, "symmetric", False):
        return _report("na2special", math.inf, params, False, "needs mu(1; x) = 0")
    return _report("na2special", k * law.tail_right(x) + math.e * k * law.mu2(x) / x ** 2,
                   params)


def envelope(law, k: int, x: float) -> float:
    """Smallest valid na3b / na16 bound over a few parameter choices."""
    out = 1.0
    for r in (1.0, 2.0, 3.0, 5.0):
        for t in (0.5, 1.0):
            out = min(out, bound_na3b(law, k, x, r, t).raw)
    rep = best_na16(law, k, x)
    return min(out, rep.raw) if rep.valid else out


# -- Monte Carlo verification ---------------------------------------------------

@dataclass(frozen=True)
class ProkhorovFit:
    """Fitted constant C = max over the grid of (p_hat + 2 se) / shape."""

    C: float
    rows: tuple  # (k, x, p_hat, stderr, shape)
    reps: int
    seed: int


def _tail_freq(sums: np.ndarray, x: float) -> tuple[float, float]:
    p = float(np.count_nonzero(sums >= x)) / sums.size
    return p, math.sqrt(p * (1 - p) / sums.size)


def fit_prokhorov_constant(law, ks=(5, 30, 300, 3000), ratios=(0.5, 1.5, 3.0, 7.0, 15.0),
                           reps: int = 10 ** 5, seed: int = 0x9F17, workers: int = 1,
                           backend=None) -> ProkhorovFit:
    ks = sorted(int(k) for k in ks)
    sums = sample_sums(law, ks[-1], reps, seed, checkpoints=ks, workers=workers,
                       backend=backend)
    rows, best = [], 0.0
    for j, k in enumerate(ks):
        for a in ratios:
            x = a * k
            p, se = _tail_freq(sums[:, j], x)
            shape = prokhorov_shape(law, k, x)
            rows.append((k, x, p, se, shape))
            best = max(best, (p + 2 * se) / shape)
    return ProkhorovFit(best, tuple(rows), reps, seed)


def bounds_for_cell(law, k: int, x: float, prokhorov_C: float | None) -> list[BoundReport]:
    return [bound_na3b(law, k, x, 2.0, 1.0), best_na16(law, k, x),
            bound_prokhorov(law, k, x, prokhorov_C), bound_na2_special(law, k, x)]


@dataclass(frozen=True)
class VerificationRow:
    law_id: str
    kind: str
    k: int
    x: float
    bound: float
    empirical: float
    stderr: float
    valid: bool
    passed: bool

    def csv_row(self) -> list:
        return [self.law_id, self.kind, self.k, repr(self.x), repr(self.bound),
                repr(self.empirical), repr(self.stderr),
                ("true" if self.passed else "false") if self.valid else "invalid"]


CSV_COLUMNS = ["law_id", "kind", "k", "x", "bound", "empirical", "stderr", "pass"]


def verify_bounds(laws: dict, ks=(10, 100, 1000, 10000), ratios=(1.0, 2.0, 5.0, 10.0),
                  reps: int = 10 ** 6, seed: int = 0xB0B, workers: int = 1,
                  prokhorov_fits: dict | None = None, backend=None,
                  z: float = 4.0) -> list[VerificationRow]:
    """Empirical P(S_k >= x) against every bound kind on the (law, k, x) grid.

    One walk per replicate provides S_k at every k of the grid.
    """
    ks = sorted(int(k) for k in ks)
    fits = dict(prokhorov_fits or {})
    rows = []
    for i, (law_id, law) in enumerate(laws.items()):
        if law_id not in fits:
            fits[law_id] = fit_prokhorov_constant(law, workers=workers, backend=backend)
        C = fits[law_id].C
        sums = sample_sums(law, ks[-1], reps, seed + i, checkpoints=ks, workers=workers,
                           backend=backend)
        for j, k in enumerate(ks):
            for a in ratios:
                x = a * k
                p, se = _tail_freq(sums[:, j], x)
                for rep in bounds_for_cell(law, k, x, C):
                    ok = rep.valid and p <= rep.raw + z * se
                    rows.append(VerificationRow(law_id, rep.kind, k, x, rep.value, p, se,
                                                rep.valid, ok))
    return rows


def write_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_COLUMNS)
        for r in rows:
            wr.writerow(r.csv_row())
