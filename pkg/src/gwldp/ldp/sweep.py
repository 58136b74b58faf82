"""Sweeps of a_n P(S_{Z_n}/Z_n >= eps_n) over n against a regime prediction.

Generation ``n`` of a sweep with master seed ``seed`` uses the streams
``(seed, n * STREAM_STRIDE + r)``, so rows are independent of each other and
of the worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from .estimate import DEFAULT_BUDGET, MIN_REPLICATES, estimate_from_pairs, simulate_pairs
from .regime import Prediction, RegimePrediction

STREAM_STRIDE = 1 << 40
CSV_COLUMNS = ["n", "a_n", "p_hat", "stderr", "normalized", "predicted_lo", "predicted_hi",
               "z", "flags"]


@dataclass(frozen=True)
class SweepRow:
    n: int
    a_n: float
    p_hat: float
    stderr: float
    normalized: float
    predicted_lo: float
    predicted_hi: float
    z: float
    flags: tuple = ()
    replicates: int = 0
    discard_rate: float = 0.0

    def csv_row(self) -> list:
        return [self.n, repr(self.a_n), repr(self.p_hat), repr(self.stderr),
                repr(self.normalized), repr(self.predicted_lo), repr(self.predicted_hi),
                repr(self.z), ";".join(self.flags)]

    def to_dict(self) -> dict:
        return {"n": self.n, "a_n": self.a_n, "p_hat": self.p_hat, "stderr": self.stderr,
                "normalized": self.normalized, "predicted_lo": self.predicted_lo,
                "predicted_hi": self.predicted_hi, "z": self.z, "flags": list(self.flags),
                "replicates": self.replicates, "discard_rate": self.discard_rate}


@dataclass(frozen=True)
class Trend:
    """Weighted least-squares slope of log(a_n p_hat) against n with a 95% CI."""

    slope: float
    stderr: float
    ci: tuple[float, float]
    points: int

    @property
    def contains_zero(self) -> bool:
        return self.ci[0] <= 0.0 <= self.ci[1]

    def to_dict(self) -> dict:
        return {"slope": self.slope, "stderr": self.stderr, "ci": list(self.ci),
                "points": self.points, "contains_zero": self.contains_zero}


@dataclass
class SweepTable:
    rows: list
    trend: Trend | None
    prediction: dict
    seed: int
    config: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(CSV_COLUMNS)
        for r in self.rows:
            wr.writerow(r.csv_row())
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"config": self.config, "seed": self.seed, "prediction": self.prediction,
                "trend": self.trend.to_dict() if self.trend else None,
                "rows": [r.to_dict() for r in self.rows], "extra": _jsonable(self.extra)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_default)


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _jsonable(d):
    return json.loads(json.dumps(d, default=_default))


def log_trend(ns, values, stderrs, level: float = 1.96) -> Trend | None:
    """Slope of log(values) vs n, weights from the delta-method variance (se/value)**2."""
    ns, v, se = (np.asarray(a, dtype=np.float64) for a in (ns, values, stderrs))
    ok = (v > 0) & (se > 0)
    if np.count_nonzero(ok) < 2:
        return None
    x, y, w = ns[ok], np.log(v[ok]), (v[ok] / se[ok]) ** 2
    xb = np.sum(w * x) / np.sum(w)
    sxx = np.sum(w * (x - xb) ** 2)
    slope = float(np.sum(w * (x - xb) * y) / sxx)
    s = float(math.sqrt(1.0 / sxx))
    return Trend(slope, s, (slope - level * s, slope + level * s), int(x.size))


def z_score(normalized: float, se: float, pred: Prediction | None) -> float:
    """Distance from the predicted value (or interval) in combined standard errors."""
    if pred is None:
        return math.nan
    pse = float(pred.details.get("stderr", 0.0) or 0.0)
    tot = math.hypot(se, pse)
    if pred.kind == "value":
        d = normalized - pred.lo
    elif normalized < pred.lo:
        d = normalized - pred.lo
    elif normalized > pred.hi:
        d = normalized - pred.hi
    else:
        return 0.0
    return d / tot if tot > 0 else (0.0 if d == 0 else math.copysign(math.inf, d))


def estimate_row(off, law, n: int, eps: float, replicates: int, seed: int,
                 workers: int = 1, backend=None, budget: int = DEFAULT_BUDGET,
                 side: str = "upper", ratio: bool = False):
    """MCEstimate for one generation on the generation's own streams."""
    t0 = time.perf_counter()
    z, s = simulate_pairs(off, law, n, replicates, seed, n * STREAM_STRIDE, workers,
                          backend, budget, ratio)
    return estimate_from_pairs(z, s, [eps], seed, time.perf_counter() - t0, side)[0], (z, s)


def make_row(n: int, a_n: float, est, pred: Prediction | None, extra_flags=()) -> SweepRow:
    norm = a_n * est.p_hat
    lo, hi = (pred.lo, pred.hi) if pred else (math.nan, math.nan)
    flags = list(est.flags) + list(extra_flags)
    if pred is not None and pred.kind == "heuristic":
        flags.append("heuristic")
    return SweepRow(n, a_n, est.p_hat, est.stderr, norm, lo, hi,
                    z_score(norm, a_n * est.stderr, pred), tuple(flags), est.replicates,
                    est.discard_rate)


def run_sweep(pred: RegimePrediction, n_range, replicates: int, seed: int = 0,
              workers: int = 1, backend=None, budget: int = DEFAULT_BUDGET,
              config: dict | None = None) -> SweepTable:
    """Estimate P(S_{Z_n}/Z_n >= eps_n) for each n and compare a_n p_hat with the prediction."""
    if pred.theorem_id == "None":
        raise DomainError("a sweep needs a classified regime")
    if replicates < MIN_REPLICATES:
        raise DomainError(f"a sweep needs at least {MIN_REPLICATES} replicates")
    rows = []
    for n in sorted(int(n) for n in n_range):
        if n < 1:
            raise DomainError("sweep generations must be >= 1")
        est, _ = estimate_row(pred.off, pred.law, n, pred.eps_n(n), replicates, seed,
                              workers, backend, budget)
        rows.append(make_row(n, pred.a_n(n), est, pred.prediction,
                             pred.extra.get("flags", ())))
    trend = log_trend([r.n for r in rows], [r.normalized for r in rows],
                      [r.a_n * r.stderr for r in rows])
    return SweepTable(rows, trend, pred.to_dict(), seed, dict(config or {}))
