"""Regime classification and limit predictions for P(S_{Z_n}/Z_n >= eps_n).

``classify_regime`` checks the hypotheses of every rate theorem in a fixed
order, records each check with its numeric evidence, and returns the single
theorem that applies together with its normalizer ``a_n`` and predicted
limit of ``a_n P(S_{Z_n}/Z_n >= eps_n)``.

Theorem identifiers
-------------------
Main2, Main3_i, Main3_iv   a_n = m**((beta-1)n) eps_n**beta / L(eps_n m**n), value I_beta
Main3_ii, Main3_iii        a_n = l_n**-gamma m**(gamma n), window bounds (heuristic)
Cmain2, Cmain3_i, Cmain3_iv
                           a_n = eps_n**beta / sum_{k<=m**n} L(eps_n k)/(k m**(gamma n)),
                           window bounds d*[inf, sup] u**(1-gamma) omega(u) (heuristic)
Cmain3_ii, Cmain3_iii      as Main3_ii / Main3_iii with the Cmain3 additive term
SCmain3                    a_n = m**(gamma n), value sum_k q_k P(S_k >= eps k)
MainX                      a_n = 1, value int P(U >= u**((alpha-1)/alpha) x) omega(u) du
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..bounds import envelope
from ..errors import DomainError, Unclassifiable
from ..gw.martingale import MartingaleLimitModel
from ..gw.offspring import OffspringLaw
from ..gw.series import q_vector
from ..norming import (Growth, NormingSequence, ThresholdSequence, harmonic_growth,
                       harmonic_sum, l_growth, l_n, log_chi_n, pi_n, sv_growth)
from ..stable import StableLaw, analytic_scale
from .estimate import weighted_tail_sum

THEOREMS = ("Main2", "Main3_i", "Main3_ii", "Main3_iii", "Main3_iv", "Cmain2",
            "Cmain3_i", "Cmain3_ii", "Cmain3_iii", "Cmain3_iv", "SCmain3", "MainX", "None")
HEURISTIC = {"Main3_ii", "Main3_iii", "Cmain2", "Cmain3_i", "Cmain3_ii", "Cmain3_iii",
             "Cmain3_iv"}
TIE_TOL = 1e-9
FORMULAS = {
    "rate": "m^((beta-1) n) * eps_n^beta / L(eps_n m^n)",
    "small_value": "l_n^(-gamma) * m^(gamma n)",
    "critical": "eps_n^beta / sum_{1<=k<=m^n} L(eps_n k) / (k m^(gamma n))",
    "schroder": "m^(gamma n)",
    "clt": "1",
}
NORMALIZER = {"Main2": "rate", "Main3_i": "rate", "Main3_iv": "rate",
              "Main3_ii": "small_value", "Main3_iii": "small_value",
              "Cmain3_ii": "small_value", "Cmain3_iii": "small_value",
              "Cmain2": "critical", "Cmain3_i": "critical", "Cmain3_iv": "critical",
              "SCmain3": "schroder", "MainX": "clt"}


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    evidence: str


@dataclass(frozen=True)
class Prediction:
    """``kind`` is 'value', 'bounds' or 'heuristic' (window-estimated bounds)."""

    kind: str
    lo: float
    hi: float
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "lo", float(self.lo))
        object.__setattr__(self, "hi", float(self.hi))

    @property
    def value(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi,
                "details": _plain(self.details)}


def _plain(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, np.integer)):
            v = v.item()
        elif isinstance(v, tuple):
            v = [float(x) for x in v]
        elif isinstance(v, dict):
            v = _plain(v)
        out[k] = v
    return out


@dataclass
class RegimePrediction:
    theorem_id: str
    checks: list
    off: OffspringLaw
    law: object
    nseq: NormingSequence
    eps: ThresholdSequence
    L: object
    prediction: Prediction | None = None
    extra: dict = field(default_factory=dict)

    @property
    def heuristic(self) -> bool:
        return self.theorem_id in HEURISTIC

    @property
    def normalizer_formula(self) -> str:
        return FORMULAS[NORMALIZER[self.theorem_id]] if self.theorem_id != "None" else ""

    def eps_n(self, n: int) -> float:
        return self.eps(n, self.off.m, self.nseq)

    def a_n(self, n: int) -> float:
        kind = NORMALIZER.get(self.theorem_id)
        if kind is None:
            raise DomainError("no normalizer without a theorem")
        m, g, beta = self.off.m, self.off.gamma, self.law.beta
        e = self.eps_n(n)
        if kind == "rate":
            return math.exp((beta - 1) * n * math.log(m) + beta * math.log(e)
                            - math.log(self.L(e * m ** n)))
        if kind == "small_value":
            return math.exp(-g * math.log(l_n(self.nseq, self.eps, m, n)) + g * n * math.log(m))
        if kind == "critical":
            return e ** beta / (harmonic_sum(self.L, e, m ** n) / m ** (g * n))
        if kind == "schroder":
            return m ** (g * n)
        return 1.0

    def to_dict(self) -> dict:
        return {"theorem_id": self.theorem_id, "normalizer": self.normalizer_formula,
                "heuristic": self.heuristic,
                "predicted": self.prediction.to_dict() if self.prediction else None,
                "assumptions": [{"name": c.name, "passed": c.passed, "evidence": c.evidence}
                                for c in self.checks],
                "extra": _plain(self.extra)}


# -- hypothesis checks ---------------------------------------------------------------

def _sign(x: float) -> int:
    return 0 if abs(x) <= TIE_TOL else (1 if x > 0 else -1)


def _direction_name(d: int) -> str:
    return {1: "+inf", 0: "finite positive limit", -1: "0"}[d]


def _numeric_trend(fn, n_max: int) -> tuple[float, list]:
    """Slope of log fn(n) over the upper half of 2..n_max, and the values."""
    ns = list(range(max(2, n_max // 2), n_max + 1))
    vals = [fn(n) for n in ns]
    slope = float(np.polyfit(ns, vals, 1)[0]) if len(ns) > 1 else 0.0
    return slope, list(zip(ns, vals))


def _confirm(symbolic: int, slope: float, values: list) -> bool:
    """Numeric log-trend agrees with the symbolic limit direction."""
    if symbolic == 0:
        return abs(values[-1][1] - values[0][1]) <= 0.1
    return slope * symbolic > -1e-3


def chi_growth(nseq, eps, m, gamma, beta, L) -> Growth:
    """Symbolic growth of chi_n = b(l_n)**gamma / ((eps_n m**n)**(gamma-beta) L(eps_n m**n) m**n)."""
    eg = eps.growth(nseq)
    lg = l_growth(nseq, eg ** -1)
    bg = nseq.b_growth(lg)
    em = eg * Growth(a=1.0)
    return bg ** gamma / (em ** (gamma - beta) * sv_growth(L, em) * Growth(a=1.0))


def pi_growth(nseq, eps, m, gamma, beta, L) -> Growth:
    """Symbolic growth of pi_n = l_n**gamma eps_n**beta / sum_{k<=m**n} L(eps_n k)/k."""
    eg = eps.growth(nseq)
    lg = l_growth(nseq, eg ** -1)
    return lg ** gamma * eg ** beta / harmonic_growth(L, eg, m)


def left_tail_ratio(law, nseq: NormingSequence, ns=(1e4, 1e6, 1e8)) -> list:
    """F(-b(n)/(log n)**(1/alpha)) / (log n F(-b(n))) on a grid of n."""
    out = []
    for n in ns:
        y, ln = nseq.b(n), math.log(n)
        out.append((n, float(law.tail_left(y / ln ** (1 / law.alpha)))
                    / (ln * float(law.tail_left(y)))))
    return out


def _left_tail_ok(vals: list) -> bool:
    """Numeric proxy for limsup <= 1: below 1 at the largest n, or decreasing towards it."""
    r = [v for _, v in vals]
    return r[-1] <= 1 + 1e-9 or all(a >= b for a, b in zip(r, r[1:]))


def _law_L(law):
    spec = getattr(law, "L_spec", None)
    if spec is None:
        raise DomainError("the summand law does not expose its slowly varying factor")
    return spec


def classify_regime(off: OffspringLaw, law, nseq: NormingSequence | None,
                    eps: ThresholdSequence, n_max: int = 12, evaluate: bool = True,
                    model: MartingaleLimitModel | None = None, **kw) -> RegimePrediction:
    """Pick the theorem whose hypotheses hold; raise Unclassifiable if none does."""
    nseq = nseq or NormingSequence.for_law(law)
    L = _law_L(law)
    checks: list[Check] = []
    alpha, beta, pp = law.alpha, law.beta, law.p_plus
    m, g = off.m, off.gamma

    def add(name, ok, evidence):
        checks.append(Check(name, bool(ok), evidence))
        return ok

    def refuse(reason):
        pred = RegimePrediction("None", checks, off, law, nseq, eps, L)
        raise Unclassifiable(reason, pred)

    add("offspring", 0 < off.p1 < 1 and m > 1, f"p1={off.p1:.6g}, m={m:.6g}")
    flags = []
    d = off.d
    add("period", True, f"d={d}" + ("; d > 2 is untested" if d > 2 else ""))
    if d > 2:
        flags.append("untested_period")
    if not add("alpha_consistent", math.isclose(alpha, nseq.alpha, rel_tol=1e-12),
               f"law alpha={alpha:g}, norming alpha={nseq.alpha:g}"):
        refuse("alpha of the summand law differs from alpha of the norming sequence")
    if alpha == 1:
        add("B_alpha_one_symmetric", law.symmetric, "alpha = 1 needs mu(1; x) = 0")
    if pp == 0:
        if not add("B_p_plus_zero", alpha < beta, f"alpha={alpha:g} < beta={beta:g}"):
            refuse("p_plus = 0 needs alpha < beta")
    if 1 < alpha < 2:
        s = nseq.s
        ok = s.is_constant or s.delta >= 0
        if not add("B_liminf_s", ok, f"s = {s.kind}(delta={s.delta:g})"):
            refuse("liminf s(x) must be positive for 1 < alpha < 2")

    if 1 < alpha < 2 and pp > 0:
        vals = left_tail_ratio(law, nseq)
        # recorded only: a finite-n proxy cannot establish a limsup
        add("B_left_tail_ratio", _left_tail_ok(vals),
            "F(-b(n)/log(n)^(1/alpha)) / (log(n) F(-b(n))) = "
            + ", ".join(f"{v:.6g} at n={n:.0e}" for n, v in vals))

    x_lim = eps.scaled_limit(nseq)
    add("scaled_threshold", True, f"eps_n m^n / b(m^n) -> {x_lim:g}")
    if math.isfinite(x_lim):
        pred = RegimePrediction("MainX", checks, off, law, nseq, eps, L,
                                extra={"x": x_lim, "flags": flags})
        if evaluate:
            pred.prediction = predict_mainx(pred, model, **kw)
        return pred

    gap = g - (beta - 1)
    sgn = _sign(gap)
    add("gamma_vs_beta_minus_1", True, f"gamma - (beta-1) = {gap:.6g} (sign {sgn:+d})")
    eg = eps.growth(nseq)
    e_dir = eg.direction()
    add("eps_limit", True, f"eps_n -> {_direction_name(e_dir)}")
    add("alpha_range", True, f"alpha = {alpha:g}")
    add("p_plus", True, f"p_plus = {pp:g}")

    tid, y = None, None
    if sgn > 0:
        if alpha < 1:
            if add("Main2_eps_diverges", e_dir > 0, "needs eps_n -> +inf"):
                tid = "Main2"
        elif pp > 0:
            if add("Main3_iv_eps_converges", e_dir == 0, "needs eps_n -> eps in (0, inf)"):
                tid = "Main3_iv"
        elif 1 < alpha and e_dir < 0:
            tid, y = _by_sequence("chi", chi_growth(nseq, eps, m, g, beta, L),
                                  lambda n: log_chi_n(nseq, eps, m, g, beta, L, n),
                                  n_max, add, refuse, ("Main3_i", "Main3_ii", "Main3_iii"))
    elif sgn == 0:
        if alpha < 1:
            if add("Cmain2_hypotheses", beta > 1 and e_dir > 0,
                   "needs beta > 1 and eps_n -> +inf"):
                tid = "Cmain2"
        elif 1 < alpha:
            if pp > 0:
                if add("Cmain3_iv_eps_constant", e_dir == 0, "needs a constant eps"):
                    tid = "Cmain3_iv"
            elif e_dir < 0:
                tid, y = _by_sequence("pi", pi_growth(nseq, eps, m, g, beta, L),
                                      lambda n: math.log(pi_n(nseq, eps, m, g, beta, L, n)),
                                      n_max, add, refuse,
                                      ("Cmain3_i", "Cmain3_ii", "Cmain3_iii"))
    else:
        if add("SCmain3_hypotheses", 1 < alpha < 2 and e_dir == 0 and eps.kind == "constant",
               "needs 1 < alpha < 2 and a constant eps"):
            tid = "SCmain3"
    if tid is None:
        refuse("no theorem's hypotheses hold for this configuration")
    if tid.startswith("Cmain") and d == 2:
        flags.append("exploratory_period")
    extra = {"flags": flags}
    if y is not None:
        extra["y"] = y
    pred = RegimePrediction(tid, checks, off, law, nseq, eps, L, extra=extra)
    if evaluate:
        pred.prediction = predict(pred, model, **kw)
    return pred


def _by_sequence(name, growth, log_fn, n_max, add, refuse, ids):
    sym = growth.direction()
    try:
        slope, vals = _numeric_trend(log_fn, n_max)
    except Exception as exc:  # numeric evaluation failed: report, do not guess
        add(f"{name}_numeric", False, f"numeric evaluation failed: {exc}")
        refuse(f"{name}_n could not be evaluated numerically")
    ok = _confirm(sym, slope, vals)
    add(f"{name}_limit", ok,
        f"symbolic {growth.describe()} -> {_direction_name(sym)}; numeric log-slope "
        f"{slope:.4g} over n={vals[0][0]}..{vals[-1][0]}")
    if not ok:
        refuse(f"symbolic and numeric limits of {name}_n disagree")
    if sym < 0:
        return ids[0], None
    if sym > 0:
        return ids[1], None
    return ids[2], growth.coef


# -- predictions ----------------------------------------------------------------------

def limit_stable(law, nseq: NormingSequence) -> StableLaw:
    """The stable limit of S_k/b(k) with scale fixed by the tail constants."""
    skew = 0.0 if law.alpha == 1 else law.p_plus - law.p_minus
    return StableLaw(law.alpha, skew, analytic_scale(law, nseq))


def stable_tail_integral(U: StableLaw, gamma: float) -> float:
    """int_0^inf u**(gamma-1) P(U >= u**((alpha-1)/alpha)) du (alpha > 1)."""
    a = U.alpha
    if a <= 1:
        raise DomainError("the small-value integral needs alpha > 1")
    c = gamma * a / (a - 1)
    # v = u**((alpha-1)/alpha); integrate v**c P(U >= v) over s = log v
    hi = math.log(U.scale) + 4.0
    while float(U.tail_cdf(math.exp(hi))) > 1e-300 and hi < 50:
        hi += 1.0
    s = np.linspace(-60.0 / c, hi, 200001)
    v = np.exp(s)
    val = float(np.trapezoid(v ** c * np.asarray(U.tail_cdf(v)), s))
    return a / (a - 1) * val


def _model(pred: RegimePrediction, model):
    return model if model is not None else MartingaleLimitModel(pred.off)


def predict(pred: RegimePrediction, model=None, window=(0.01, 0.1), **kw) -> Prediction:
    tid = pred.theorem_id
    if tid == "MainX":
        return predict_mainx(pred, model, **kw)
    if tid == "SCmain3":
        return predict_scmain3(pred, **kw)
    model = _model(pred, model)
    d = pred.off.d
    if tid in ("Main2", "Main3_i", "Main3_iv"):
        ib = model.moment_W(1.0 - pred.law.beta)
        return Prediction("value", ib.value, ib.value,
                          {"I_beta": ib.value, "stderr": ib.stderr, "method": ib.method})
    win = model.omega_window(*window)
    details = {"window": (win.u_lo, win.u_hi), "inf": win.inf_est, "sup": win.sup_est,
               "inf_ci": win.inf_ci, "sup_ci": win.sup_ci, "label": win.label, "d": d}
    if tid in ("Cmain2", "Cmain3_i", "Cmain3_iv"):
        return Prediction("heuristic", d * win.inf_est, d * win.sup_est, details)
    U = limit_stable(pred.law, pred.nseq)
    integral = stable_tail_integral(U, model.gamma)
    details.update(stable_integral=integral, stable=U.to_dict())
    lo, hi = win.inf_est * integral, win.sup_est * integral
    y = pred.extra.get("y")
    if tid == "Main3_iii":
        ib = model.moment_W(1.0 - pred.law.beta).value
        lo, hi = lo + y * ib, hi + y * ib
        details.update(I_beta=ib, y=y)
    elif tid == "Cmain3_iii":
        lo, hi = lo + y * d * win.inf_est, hi + y * d * win.sup_est
        details.update(y=y)
    return Prediction("heuristic", lo, hi, details)


def predict_mainx(pred: RegimePrediction, model=None, stable: StableLaw | None = None,
                  **_) -> Prediction:
    """E_W[P(U >= W**((alpha-1)/alpha) x)] over the W samples of the model."""
    model = _model(pred, model)
    U = stable or limit_stable(pred.law, pred.nseq)
    x = pred.extra.get("x", pred.eps.x)
    w = model.samples
    vals = np.asarray(U.tail_cdf(x * w ** ((U.alpha - 1) / U.alpha)), dtype=np.float64)
    v = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(vals.size))
    return Prediction("value", v, v, {"x": x, "stderr": se, "stable": U.to_dict(),
                                      "W_samples": int(w.size), "N": model.N})


def schroder_K(off: OffspringLaw, law, eps: float, k_cap: int = 4096,
               rel: float = 1e-3) -> tuple[int, np.ndarray]:
    """Smallest K (doubling from 16) with q_K env(K) < rel * sum_{k<=K} q_k env(k)."""
    K, memo = 16, {}
    while True:
        q, _ = q_vector(off, K)
        ks = np.nonzero(q > 0)[0]
        ks = ks[ks >= 1]
        for k in ks:
            if k not in memo:
                memo[k] = envelope(law, int(k), eps * k)
        env = np.array([memo[k] for k in ks])
        terms = q[ks] * env
        last = terms[-1] if terms.size else 0.0
        if last < rel * terms.sum() or K >= k_cap:
            return K, q
        K *= 2


def predict_scmain3(pred: RegimePrediction, reps: int = 10 ** 6, seed: int = 0x5C,
                    workers: int = 1, K: int | None = None, **_) -> Prediction:
    e = pred.eps.c
    if K is None:
        K, q = schroder_K(pred.off, pred.law, e)
    else:
        q, _ = q_vector(pred.off, K)
    ks = np.nonzero(q > 0)[0]
    ks = ks[ks >= 1]
    res = weighted_tail_sum(pred.law, ks, q[ks], e, reps, seed, workers)
    last = float(q[ks[-1]] * envelope(pred.law, int(ks[-1]), e * ks[-1]))
    return Prediction("value", res.value, res.value,
                      {"K": K, "stderr": res.stderr, "reps": reps,
                       "last_term_envelope": last})
