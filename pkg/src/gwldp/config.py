"""Experiment configuration: loading, validation, default resolution and builders.

A configuration is a YAML (or JSON) mapping validated against
``schema/config.schema.json``.  :func:`resolve` materializes every default so
the resolved mapping fully determines a run; resolving a resolved mapping
returns it unchanged.
"""

from __future__ import annotations

import copy
import json
from importlib import resources
from pathlib import Path

import jsonschema
import yaml

from .errors import ConfigError
from .gw.offspring import OffspringLaw
from .laws import (LatticeSign, SlowlyVarying, SummandLaw, one_sided, spectrally_negative,
                   symmetric_pareto, two_sided)
from .norming import NormingSequence, ThresholdSequence

MODES = ("predict", "simulate", "sweep", "bounds", "verify-moments", "lotka-nagaev")
LN_MARKER = "lotka-nagaev"
_CONST = {"kind": "constant", "c": 1.0, "delta": 0.0}
REQUIRED = object()
FAMILIES = {
    "symmetric_pareto": {"alpha": REQUIRED, "x0": 1.0, "body_mass": 0.0, "L": _CONST},
    "two_sided": {"alpha": REQUIRED, "p_plus": REQUIRED, "x0": 1.0, "body_mass": 0.0,
                  "L": _CONST},
    "one_sided": {"beta": REQUIRED, "x0": 1.0, "body_mass": 0.5, "L": _CONST},
    "spectrally_negative": {"alpha": REQUIRED, "beta": REQUIRED, "right_mass": 0.25,
                            "left_mass": 0.25, "x0": 1.0, "L_right": _CONST,
                            "L_left": _CONST},
    "two_piece": {"right_index": REQUIRED, "left_index": REQUIRED, "right_mass": REQUIRED,
                  "left_mass": REQUIRED, "x0": 1.0, "L_right": _CONST, "L_left": _CONST},
    "lattice_sign": {},
}
DEFAULT_BOUND_LAWS = {
    "pareto_0.8": {"family": "symmetric_pareto", "alpha": 0.8},
    "pareto_1.0": {"family": "symmetric_pareto", "alpha": 1.0},
    "pareto_1.5": {"family": "symmetric_pareto", "alpha": 1.5},
}
COMMON = {"master_seed": 0, "workers": 1, "backend": "auto", "budget": 10 ** 8}


def schema() -> dict:
    text = resources.files("gwldp").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def load(path) -> dict:
    """Read a configuration file (YAML or JSON); :func:`resolve` validates it."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        data = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML/JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return data


def validate(data: dict) -> None:
    try:
        jsonschema.validate(data, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc


# -- resolution ------------------------------------------------------------------

def _sv(d) -> dict:
    return SlowlyVarying.from_dict(d).to_dict()


def resolve_summand(spec) -> dict | str:
    if spec == LN_MARKER:
        return spec
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError("summand must name a family")
    fam = spec["family"]
    if fam not in FAMILIES:
        raise ConfigError(f"unknown summand family {fam!r}")
    defaults = FAMILIES[fam]
    extra = set(spec) - set(defaults) - {"family", "name"}
    if extra:
        raise ConfigError(f"summand family {fam!r} does not take {sorted(extra)}")
    out = {"family": fam}
    for key, default in defaults.items():
        if key in spec:
            val = spec[key]
        elif default is REQUIRED:
            raise ConfigError(f"summand family {fam!r} needs {key!r}")
        else:
            val = copy.deepcopy(default)
        out[key] = _sv(val) if key.startswith("L") else float(val)
    if fam != "lattice_sign":
        out["name"] = spec.get("name", "")
    return out


def build_summand(spec):
    spec = resolve_summand(spec)
    if spec == LN_MARKER:
        raise ConfigError("the lotka-nagaev marker has no standalone summand law")
    fam = spec["family"]
    if fam == "lattice_sign":
        return LatticeSign()
    kw = {k: v for k, v in spec.items() if k != "family"}
    for key in [k for k in kw if k.startswith("L")]:
        kw[key] = SlowlyVarying.from_dict(kw[key])
    if fam == "symmetric_pareto":
        return symmetric_pareto(**kw)
    if fam == "two_sided":
        return two_sided(**kw)
    if fam == "one_sided":
        return one_sided(**kw)
    if fam == "spectrally_negative":
        return spectrally_negative(**kw)
    return SummandLaw(kw["right_index"], kw["left_index"], kw["right_mass"],
                      kw["left_mass"], kw["x0"], kw["L_right"], kw["L_left"], kw["name"])


def build_offspring(spec) -> OffspringLaw:
    if not isinstance(spec, dict):
        raise ConfigError("offspring must be a mapping with a 'kind'")
    try:
        return OffspringLaw.from_dict(spec)
    except KeyError as exc:
        raise ConfigError(f"offspring {spec.get('kind')!r} needs {exc.args[0]!r}") from exc


def _output(cfg: dict, mode: str) -> dict:
    out = dict(cfg.get("output") or {})
    return {"dir": out.get("dir", "."), "stem": out.get("stem", mode.replace("-", "_")),
            "format": out.get("format", "both")}


def resolve(cfg: dict) -> dict:
    """Fully resolved copy of a configuration (every default materialized)."""
    validate(cfg)
    mode = cfg["mode"]
    r = {"mode": mode}
    for key, default in COMMON.items():
        r[key] = cfg.get(key, default)
    r["output"] = _output(cfg, mode)
    if mode == "bounds":
        b = dict(cfg.get("bounds") or {})
        laws = b.get("laws") or DEFAULT_BOUND_LAWS
        r["bounds"] = {"laws": {k: resolve_summand(v) for k, v in laws.items()},
                       "ks": [int(k) for k in b.get("ks", [10, 100, 1000, 10000])],
                       "ratios": [float(x) for x in b.get("ratios", [1, 2, 5, 10])],
                       "z": float(b.get("z", 4.0))}
        r["replicates"] = int(cfg.get("replicates", 10 ** 6))
        return r
    r["offspring"] = build_offspring(
        cfg.get("offspring", {"kind": "geom_shift", "a": 0.5})).to_dict()
    r["model"] = _model(cfg)
    if mode == "verify-moments":
        mo = dict(cfg.get("moments") or {})
        r["moments"] = {"ts": [float(t) for t in mo.get("ts", [-0.5, 0.5])],
                        "n": int(mo.get("n", 12)), "n_gamma": int(mo.get("n_gamma", 14)),
                        "tolerance": float(mo.get("tolerance", 0.02)),
                        "tolerance_gamma": float(mo.get("tolerance_gamma", 0.05))}
        return r
    r["n_range"] = [int(n) for n in cfg.get("n_range", [4, 5, 6, 7, 8])]
    r["replicates"] = int(cfg.get("replicates", 10 ** 6))
    if mode == "lotka-nagaev":
        if cfg.get("summand", LN_MARKER) != LN_MARKER:
            raise ConfigError("lotka-nagaev mode takes summand: lotka-nagaev")
        r["summand"] = LN_MARKER
        ln = dict(cfg.get("lotka_nagaev") or {})
        r["lotka_nagaev"] = {"mode": ln.get("mode", "AbsoluteDeviation"),
                             "eps": ln.get("eps"), "x": ln.get("x")}
        return r
    if "summand" not in cfg:
        raise ConfigError(f"mode {mode!r} needs a summand law")
    r["summand"] = resolve_summand(cfg["summand"])
    if r["summand"] == LN_MARKER:
        raise ConfigError("summand: lotka-nagaev needs mode lotka-nagaev")
    law = build_summand(r["summand"])
    th = cfg.get("threshold", {"kind": "constant"})
    r["threshold"] = ThresholdSequence.from_dict(th).to_dict()
    if getattr(law, "alpha", None) is not None:
        nd = cfg.get("norming")
        r["norming"] = (NormingSequence.from_dict(nd) if nd else
                        NormingSequence.for_law(law)).to_dict()
    else:
        r["norming"] = None
    if mode in ("predict", "sweep"):
        r["n_max"] = int(cfg.get("n_max", 12))
        w = cfg.get("window", [0.01, 0.1])
        r["window"] = [float(w[0]), float(w[1])]
        sc = dict(cfg.get("scmain3") or {})
        r["scmain3"] = {"reps": int(sc.get("reps", 10 ** 6)), "K": sc.get("K")}
    return r


def _model(cfg: dict) -> dict:
    m = dict(cfg.get("model") or {})
    return {"N": int(m.get("N", 18)), "n_samples": int(m.get("n_samples", 10 ** 6)),
            "seed": int(m.get("seed", 0))}
