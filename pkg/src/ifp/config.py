"""JSON run configurations and parameter templates.

A configuration is one JSON document::

    {
      "model":      {... fixed model fields ...},
      "template":   {"name": "stochastic_returns", "params": {...}},
      "solver":     {... SolverConfig fields ...},
      "simulation": {"n_paths": ..., "horizon": ..., "burn_in": ..., "a0": ..., "z0": ...},
      "tail":       {"s_max": ..., "tail_fraction": ...},
      "seed": 0
    }

Only ``model`` is required.  A template builds the fields it owns (the chain
and one primitive) from scalar parameters, which is what lets a sweep
re-discretize at every grid cell.  Fields the template owns must not also
appear under ``model``.
"""

import copy
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import markov
from .errors import IFPError, SchemaError, UnknownParameter
from .model import ModelSpec, PrimitiveSpec, constant, lognormal
from .solver import SolverConfig

CONFIG_DIR = Path(__file__).with_name("configs")
MODEL_FIELDS = ("transition", "beta", "ret", "income", "gamma", "states")


# --- templates -----------------------------------------------------------------


def _ar1_discount(p):
    """``beta_t = Z_t`` with ``Z`` a Rouwenhorst-discretized AR(1) with
    stationary law ``N(mu, sigma**2)``."""
    chain = markov.rouwenhorst(int(p["n_states"]), p["mu"], p["rho"], p["sigma"])
    return {"transition": chain.transition, "beta": constant(chain.states), "states": chain.states.tolist()}


def sigma_tilde(sigma_bar, rho_sigma, delta_sigma):
    """Volatility level implied by the stationary mean of ``log sigma``."""
    return math.exp(sigma_bar + delta_sigma ** 2 / (2.0 * (1.0 - rho_sigma ** 2)))


def _stochastic_returns(p):
    """``log R = mu_t + sigma_t zeta`` with AR(1) chains for ``mu`` and ``log sigma``.

    ``variant`` "I" fixes ``mu`` at ``mu_bar``; "II" fixes ``sigma`` at
    :func:`sigma_tilde`; "full" uses the product chain (``mu`` index major).
    Each AR(1) is discretized with its stationary standard deviation
    ``delta / sqrt(1 - rho**2)``.
    """
    variant = p["variant"]

    def chain(mean, rho, delta, n):
        return markov.rouwenhorst(int(n), mean, rho, delta / math.sqrt(1.0 - rho ** 2))

    if variant == "I":
        sig = chain(p["sigma_bar"], p["rho_sigma"], p["delta_sigma"], p["n_sigma"])
        scale = np.exp(sig.states)
        return {"transition": sig.transition, "ret": lognormal(np.full(len(scale), p["mu_bar"]), scale),
                "states": [f"sigma={s:.6g}" for s in scale]}
    if variant == "II":
        mu = chain(p["mu_bar"], p["rho_mu"], p["delta_mu"], p["n_mu"])
        st = sigma_tilde(p["sigma_bar"], p["rho_sigma"], p["delta_sigma"])
        return {"transition": mu.transition, "ret": lognormal(mu.states, np.full(len(mu.states), st)),
                "states": [f"mu={m:.6g}" for m in mu.states]}
    if variant == "full":
        mu = chain(p["mu_bar"], p["rho_mu"], p["delta_mu"], p["n_mu"])
        sig = chain(p["sigma_bar"], p["rho_sigma"], p["delta_sigma"], p["n_sigma"])
        scale = np.exp(sig.states)
        locs = np.repeat(mu.states, len(scale))
        scales = np.tile(scale, len(mu.states))
        return {"transition": np.kron(mu.transition, sig.transition), "ret": lognormal(locs, scales),
                "states": [f"mu={m:.6g},sigma={s:.6g}" for m, s in zip(locs, scales)]}
    raise SchemaError(f"unknown variant {variant!r}; expected I, II or full", "template.params.variant")


TEMPLATES = {
    "ar1_discount": (
        _ar1_discount,
        {"mu": 0.99, "rho": 0.5, "sigma": 0.01, "n_states": 15},
        ("transition", "beta", "states"),
    ),
    "stochastic_returns": (
        _stochastic_returns,
        {
            "mu_bar": 0.0281, "rho_mu": 0.5722, "delta_mu": 0.0067,
            "sigma_bar": -3.2556, "rho_sigma": 0.2895, "delta_sigma": 0.1896,
            "n_mu": 5, "n_sigma": 5, "variant": "full",
        },
        ("transition", "ret", "states"),
    ),
}


# --- parsing -------------------------------------------------------------------


def _require(d, key, where):
    if key not in d:
        raise SchemaError(f"missing field {key!r}", where)
    return d[key]


def _primitive(d, where):
    if not isinstance(d, dict):
        raise SchemaError("primitive must be an object with a 'kind'", where)
    kind = _require(d, "kind", where)
    needed = {"constant": ("value",), "lognormal": ("loc", "scale"), "discrete": ("points", "probs")}
    if kind not in needed:
        raise SchemaError(f"unknown kind {kind!r}; expected one of {sorted(needed)}", f"{where}.kind")
    for k in needed[kind]:
        _require(d, k, where)
    extra = set(d) - {"kind", *needed[kind]}
    if extra:
        raise SchemaError(f"unexpected fields {sorted(extra)}", where)
    try:
        return PrimitiveSpec.from_json(d)
    except (ValueError, IFPError) as err:
        raise SchemaError(str(err), where) from err


def _model_fields(d):
    if not isinstance(d, dict):
        raise SchemaError("'model' must be an object", "model")
    extra = set(d) - set(MODEL_FIELDS)
    if extra:
        raise SchemaError(f"unexpected fields {sorted(extra)}", "model")
    out = {}
    for k in ("beta", "ret", "income"):
        if k in d:
            out[k] = _primitive(d[k], f"model.{k}")
    if "transition" in d:
        try:
            out["transition"] = np.array(d["transition"], dtype=float)
        except (TypeError, ValueError) as err:
            raise SchemaError("transition must be a numeric matrix", "model.transition") from err
    if "gamma" in d:
        if not isinstance(d["gamma"], (int, float)) or isinstance(d["gamma"], bool):
            raise SchemaError("gamma must be a number", "model.gamma")
        out["gamma"] = float(d["gamma"])
    if "states" in d:
        out["states"] = list(d["states"])
    return out


@dataclass
class RunConfig:
    """A parsed configuration.  ``spec`` is the model at the configured
    template parameters; :meth:`with_params` rebuilds it at others."""

    spec: ModelSpec
    raw: dict
    solver: SolverConfig = field(default_factory=SolverConfig)
    simulation: dict = field(default_factory=dict)
    tail: dict = field(default_factory=dict)
    seed: int = 0
    template: str = None
    params: dict = field(default_factory=dict)
    path: str = None

    def with_params(self, **over):
        if self.template is None:
            raise UnknownParameter(f"config has no template; cannot vary {sorted(over)}")
        unknown = [k for k in over if k not in self.params]
        if unknown:
            raise UnknownParameter(
                f"unknown template parameter(s) {unknown}; known: {sorted(self.params)}"
            )
        params = dict(self.params, **over)
        return _assemble(self.raw.get("model", {}), self.template, params)


def _assemble(model_raw, template, params):
    fixed = _model_fields(model_raw)
    if template is not None:
        builder, _, owned = TEMPLATES[template]
        clash = [k for k in owned if k in fixed]
        if clash:
            raise SchemaError(f"fields {clash} are set by template {template!r}", "model")
        try:
            fixed.update(builder(params))
        except SchemaError:
            raise
        except (ValueError, IFPError) as err:
            raise SchemaError(f"template {template!r}: {err}", "template.params") from err
    for k in ("transition", "beta", "ret", "income", "gamma"):
        _require(fixed, k, "model")
    try:
        return ModelSpec(**fixed)
    except (ValueError, IFPError) as err:
        raise SchemaError(str(err), "model") from err


def _template(d):
    if d is None:
        return None, {}
    if not isinstance(d, dict):
        raise SchemaError("'template' must be an object", "template")
    name = _require(d, "name", "template")
    if name not in TEMPLATES:
        raise SchemaError(f"unknown template {name!r}; expected one of {sorted(TEMPLATES)}", "template.name")
    params = dict(TEMPLATES[name][1])
    given = d.get("params", {})
    unknown = set(given) - set(params)
    if unknown:
        raise SchemaError(f"unknown parameters {sorted(unknown)}", "template.params")
    params.update(given)
    return name, params


def parse_config(doc, path=None):
    """Build a :class:`RunConfig` from a decoded JSON document."""
    if not isinstance(doc, dict):
        raise SchemaError("configuration must be a JSON object", "$")
    extra = set(doc) - {"model", "template", "solver", "simulation", "tail", "seed", "description"}
    if extra:
        raise SchemaError(f"unexpected top-level fields {sorted(extra)}", "$")
    template, params = _template(doc.get("template"))
    spec = _assemble(_require(doc, "model", "$"), template, params)
    try:
        solver = SolverConfig(**doc.get("solver", {}))
    except TypeError as err:
        raise SchemaError(str(err), "solver") from err
    except IFPError as err:
        raise SchemaError(str(err), "solver") from err
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise SchemaError("seed must be an integer", "seed")
    return RunConfig(spec, copy.deepcopy(doc), solver, dict(doc.get("simulation", {})), dict(doc.get("tail", {})),
                     seed, template, params, path)


def load_config(path):
    """Read and validate a configuration file.

    Syntax errors are reported with line and column; schema violations name
    the offending field.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise SchemaError(f"cannot read {path}: {err.strerror}", str(path)) from err
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise SchemaError(f"{path}: invalid JSON: {err.msg}", f"line {err.lineno}, column {err.colno}") from err
    return parse_config(doc, str(path))


def shipped(name):
    """Path of a configuration that ships with the package (e.g. ``"benhabib"``)."""
    p = CONFIG_DIR / f"{name}.json"
    if not p.exists():
        raise FileNotFoundError(f"no shipped config {name!r}; have {sorted(q.stem for q in CONFIG_DIR.glob('*.json'))}")
    return p
