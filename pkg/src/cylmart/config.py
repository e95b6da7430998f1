"""Experiment configuration: JSON with a versioned schema, unknown keys rejected."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError

SCHEMA = "cylmart.config/1"
KINDS = ("simulate", "reconstruct", "timechange", "counterexample", "calculus-selftest")

DEFAULT_TOLERANCES = {
    "exact": 1e-9,  # pure-algebra identities
    "se_multiplier": 4.0,  # Monte Carlo agreement in standard errors
    "relative": 0.05,  # qv within 5% of target
    "confidence": 0.95,  # fraction of trials that must meet "relative"
    "ratio": 0.20,  # rms-gap refinement ratio tolerance
    "ks_alpha": 0.01,
    "closed_form_rel": 1e-14,  # float rounding of c_n² against 2^(n/2)
}


@dataclass
class ExperimentConfig:
    kind: str
    schema: str = SCHEMA
    d_H: int = 2
    d_X: int = 2
    T: float = 1.0
    K: int = 10_000
    trials: int = 1000
    seed: int = 42
    depth: int = 3
    N: int = 7  # ladder truncation for the counterexample
    N_max: int = 40  # largest N for the certificate sweep
    n_terms: int | None = None  # functionals entering F
    n_max: int = 1  # ucp series truncation
    G: list | None = None  # constant G (d_X x d_H) for simulate
    Q: list | None = None  # covariance for simulate
    window: int | None = None
    tolerances: dict = field(default_factory=dict)
    out: str = "out"

    def effective_tolerances(self) -> dict:
        return {**DEFAULT_TOLERANCES, **self.tolerances}

    def validate(self) -> "ExperimentConfig":
        err = {}
        if self.schema != SCHEMA:
            err["schema"] = f"expected {SCHEMA!r}, got {self.schema!r}"
        if self.kind not in KINDS:
            err["kind"] = f"must be one of {', '.join(KINDS)}"
        for name in ("d_H", "d_X", "K", "trials", "depth", "N", "N_max", "n_max"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                err[name] = "must be a positive integer"
        if not isinstance(self.seed, int) or self.seed < 0:
            err["seed"] = "must be a nonnegative integer"
        if not isinstance(self.T, (int, float)) or self.T <= 0:
            err["T"] = "must be positive"
        if self.n_terms is not None and (not isinstance(self.n_terms, int) or self.n_terms < 1):
            err["n_terms"] = "must be a positive integer or null"
        if self.window is not None and (not isinstance(self.window, int) or self.window < 1):
            err["window"] = "must be a positive integer or null"
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            err["tolerances"] = f"unknown keys {sorted(unknown)}"
        elif any(not isinstance(v, (int, float)) or isinstance(v, bool) or v < 0
                 for v in self.tolerances.values()):
            err["tolerances"] = "values must be nonnegative numbers"
        if self.kind == "reconstruct" and self.d_X != self.d_H:
            err["d_X"] = "reconstruction needs d_X == d_H"
        if self.kind == "counterexample" and isinstance(self.N, int) and self.N > 62:
            err["N"] = "must be <= 62"
        if self.kind == "counterexample" and isinstance(self.N_max, int) and self.N_max > 62:
            err["N_max"] = "must be <= 62"
        if self.kind == "simulate" and isinstance(self.T, (int, float)) and self.T < self.n_max:
            err["n_max"] = "ucp horizon n_max must not exceed T"
        for name, shape in (("G", (self.d_X, self.d_H)), ("Q", (self.d_H, self.d_H))):
            m = getattr(self, name)
            if m is not None and (len(m) != shape[0] or any(len(r) != shape[1] for r in m)):
                err[name] = f"must be a {shape[0]}x{shape[1]} matrix"
        if err:
            raise ConfigError(err)
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tolerances"] = self.effective_tolerances()
        return d


def config_from_dict(doc: dict, kind: str | None = None) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError({"<root>": "config must be a JSON object"})
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError({k: "unknown key" for k in unknown})
    doc = dict(doc)
    if kind is not None:
        if doc.get("kind", kind) != kind:
            raise ConfigError({"kind": f"config says {doc['kind']!r} but {kind!r} was requested"})
        doc["kind"] = kind
    if "kind" not in doc:
        raise ConfigError({"kind": "required"})
    return ExperimentConfig(**doc).validate()


def load_config(path: str | Path, kind: str | None = None) -> ExperimentConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError({"<file>": f"invalid JSON: {e}"}) from e
    return config_from_dict(doc, kind)
