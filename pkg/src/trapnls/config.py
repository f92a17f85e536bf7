"""INI run configuration with documented defaults.

Sections and keys (all optional)::

    [run]         experiment, seed, threads
    [basis]       d = 2, n_max = 8, quad_nodes = 2*n_max+1 when omitted
    [domain]      L_x = 64*pi, N_x = 1024
    [evolution]   kappa = 1, dt = 0.01, t_start = 0, t_end = 1, samples = 11
    [experiment]  free parameters of the chosen experiment (eps, n, sigma, ...)
    [validate]    overrides for the acceptance checks
    [paths]       out = results, cache = tensor.rct

Values are parsed as int, then float, then string; ``pi`` expressions such
as ``64*pi`` are accepted for lengths.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError
from .hermite import BasisSpec

DEFAULTS = {
    "run": {"experiment": "", "seed": 12345, "threads": 1},
    "basis": {"d": 2, "n_max": 8, "quad_nodes": None},
    "domain": {"L_x": 64 * math.pi, "N_x": 1024},
    "evolution": {"kappa": 1.0, "dt": 0.01, "t_start": 0.0, "t_end": 1.0, "samples": 11},
    "paths": {"out": "results", "cache": "tensor.rct"},
}

_PI_EXPR = re.compile(r"^\s*([-+]?\d*\.?\d*(?:[eE][-+]?\d+)?)\s*\*?\s*pi\s*$")


def parse_value(text: str):
    s = text.strip()
    if s.lower() in ("none", ""):
        return None
    if s.lower() in ("true", "yes", "on"):
        return True
    if s.lower() in ("false", "no", "off"):
        return False
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    m = _PI_EXPR.match(s)
    if m:
        coef = m.group(1)
        return (float(coef) if coef not in ("", "+", "-") else float(coef + "1")) * math.pi
    return s


@dataclass
class RunConfig:
    sections: dict = field(default_factory=dict)
    source: str | None = None

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    @property
    def experiment(self) -> str:
        return self.get("run", "experiment") or ""

    @property
    def seed(self) -> int:
        return int(self.get("run", "seed"))

    def basis_spec(self) -> BasisSpec:
        b = self.sections["basis"]
        n_max = int(b["n_max"])
        q = b.get("quad_nodes")
        return BasisSpec(int(b["d"]), n_max, 2 * n_max + 1 if q is None else int(q))

    def experiment_params(self) -> dict:
        return dict(self.sections.get("experiment", {}))

    def validate_params(self) -> dict:
        return dict(self.sections.get("validate", {}))

    def resolved(self) -> dict:
        """Everything that affects results (paths and thread count excluded)."""
        out = {k: dict(v) for k, v in self.sections.items() if k != "paths"}
        out["run"] = {k: v for k, v in out.get("run", {}).items() if k != "threads"}
        spec = self.basis_spec()
        out["basis"]["quad_nodes"] = spec.quad_nodes
        return out

    def digest(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Read an INI file (or nothing) on top of the defaults and validate eagerly."""
    sections = {k: dict(v) for k, v in DEFAULTS.items()}
    if path is not None:
        parser = configparser.ConfigParser()
        parser.optionxform = str  # keep key case (L_x, N_x)
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ValidationError(f"cannot parse config {path}: {exc}") from None
        for sec in parser.sections():
            dest = sections.setdefault(sec, {})
            for key, raw in parser.items(sec):
                dest[key] = parse_value(raw)
    for (sec, key), val in (overrides or {}).items():
        if val is not None:
            sections.setdefault(sec, {})[key] = val
    cfg = RunConfig(sections, str(path) if path else None)
    _check(cfg)
    return cfg


def _check(cfg: RunConfig) -> None:
    unknown = set(cfg.sections) - set(DEFAULTS) - {"experiment", "validate"}
    if unknown:
        raise ValidationError(f"unknown config sections: {sorted(unknown)}")
    for sec, keys in DEFAULTS.items():
        extra = set(cfg.sections[sec]) - set(keys)
        if extra:
            raise ValidationError(f"unknown keys in [{sec}]: {sorted(extra)}")
    cfg.basis_spec()  # raises on bad d / n_max / quad_nodes
    L, N = cfg.get("domain", "L_x"), cfg.get("domain", "N_x")
    if not isinstance(L, (int, float)) or L <= 0:
        raise ValidationError("[domain] L_x must be a positive number")
    if not isinstance(N, int) or N < 2 or N & (N - 1):
        raise ValidationError("[domain] N_x must be a power of two")
    ev = cfg.sections["evolution"]
    if not isinstance(ev["dt"], (int, float)) or ev["dt"] <= 0:
        raise ValidationError("[evolution] dt must be positive")
    if ev["kappa"] not in (1, -1, 1.0, -1.0):
        raise ValidationError("[evolution] kappa must be +1 or -1")
    if ev["t_end"] < ev["t_start"]:
        raise ValidationError("[evolution] t_end must not precede t_start")
