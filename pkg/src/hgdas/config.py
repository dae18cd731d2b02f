"""Experiment configuration and its text/JSON file formats.

The text format is one ``key = value`` per line with dotted section
prefixes; ``#`` starts a comment::

    lambda = 10
    generator.matrix_kind = correlated_gaussian
    hgd_as_ista.eta_r = 0.1

A JSON file with the same keys nested by section is accepted as well.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional

from .problem import ConfigError, GeneratorConfig
from .solver import HgdConfig

__all__ = [
    "SOLVER_NAMES",
    "FIXED_SOLVERS",
    "OUTPUT_DIR_ENV",
    "ExperimentConfig",
    "parse_text",
    "format_text",
    "load_config",
    "sample_config_text",
]

SOLVER_NAMES = ("ista_fixed", "fista_fixed", "hgd_as_ista", "hgd_as_fista")
FIXED_SOLVERS = ("ista_fixed", "fista_fixed")
OUTPUT_DIR_ENV = "HGDAS_OUTPUT_DIR"

_HGD_KEYS = ("eta_r", "eta_x", "eta_z", "eta_gamma", "p")
# keys that never change results; left out of the config hash
_UNHASHED = ("output_dir", "workers")


def _default_hgd() -> Dict[str, HgdConfig]:
    return {"hgd_as_ista": HgdConfig.default_ista(), "hgd_as_fista": HgdConfig.default_fista()}


@dataclass
class ExperimentConfig:
    """Full description of a benchmark sweep.

    ``solvers`` lists the solvers to run; ``hgd`` holds the meta learning
    rates and smoothing of the online variants (``T`` is taken from here).
    """

    generator: GeneratorConfig = field(default_factory=lambda: GeneratorConfig(
        matrix_kind="correlated_gaussian", rho=0.5))
    lam: float = 10.0
    T: int = 40
    n_matrices: int = 20
    n_signals: int = 20
    solvers: List[str] = field(default_factory=lambda: list(SOLVER_NAMES))
    hgd: Dict[str, HgdConfig] = field(default_factory=_default_hgd)
    master_seed: int = 0
    workers: int = 1
    carry_params: bool = False
    p: float = 50.0
    trace_limit: int = 20
    output_dir: str = "results"

    def __post_init__(self):
        if not self.solvers:
            raise ConfigError("at least one solver is required")
        unknown = [s for s in self.solvers if s not in SOLVER_NAMES]
        if unknown:
            raise ConfigError(f"unknown solvers {unknown}; choose from {SOLVER_NAMES}")
        if len(set(self.solvers)) != len(self.solvers):
            raise ConfigError("solvers listed twice")
        if not self.lam > 0:
            raise ConfigError(f"lambda must be positive, got {self.lam}")
        for name in ("T", "n_matrices", "n_signals", "workers"):
            v = getattr(self, name)
            if int(v) != v or v < (0 if name == "T" else 1):
                raise ConfigError(f"{name} must be a positive integer, got {v}")
        if self.trace_limit < 0:
            raise ConfigError("trace_limit must be nonnegative")
        if not self.p > 0:
            raise ConfigError("p must be positive")
        for name in self.solvers:
            if name.startswith("hgd") and name not in self.hgd:
                raise ConfigError(f"missing settings for {name}")
            if name.startswith("hgd") and self.T < 1:
                raise ConfigError("online solvers need T >= 1")

    def hgd_config(self, name: str) -> HgdConfig:
        return replace(self.hgd[name], T=self.T)

    # -- flat key/value view ------------------------------------------------
    def to_flat(self) -> Dict[str, object]:
        out: Dict[str, object] = {
            "lambda": self.lam,
            "T": self.T,
            "n_matrices": self.n_matrices,
            "n_signals": self.n_signals,
            "solvers": list(self.solvers),
            "master_seed": self.master_seed,
            "workers": self.workers,
            "carry_params": self.carry_params,
            "p": self.p,
            "trace_limit": self.trace_limit,
            "output_dir": self.output_dir,
        }
        for key, val in self.generator.to_dict().items():
            if key != "seed":
                out[f"generator.{key}"] = val
        for name in sorted(self.hgd):
            h = self.hgd[name]
            for key in _HGD_KEYS:
                val = getattr(h, key)
                if val is not None:
                    out[f"{name}.{key}"] = val
        return out

    @classmethod
    def from_flat(cls, flat: Dict[str, object]) -> "ExperimentConfig":
        flat = dict(flat)
        gen = {k.split(".", 1)[1]: flat.pop(k) for k in list(flat) if k.startswith("generator.")}
        hgd_kw: Dict[str, dict] = {}
        for k in list(flat):
            head, _, tail = k.partition(".")
            if head in ("hgd_as_ista", "hgd_as_fista") and tail:
                if tail not in _HGD_KEYS:
                    raise ConfigError(f"unknown key {k}")
                hgd_kw.setdefault(head, {})[tail] = float(flat.pop(k))
        top = {}
        mapping = {"lambda": "lam"}
        known = {f.name for f in fields(cls)} - {"generator", "hgd"}
        for k, v in flat.items():
            name = mapping.get(k, k)
            if name not in known:
                raise ConfigError(f"unknown key {k}")
            top[name] = v
        for name in ("T", "n_matrices", "n_signals", "master_seed", "workers", "trace_limit"):
            if name in top:
                top[name] = _as_int(top[name], name)
        for name in ("lam", "p"):
            if name in top:
                top[name] = float(top[name])
        if "solvers" in top:
            s = top["solvers"]
            top["solvers"] = [x.strip() for x in s.split(",") if x.strip()] if isinstance(s, str) else list(s)
        if "carry_params" in top:
            top["carry_params"] = _as_bool(top["carry_params"])
        if "output_dir" in top:
            top["output_dir"] = str(top["output_dir"])

        defaults = _default_hgd()
        hgd = {}
        try:
            for name, base in defaults.items():
                hgd[name] = replace(base, **hgd_kw.get(name, {}))
            generator = GeneratorConfig.from_dict({**_default_generator(), **gen})
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cls(generator=generator, hgd=hgd, **top)

    def config_hash(self) -> str:
        flat = {k: v for k, v in self.to_flat().items() if k not in _UNHASHED}
        blob = json.dumps(flat, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def resolved_output_dir(self, override: Optional[str] = None) -> Path:
        """CLI override, then the environment variable, then the config value."""
        return Path(override or os.environ.get(OUTPUT_DIR_ENV) or self.output_dir)


def _default_generator() -> dict:
    d = GeneratorConfig(matrix_kind="correlated_gaussian", rho=0.5).to_dict()
    d.pop("seed")
    return d


def _as_int(v, name):
    if isinstance(v, int) and not isinstance(v, bool):
        return v
    try:
        return int(str(v).strip())
    except ValueError:
        pass
    try:
        f = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer, got {v!r}") from None
    if f != int(f):
        raise ConfigError(f"{name} must be an integer, got {v!r}")
    return int(f)


def _as_bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _scalar(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def parse_text(text: str) -> Dict[str, object]:
    """Parse the ``key = value`` format into a flat dict."""
    out: Dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key}")
        out[key] = value if key == "solvers" else _scalar(value)
    return out


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return ", ".join(map(str, v))
    return repr(v) if isinstance(v, float) else str(v)


def format_text(cfg: ExperimentConfig) -> str:
    return "".join(f"{k} = {_fmt(v)}\n" for k, v in cfg.to_flat().items())


def _flatten(d: dict, prefix: str = "") -> Dict[str, object]:
    out = {}
    for k, v in d.items():
        if isinstance(v, dict):
            out.update(_flatten(v, f"{prefix}{k}."))
        else:
            out[f"{prefix}{k}"] = v
    return out


def load_config(path) -> ExperimentConfig:
    """Read a text or JSON config (JSON if the content starts with ``{``)."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        try:
            flat = _flatten(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON config: {exc}") from exc
    else:
        flat = parse_text(text)
    return ExperimentConfig.from_flat(flat)


_SAMPLE_HEADER = """\
# Experiment configuration (key = value; '#' starts a comment).
#
# lambda                 LASSO regularization weight
# T                      iterations per solver run
# n_matrices, n_signals  sweep size: every matrix gets n_signals signals
# solvers                any of ista_fixed, fista_fixed, hgd_as_ista, hgd_as_fista
# master_seed            root seed; all draws derive from it
# workers                worker threads (results do not depend on this)
# carry_params           true: online parameters carry over between the
#                        signals of one matrix instead of restarting
# p                      smoothing used for the surrogate objective in traces
# trace_limit            per-signal trace CSVs written per solver
# output_dir             overridden by $HGDAS_OUTPUT_DIR or --output-dir
# generator.*            instance family (matrix_kind: iid_gaussian or
#                        correlated_gaussian with correlation rho)
# hgd_as_*.eta_*         meta learning rates; hgd_as_*.p smoothing sharpness
"""


def sample_config_text() -> str:
    return _SAMPLE_HEADER + format_text(ExperimentConfig())
