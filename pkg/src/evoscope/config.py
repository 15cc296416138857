"""Flat ``key = value`` analysis configuration.

Lines are ``key = value``; ``#`` starts a comment; family options use the
``family.`` prefix. Example::

    family.kind = rescaled
    family.inner = constant_decay
    family.shift = -1
    T_max = 50
    alpha = -0.5, 0, 1
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError
from .family import BUILTIN_MATRICES, ConstantDecay, MatrixODE, Rescaled, example1, example2
from .grid import SAMPLING_MODES, TimeGrid

FAMILY_KINDS = ("scalar_example1", "scalar_example2", "constant_decay", "matrix_ode", "rescaled")
DEFAULT_SEED = 0x5EED


@dataclass
class FamilySpec:
    kind: str = "scalar_example1"
    rate: float = 1.0
    shift: float = 0.0
    dim: int = 1
    ode_matrix: str = "damped_rotation"
    inner: str = "constant_decay"
    step: float | None = None  # integrator step; defaults to the grid step


@dataclass
class AnalysisConfig:
    family: FamilySpec = field(default_factory=FamilySpec)
    T_max: float | None = None  # None: catalog grid, else 200
    h: float | None = None
    T_sup: float | None = None
    sampling: str | None = None
    log_points: int = 4000
    alpha: list = field(default_factory=list)
    bracket: tuple | None = None
    tol: float = 0.02
    nu: float = 1.0
    delta: float = 0.5
    n_dirs: int = 4
    n_bumps: int = 20
    seed: int = DEFAULT_SEED
    theta: float = 1e12
    tol_growth: float = 0.05
    tol_tail: float = 1e-3
    c_safety: float = 1.1
    out: str = "out"

    def grid_params(self):
        """``(T_max, h, T_sup, sampling)`` with catalog defaults filled in."""
        from .catalog import CATALOG

        rec = CATALOG.get(self.family.kind)
        g = rec.grid if rec is not None else None
        T_max = self.T_max if self.T_max is not None else (g.T_max if g else 200.0)
        h = self.h if self.h is not None else (g.h if g else 0.01)
        sampling = self.sampling or (g.sampling if g and self.T_max is None else "linear")
        T_sup = self.T_sup
        if T_sup is None:
            T_sup = g.T_sup if (g and g.T_sup and self.T_max is None) else T_max
        return T_max, h, T_sup, sampling


_FLOAT = {"T_max", "h", "T_sup", "tol", "nu", "delta", "theta", "tol_growth", "tol_tail", "c_safety"}
_INT = {"log_points", "n_dirs", "n_bumps"}
_FAMILY_FLOAT = {"rate", "shift", "step"}


def _number(value, lineno, kind=float):
    try:
        if kind is int:
            return int(value, 0)
        x = float(value)
    except ValueError:
        raise ConfigError(f"not a number: {value!r}", lineno) from None
    if not math.isfinite(x):
        raise ConfigError(f"value must be finite: {value!r}", lineno)
    return x


def _list(value, lineno):
    return [_number(v.strip(), lineno) for v in value.split(",") if v.strip()]


def parse_config(text: str) -> AnalysisConfig:
    cfg = AnalysisConfig()
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        if not key or not value:
            raise ConfigError("empty key or value", lineno)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key]})", lineno)
        seen[key] = lineno
        if key.startswith("family."):
            _set_family(cfg.family, key[7:], value, lineno)
        elif key in _FLOAT:
            setattr(cfg, key, _number(value, lineno))
        elif key in _INT:
            setattr(cfg, key, _number(value, lineno, int))
        elif key == "seed":
            cfg.seed = _number(value, lineno, int)
            if not 0 <= cfg.seed < 2 ** 64:
                raise ConfigError("seed must be an unsigned 64-bit integer", lineno)
        elif key == "alpha":
            cfg.alpha = _list(value, lineno)
        elif key == "bracket":
            b = _list(value, lineno)
            if len(b) != 2 or not b[0] < b[1]:
                raise ConfigError("bracket needs two increasing numbers 'lo, hi'", lineno)
            cfg.bracket = tuple(b)
        elif key == "sampling":
            if value not in SAMPLING_MODES:
                raise ConfigError(f"sampling must be one of {SAMPLING_MODES}", lineno)
            cfg.sampling = value
        elif key == "out":
            cfg.out = value
        else:
            raise ConfigError(f"unknown key {key!r}", lineno)
    validate(cfg, seen)
    return cfg


def _set_family(spec: FamilySpec, key, value, lineno):
    if key == "kind" or key == "inner":
        if value not in FAMILY_KINDS or (key == "inner" and value == "rescaled"):
            raise ConfigError(f"unknown family {value!r}", lineno)
        setattr(spec, key, value)
    elif key in _FAMILY_FLOAT:
        setattr(spec, key, _number(value, lineno))
    elif key == "dim":
        spec.dim = _number(value, lineno, int)
        if spec.dim < 1:
            raise ConfigError("family.dim must be >= 1", lineno)
    elif key == "ode_matrix":
        spec.ode_matrix = value
    else:
        raise ConfigError(f"unknown key 'family.{key}'", lineno)


def validate(cfg: AnalysisConfig, lines=None):
    lines = lines or {}
    T_max, h, T_sup, _ = cfg.grid_params()
    if not h > 0:
        raise ConfigError("h must be positive", lines.get("h"))
    if T_max < 10 * h:
        raise ConfigError("T_max must be at least 10 h", lines.get("T_max"))
    if T_sup < T_max:
        raise ConfigError("T_sup must be >= T_max", lines.get("T_sup"))
    if cfg.family.rate < 0:
        raise ConfigError("family.rate must be nonnegative", lines.get("family.rate"))
    if not 0 < cfg.delta < 1:
        raise ConfigError("delta must lie in (0, 1)", lines.get("delta"))
    if cfg.tol <= 0 or cfg.nu <= 0 or cfg.c_safety < 1:
        raise ConfigError("tol and nu must be positive and c_safety >= 1")
    if cfg.family.kind == "matrix_ode" or cfg.family.inner == "matrix_ode":
        _ode_matrix(cfg.family, lines.get("family.ode_matrix"))
    return cfg


def with_overrides(cfg: AnalysisConfig, **kw) -> AnalysisConfig:
    fam = kw.pop("family", None)
    new = dataclasses.replace(cfg, **{k: v for k, v in kw.items() if v is not None})
    if fam is not None:
        if fam not in FAMILY_KINDS:
            raise ConfigError(f"unknown family {fam!r}")
        new.family = dataclasses.replace(cfg.family, kind=fam)
    return validate(new)


def _ode_matrix(spec: FamilySpec, lineno=None):
    if spec.ode_matrix in BUILTIN_MATRICES:
        return spec.ode_matrix
    try:
        vals = np.array([float(v) for v in spec.ode_matrix.replace(",", " ").replace(";", " ").split()])
    except ValueError:
        raise ConfigError(f"family.ode_matrix is neither a built-in nor a number table: "
                          f"{spec.ode_matrix!r}", lineno) from None
    n = int(round(math.sqrt(vals.size)))
    if n * n != vals.size or n < 1:
        raise ConfigError("family.ode_matrix table must hold n*n numbers", lineno)
    return vals.reshape(n, n)


def _build_kind(kind, spec: FamilySpec, h):
    if kind == "scalar_example1":
        return example1()
    if kind == "scalar_example2":
        return example2()
    if kind == "constant_decay":
        return ConstantDecay(spec.rate, spec.dim)
    if kind == "matrix_ode":
        A = _ode_matrix(spec)
        name = A if isinstance(A, str) else "table"
        return MatrixODE(A, step=spec.step or h, name=name)
    raise DomainError(f"cannot build family {kind!r}")


def build_family(cfg: AnalysisConfig):
    _, h, _, _ = cfg.grid_params()
    spec = cfg.family
    if spec.kind == "rescaled":
        return Rescaled(_build_kind(spec.inner, spec, h), spec.shift)
    return _build_kind(spec.kind, spec, h)


def build_grid(cfg: AnalysisConfig) -> TimeGrid:
    T_max, h, T_sup, sampling = cfg.grid_params()
    return TimeGrid.uniform(T_max, h, T_sup, sampling, cfg.log_points)
