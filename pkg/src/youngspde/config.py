"""Run configuration: an INI-style grammar parsed with :mod:`configparser`.

Sections ``[problem] [grid] [driver] [experiment] [output] [run]`` hold
``key = value`` lines; ``#`` starts a comment. Lists are comma separated.
Unknown sections or keys are errors. Every exponent constraint of the
problem is re-checked at parse time.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import MISSING, dataclass, field, fields

from .errors import ConfigError
from .solver import Drift, InitialDatum, Nonlinearity, ProblemSpec, torus_problem


@dataclass
class GridConfig:
    level: int = 10
    window_len: float = 0.0  # 0 means T/8
    picard_tol: float = 1e-10
    max_iter: int = 60
    scheme: str = "trapezoid"
    refine_levels: int = 4


@dataclass
class DriverConfig:
    kind: str = "fbm"
    H: float = 0.8
    method: str = "cholesky"
    formula: str = "linear"
    c: float = 1.0
    omega: float = 1.0
    a: float = 0.75
    M: int = 1


@dataclass
class ExperimentConfig:
    rhos: tuple = (0.1, 0.01, 0.001)
    thetas: tuple = (0.2,)
    levels: tuple = (8, 12)
    trials: int = 20
    t_list: tuple = (0.01, 0.03, 0.1, 0.3, 1.0)
    target: str = "young_ode"
    rate_levels: tuple = (6, 7, 8, 9, 10, 11, 12)
    oracle: str = "closed_form"
    kolmogorov_beta: float = 0.45
    kolmogorov_theta: float = 0.3
    kolmogorov_m: float = 8.0
    continuity_lo: float = 1.0 / 3.0
    continuity_hi: float = 3.0
    growth_max: float = 2.0
    slope_min: float = 0.4
    rho_max: float = 0.9


@dataclass
class OutputConfig:
    dir: str = "out"
    gammas: tuple = (0.0,)
    modes: tuple = (0, 1, 2)


@dataclass
class RunConfig:
    problem: ProblemSpec = field(default_factory=torus_problem)
    grid: GridConfig = field(default_factory=GridConfig)
    driver: DriverConfig = field(default_factory=DriverConfig)
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    seed: int = 0
    threads: int = 1

    def to_text(self) -> str:
        return emit_config(self)

    def validate(self):
        self.problem.validate()
        g, dr = self.grid, self.driver
        if g.level < 1:
            raise ConfigError(f"grid level must be >= 1, got {g.level}")
        if g.scheme not in ("trapezoid", "left"):
            raise ConfigError(f"scheme must be 'trapezoid' or 'left', got {g.scheme!r}")
        if g.picard_tol <= 0 or g.max_iter < 1:
            raise ConfigError("picard_tol must be > 0 and max_iter >= 1")
        if dr.kind not in ("fbm", "bm", "deterministic"):
            raise ConfigError(f"driver kind must be fbm, bm or deterministic, got {dr.kind!r}")
        if dr.kind == "fbm" and not 0.5 < dr.H < 1.0:
            raise ConfigError(f"H must lie in (1/2, 1), got H = {dr.H}")
        if dr.kind == "fbm" and dr.H <= self.problem.alpha:
            raise ConfigError(f"fBm paths are only α-Hölder for α < H; got α = {self.problem.alpha}, H = {dr.H}")
        if dr.M < 1:
            raise ConfigError(f"ensemble size M must be >= 1, got {dr.M}")
        if self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        return self


# (section, key) -> (object path, attribute, type)
_PROBLEM_KEYS = {
    "T": ("T", float), "n": ("n", int), "l": ("l", int), "e": ("e", int), "d": ("d", int), "K": ("K", int),
    "alpha": ("alpha", float), "beta": ("beta", float), "gamma": ("gamma", float), "lambda": ("lam", float),
    "mu": ("mu", float), "nu": ("nu", float), "m": ("m", float), "mass": ("mass", float),
    "space": ("space", str), "kappa": ("kappa", float), "continuous": ("continuous", bool),
}
_XI_KEYS = {"xi": ("kind", str), "xi_c": ("c", float), "xi_k": ("k", int), "xi_decay": ("decay", float)}
_F_KEYS = {"f": ("kind", str), "f_c": ("c", float), "f_a": ("a", float)}
_H_KEYS = {"h": ("kind", str), "h_c": ("c", float), "h_a": ("a", float)}
_DRIFT_KEYS = {"g0": ("g0", "floats"), "a0": ("a0", float), "g1": ("g1", "floats"), "a1": ("a1", float),
               "b": ("b", "floats?"), "g": ("g", "floats")}
_SECTION_TYPES = {"grid": GridConfig, "driver": DriverConfig, "experiment": ExperimentConfig,
                  "output": OutputConfig}


def _type_of(cls, name):
    for f in fields(cls):
        if f.name == name:
            default = f.default if f.default is not MISSING else None
            if isinstance(default, tuple):
                return "floats" if any(isinstance(v, float) for v in default) else "ints"
            return type(default)
    raise KeyError(name)


def _convert(raw, typ, key, line):
    try:
        if typ is bool:
            v = raw.strip().lower()
            if v not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return v in ("true", "1", "yes")
        if typ in ("floats", "floats?", "ints"):
            if typ == "floats?" and raw.strip().lower() in ("", "none"):
                return None
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            conv = int if typ == "ints" else float
            return tuple(conv(p) for p in parts)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"line {line}: cannot read {key} = {raw!r} as {getattr(typ, '__name__', typ)}") from None


def _key_lines(text):
    """Map (section, key) to the 1-based line where it is set."""
    out, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        m = re.match(r"^\[(.+)\]$", s)
        if m:
            section = m.group(1).strip()
        elif "=" in s and section:
            out[(section, s.split("=", 1)[0].strip())] = i
    return out


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration text."""
    cp = configparser.ConfigParser(comment_prefixes=("#",), inline_comment_prefixes=("#",),
                                   delimiters=("=",), strict=True, interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"line {exc.lineno}: key outside any section") from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"line {exc.lineno}: duplicate key {exc.option!r} in [{exc.section}]") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"line {exc.lineno}: duplicate section [{exc.section}]") from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else "?"
        raise ConfigError(f"line {lineno}: syntax error, expected 'key = value'") from None
    lines = _key_lines(text)
    cfg = RunConfig()
    known = {"problem", "run", *_SECTION_TYPES}
    for sec in cp.sections():
        if sec not in known:
            raise ConfigError(f"unknown section [{sec}]; expected one of {sorted(known)}")
    if cp.has_section("problem"):
        p = cfg.problem
        xi, f, h, dr = {}, {}, {}, {}
        for key, raw in cp.items("problem"):
            ln = lines.get(("problem", key), "?")
            for table, target in ((_PROBLEM_KEYS, None), (_XI_KEYS, xi), (_F_KEYS, f), (_H_KEYS, h),
                                  (_DRIFT_KEYS, dr)):
                if key in table:
                    attr, typ = table[key]
                    val = _convert(raw, typ, key, ln)
                    if target is None:
                        setattr(p, attr, val)
                    else:
                        target[attr] = val
                    break
            else:
                raise ConfigError(f"line {ln}: unknown key {key!r} in [problem]")
        p.xi = InitialDatum(**{**_asdict(p.xi), **xi})
        p.f = Nonlinearity(**{**_asdict(p.f), **f})
        p.h = Nonlinearity(**{**_asdict(p.h), **h})
        p.drift = Drift(**{**_asdict(p.drift), **dr})
    for sec, cls in _SECTION_TYPES.items():
        if not cp.has_section(sec):
            continue
        obj = getattr(cfg, sec)
        for key, raw in cp.items(sec):
            ln = lines.get((sec, key), "?")
            try:
                typ = _type_of(cls, key)
            except KeyError:
                raise ConfigError(f"line {ln}: unknown key {key!r} in [{sec}]") from None
            setattr(obj, key, _convert(raw, typ, key, ln))
    if cp.has_section("run"):
        for key, raw in cp.items("run"):
            ln = lines.get(("run", key), "?")
            if key not in ("seed", "threads"):
                raise ConfigError(f"line {ln}: unknown key {key!r} in [run]")
            setattr(cfg, key, _convert(raw, int, key, ln))
    return cfg.validate()


def _asdict(obj):
    return {f.name: getattr(obj, f.name) for f in fields(obj)}


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ", ".join(_fmt(x) for x in v)
    if v is None:
        return "none"
    return str(v)


def emit_config(cfg: RunConfig) -> str:
    """Resolved configuration in the parse grammar; parse_config(emit_config(c)) == c."""
    out = ["[problem]"]
    p = cfg.problem
    for key, (attr, _) in _PROBLEM_KEYS.items():
        out.append(f"{key} = {_fmt(getattr(p, attr))}")
    for table, obj in ((_XI_KEYS, p.xi), (_F_KEYS, p.f), (_H_KEYS, p.h), (_DRIFT_KEYS, p.drift)):
        for key, (attr, _) in table.items():
            out.append(f"{key} = {_fmt(getattr(obj, attr))}")
    for sec in _SECTION_TYPES:
        out.append("")
        out.append(f"[{sec}]")
        for k, v in _asdict(getattr(cfg, sec)).items():
            out.append(f"{k} = {_fmt(v)}")
    out += ["", "[run]", f"seed = {cfg.seed}", f"threads = {cfg.threads}"]
    return "\n".join(out) + "\n"


def default_config_text() -> str:
    return emit_config(RunConfig())
