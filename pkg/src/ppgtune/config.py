"""Run configuration: one TOML file with flat keys and per-stage tables.

Every tunable constant of the pipeline appears here with its default; see
``DEFAULT_TOML`` for the full grammar.
"""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import InvalidInput, ParseError
from .filters import Family, FilterSpec
from .optimize import EvalSettings, Level, NsgaParams


@dataclass(frozen=True)
class GridConfig:
    low_min: float = 0.4
    low_max: float = 1.7
    high_min: float = 1.2
    high_max: float = 5.0
    step: float = 0.1


@dataclass(frozen=True)
class EcgConfig:
    family: str = "elliptic"
    order: int = 4
    f_low: float = 1.0
    f_high: float = 15.0
    passband_ripple_db: float = 1.0
    stopband_atten_db: float = 40.0
    smooth_ms: float = 65.0
    refractory_ms: float = 250.0
    refine_ms: float = 80.0
    threshold_frac: float = 0.3
    twave_ms: float = 360.0
    twave_ratio: float = 0.5

    def spec(self) -> FilterSpec:
        return FilterSpec(
            Family(self.family), self.order, self.f_low, self.f_high, self.stopband_atten_db, self.passband_ripple_db
        )

    def detect_kwargs(self) -> dict:
        return dict(
            smooth_ms=self.smooth_ms, refractory_ms=self.refractory_ms, refine_ms=self.refine_ms,
            threshold_frac=self.threshold_frac, twave_ms=self.twave_ms, twave_ratio=self.twave_ratio,
        )


@dataclass(frozen=True)
class StatsConfig:
    alpha: float = 0.05
    cohens_d: str = "paired"


@dataclass(frozen=True)
class MotionConfig:
    enabled: bool = True
    resample_hz: float = 100.0
    f_low: float = 0.2
    f_high: float = 5.0
    order: int = 4


@dataclass(frozen=True)
class ScopeOverride:
    pop_size: int | None = None
    generations: int | None = None


@dataclass(frozen=True)
class Config:
    seed: int = 0
    jobs: int = 1
    window_ms: int = 60000
    scopes: tuple[str, ...] = ("base", "global", "per_person_task")
    cache_dir: str = ""
    base_f_low: float = 0.5
    base_f_high: float = 4.0
    grid: GridConfig = field(default_factory=GridConfig)
    evaluation: EvalSettings = field(default_factory=EvalSettings)
    ecg: EcgConfig = field(default_factory=EcgConfig)
    nsga2: NsgaParams = field(default_factory=NsgaParams)
    scope_overrides: dict = field(default_factory=dict)
    stats: StatsConfig = field(default_factory=StatsConfig)
    motion: MotionConfig = field(default_factory=MotionConfig)

    def __post_init__(self):
        if self.jobs < 1:
            raise InvalidInput("jobs must be >= 1")
        if self.window_ms <= 0:
            raise InvalidInput("window_ms must be positive")
        unknown = set(self.scopes) - {lv.value for lv in Level}
        if unknown:
            raise InvalidInput(f"unknown scope {sorted(unknown)[0]!r}")
        if "base" not in self.scopes:
            raise InvalidInput("the base scope is always run")
        if self.stats.cohens_d not in ("paired", "pooled"):
            raise InvalidInput("stats.cohens_d must be 'paired' or 'pooled'")
        if not 0 < self.stats.alpha < 1:
            raise InvalidInput("stats.alpha must lie in (0, 1)")

    def nsga_for(self, level: str) -> NsgaParams:
        o = self.scope_overrides.get(level)
        if o is None:
            return self.nsga2
        kw = {k: v for k, v in asdict(o).items() if v is not None}
        return replace(self.nsga2, **kw)

    def with_(self, **kw) -> "Config":
        return replace(self, **kw)


# table name -> (dataclass, attribute on Config, key renames toml -> field)
_TABLES = {
    "grid": (GridConfig, "grid", {}),
    "ecg": (EcgConfig, "ecg", {}),
    "nsga2": (NsgaParams, "nsga2", {}),
    "stats": (StatsConfig, "stats", {}),
    "motion": (MotionConfig, "motion", {}),
    "ppg": (EvalSettings, "evaluation", {"order": "ppg_order"}),
    "match": (EvalSettings, "evaluation", {}),
    "ibi": (EvalSettings, "evaluation", {"min_ms": "ibi_min_ms", "max_ms": "ibi_max_ms"}),
}
_PPG_KEYS = {"order", "stopband_atten_db", "ma_window_ms", "min_bpm", "max_bpm", "lookback_ms"}
_MATCH_KEYS = {"tolerance_ms", "lag_search_ms", "lag_step_ms"}
_IBI_KEYS = {"min_ms", "max_ms", "max_dev_frac", "min_valid_beats"}
_TABLE_KEYS = {"ppg": _PPG_KEYS, "match": _MATCH_KEYS, "ibi": _IBI_KEYS}
_FLAT = {"seed", "jobs", "window_ms", "scopes", "cache_dir"}


def _coerce(cls, key, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise InvalidInput(f"{cls.__name__}.{key} must be a boolean")
        return value
    if isinstance(default, int) and not isinstance(default, bool):
        if isinstance(value, bool) or not (isinstance(value, int) or (isinstance(value, float) and value.is_integer())):
            raise InvalidInput(f"{key} must be an integer")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidInput(f"{key} must be a number")
        return float(value)
    if isinstance(default, str) and not isinstance(value, str):
        raise InvalidInput(f"{key} must be a string")
    return value


def _apply(obj, table: dict, renames: dict, allowed=None, where=""):
    defaults = {f.name: getattr(obj, f.name) for f in fields(obj)}
    kw = {}
    for k, v in table.items():
        if allowed is not None and k not in allowed:
            raise InvalidInput(f"unknown key {where}.{k}")
        name = renames.get(k, k)
        if name not in defaults:
            raise InvalidInput(f"unknown key {where}.{k}")
        kw[name] = _coerce(type(obj), k, v, defaults[name])
    return replace(obj, **kw)


def config_from_dict(doc: dict) -> Config:
    cfg = Config()
    flat = {}
    for k, v in doc.items():
        if isinstance(v, dict):
            continue
        if k not in _FLAT:
            raise InvalidInput(f"unknown top-level key {k!r}")
        flat[k] = v
    if "scopes" in flat:
        if not isinstance(flat["scopes"], list) or not all(isinstance(s, str) for s in flat["scopes"]):
            raise InvalidInput("scopes must be a list of strings")
        flat["scopes"] = tuple(flat["scopes"])
    for k in ("seed", "jobs", "window_ms"):
        if k in flat:
            flat[k] = _coerce(Config, k, flat[k], 0)
    if "cache_dir" in flat and not isinstance(flat["cache_dir"], str):
        raise InvalidInput("cache_dir must be a string")
    parts = {}
    for name, table in doc.items():
        if not isinstance(table, dict):
            continue
        if name == "base":
            unknown = set(table) - {"f_low", "f_high"}
            if unknown:
                raise InvalidInput(f"unknown key base.{sorted(unknown)[0]}")
            if "f_low" in table:
                flat["base_f_low"] = _coerce(Config, "base.f_low", table["f_low"], 0.0)
            if "f_high" in table:
                flat["base_f_high"] = _coerce(Config, "base.f_high", table["f_high"], 0.0)
            continue
        if name == "scope":
            overrides = {}
            for level, sub in table.items():
                if level not in {lv.value for lv in Level}:
                    raise InvalidInput(f"unknown scope {level!r}")
                if not isinstance(sub, dict):
                    raise InvalidInput(f"scope.{level} must be a table")
                overrides[level] = _apply(ScopeOverride(), sub, {}, {"pop_size", "generations"}, f"scope.{level}")
                overrides[level] = _int_override(overrides[level])
            flat["scope_overrides"] = overrides
            continue
        if name not in _TABLES:
            raise InvalidInput(f"unknown table [{name}]")
        cls, attr, renames = _TABLES[name]
        current = parts.get(attr, getattr(cfg, attr))
        parts[attr] = _apply(current, table, renames, _TABLE_KEYS.get(name), name)
    try:
        return replace(cfg, **flat, **parts)
    except ValueError as e:
        raise InvalidInput(str(e)) from e


def _int_override(o: ScopeOverride) -> ScopeOverride:
    for k in ("pop_size", "generations"):
        v = getattr(o, k)
        if v is not None and (isinstance(v, bool) or not isinstance(v, int)):
            raise InvalidInput(f"scope override {k} must be an integer")
    return o


def load_config(path) -> Config:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise InvalidInput(f"cannot read config {p}: {e.strerror}") from e
    return loads_config(text, str(p))


def loads_config(text: str, source: str = "<config>") -> Config:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ParseError(str(e), source, getattr(e, "lineno", None)) from e
    return config_from_dict(doc)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return repr(v)


def dumps_config(cfg: Config) -> str:
    """TOML text that loads back to an equal ``Config``."""
    ev = cfg.evaluation
    lines = [
        f"seed = {cfg.seed}",
        f"jobs = {cfg.jobs}",
        f"window_ms = {cfg.window_ms}",
        f"scopes = {_fmt(cfg.scopes)}",
        f"cache_dir = {_fmt(cfg.cache_dir)}",
        "",
        "[base]",
        f"f_low = {cfg.base_f_low!r}",
        f"f_high = {cfg.base_f_high!r}",
    ]

    def table(name, pairs):
        lines.append("")
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {_fmt(v)}" for k, v in pairs)

    table("grid", asdict(cfg.grid).items())
    table("ppg", [
        ("order", ev.ppg_order), ("stopband_atten_db", ev.stopband_atten_db), ("ma_window_ms", ev.ma_window_ms),
        ("min_bpm", ev.min_bpm), ("max_bpm", ev.max_bpm), ("lookback_ms", ev.lookback_ms),
    ])
    table("ecg", asdict(cfg.ecg).items())
    table("match", [("tolerance_ms", ev.tolerance_ms), ("lag_search_ms", ev.lag_search_ms), ("lag_step_ms", ev.lag_step_ms)])
    table("ibi", [
        ("min_ms", ev.ibi_min_ms), ("max_ms", ev.ibi_max_ms), ("max_dev_frac", ev.max_dev_frac),
        ("min_valid_beats", ev.min_valid_beats),
    ])
    table("nsga2", asdict(cfg.nsga2).items())
    for level in sorted(cfg.scope_overrides):
        o = {k: v for k, v in asdict(cfg.scope_overrides[level]).items() if v is not None}
        table(f"scope.{level}", o.items())
    table("stats", asdict(cfg.stats).items())
    table("motion", asdict(cfg.motion).items())
    return "\n".join(lines) + "\n"


DEFAULT_TOML = dumps_config(Config())
