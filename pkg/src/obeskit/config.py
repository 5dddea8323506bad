"""Pipeline configuration.

Every tunable lives in one of the dataclasses below. Files may be JSON or
TOML; unknown keys are rejected so typos never silently fall back to
defaults. Command-line flags override file values.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class IngestConfig:
    canonical_rate_hz: float = 20.0
    accel_gap_s: float = 5.0
    location_gap_s: float = 300.0
    rate_band_hz: tuple = (5.0, 25.0)


@dataclass(frozen=True)
class ActivityConfig:
    band_hz: tuple = (0.5, 3.0)
    filter_order: int = 2
    # sedentary < c1 <= moderate < c2 <= vigorous < c3 <= very_vigorous
    cut_points: tuple = (100.0, 1800.0, 4000.0)
    step_k: dict = field(default_factory=lambda: {"smartphone": 0.6, "smartwatch": 0.45})
    step_context_s: float = 5.0
    min_step_interval_s: float = 0.3
    max_step_interval_s: float = 1.5
    min_peak_height: float = 0.25
    min_bout_peaks: int = 4
    bout_dispersion: float = 0.3


@dataclass(frozen=True)
class LocationConfig:
    eps_m: float = 50.0
    min_pts: int = 10
    min_stay_s: float = 600.0
    split_gap_s: float = 1800.0
    v_ref: float = 1.5
    moveability_window: int = 5
    match_radius_m: float = 75.0
    min_history_days: float = 7.0
    night_hours: tuple = (0, 6)
    school_hours: tuple = (8, 16)


@dataclass(frozen=True)
class TransportConfig:
    frame_s: float = 1.0
    min_trip_s: float = 120.0
    min_accel_coverage: float = 0.5
    median_window: int = 9
    C: float = 1000.0
    psd_bands: int = 5
    psd_max_hz: float = 10.0


@dataclass(frozen=True)
class SleepConfig:
    scorer: str = "cole"
    cole_weights: tuple = (106.0, 54.0, 58.0, 76.0, 230.0, 74.0, 67.0)
    cole_scale: float = 0.001
    cole_threshold: float = 1.0
    cole_count_scale: float = 1.0
    sadeh_coefs: tuple = (7.601, 0.065, 1.08, 0.056, 0.703)
    sadeh_nat_range: tuple = (50.0, 100.0)
    sadeh_count_scale: float = 1.0
    merge_gap_min: int = 20
    min_session_min: int = 60
    nonwear_zero_min: int = 60


@dataclass(frozen=True)
class GeoConfig:
    vote_precision: int = 7
    export_precisions: tuple = (5, 6, 7)
    k_anon: int = 5
    vote_mode: str = "visit"
    vote_interval_s: float = 900.0
    min_visit_s: float = 300.0
    day_valid_hours: float = 8.0
    min_valid_days: int = 1
    voter_salt: str = "obeskit-default-salt"
    hist_edges: dict = field(default_factory=lambda: {
        "steps_per_hour": (0, 250, 500, 1000, 2000, 4000, 1e9),
        "counts_per_minute": (0, 100, 1800, 4000, 1e9),
    })


@dataclass(frozen=True)
class EvalConfig:
    max_dist_m: float = 100.0
    min_overlap: float = 0.5


@dataclass(frozen=True)
class PipelineConfig:
    inputs: tuple = ()
    gazetteer: Optional[str] = None
    truth_dir: Optional[str] = None
    out_dir: str = "obeskit_out"
    tz: str = "UTC"
    seed: int = 0
    workers: int = 1
    activity_model: Optional[str] = None
    transport_model: Optional[str] = None
    ingest: IngestConfig = field(default_factory=IngestConfig)
    activity: ActivityConfig = field(default_factory=ActivityConfig)
    location: LocationConfig = field(default_factory=LocationConfig)
    transport: TransportConfig = field(default_factory=TransportConfig)
    sleep: SleepConfig = field(default_factory=SleepConfig)
    geo: GeoConfig = field(default_factory=GeoConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def to_dict(self) -> dict:
        return _jsonable(dataclasses.asdict(self))

    @property
    def hash(self) -> str:
        return config_hash(self)


_SECTIONS = {
    "ingest": IngestConfig,
    "activity": ActivityConfig,
    "location": LocationConfig,
    "transport": TransportConfig,
    "sleep": SleepConfig,
    "geo": GeoConfig,
    "eval": EvalConfig,
}


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _freeze(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    if isinstance(value, dict):
        return {k: _freeze(v) for k, v in value.items()}
    return value


def _build(cls, data: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS and cls is PipelineConfig:
            if not isinstance(value, dict):
                raise ConfigError(f"section {key!r} must be a table")
            kwargs[key] = _build(_SECTIONS[key], value, f"{where}.{key}")
        elif key == "inputs":
            kwargs[key] = tuple(dict(v) for v in value)
        else:
            kwargs[key] = _freeze(value)
    return cls(**kwargs)


def from_dict(data: dict) -> PipelineConfig:
    cfg = _build(PipelineConfig, data, "config")
    validate(cfg)
    return cfg


def load_config(path: Optional[str | Path] = None, overrides: Optional[dict] = None) -> PipelineConfig:
    """Read a JSON or TOML config file and apply flat top-level overrides.

    Precedence, lowest to highest: dataclass defaults, file, ``overrides``.
    """
    data: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        text = path.read_text()
        try:
            if path.suffix.lower() == ".toml":
                data = tomllib.loads(text)
            else:
                data = json.loads(text)
        except (ValueError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        base = path.parent
        for key in ("gazetteer", "truth_dir", "activity_model", "transport_model"):
            if data.get(key):
                data[key] = str((base / data[key]).resolve()) if not Path(data[key]).is_absolute() else data[key]
        if "out_dir" in data and not Path(data["out_dir"]).is_absolute():
            data["out_dir"] = str((base / data["out_dir"]).resolve())
        resolved = []
        for entry in data.get("inputs", []):
            entry = dict(entry)
            for key in ("accel", "location"):
                if entry.get(key) and not Path(entry[key]).is_absolute():
                    entry[key] = str((base / entry[key]).resolve())
            resolved.append(entry)
        if "inputs" in data:
            data["inputs"] = resolved
    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value
    return from_dict(data)


def validate(cfg: PipelineConfig) -> None:
    lo, hi = cfg.ingest.rate_band_hz
    if not 0 < lo < hi:
        raise ConfigError("ingest.rate_band_hz must be increasing and positive")
    c = cfg.activity.cut_points
    if len(c) != 3 or not (0 <= c[0] < c[1] < c[2]):
        raise ConfigError("activity.cut_points must be three increasing values")
    if cfg.sleep.scorer not in ("cole", "sadeh"):
        raise ConfigError("sleep.scorer must be 'cole' or 'sadeh'")
    if cfg.transport.median_window % 2 != 1:
        raise ConfigError("transport.median_window must be odd")
    if not 1 <= cfg.geo.vote_precision <= 12:
        raise ConfigError("geo.vote_precision must be within 1..12")
    if cfg.geo.vote_mode not in ("visit", "interval"):
        raise ConfigError("geo.vote_mode must be 'visit' or 'interval'")
    if cfg.geo.k_anon < 1:
        raise ConfigError("geo.k_anon must be >= 1")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    for entry in cfg.inputs:
        extra = set(entry) - {"subject", "accel", "location", "device", "tz"}
        if extra:
            raise ConfigError(f"unknown input key(s): {', '.join(sorted(extra))}")
        if "subject" not in entry:
            raise ConfigError("every input needs a 'subject'")


def config_hash(cfg: PipelineConfig) -> str:
    # workers and out_dir affect scheduling and placement, never content
    d = cfg.to_dict()
    d.pop("workers", None)
    d.pop("out_dir", None)
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
