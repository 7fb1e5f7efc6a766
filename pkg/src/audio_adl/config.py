"""Declarative pipeline configuration read from ``key = value`` files with sections.

Example::

    [paths]
    models = runs/models
    reports = runs/reports

    [resample]
    method = smote
    k_neighbors = 5

    [segment]
    window = 10

    [train]
    max_epochs = 20

    [eval]
    k = 1, 3
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .cnn import TrainConfig
from .frontend import FrontendConfig
from .oversampling import ResampleConfig
from .segment import DEFAULT_WINDOW

REPORT_DIR_ENV = "AUDIO_ADL_REPORT_DIR"


@dataclass(frozen=True)
class PipelineConfig:
    models: str = "models"
    reports: str = "reports"
    label_map: str | None = None
    pca: str | None = None
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    resample: ResampleConfig = field(default_factory=ResampleConfig)
    window: int = DEFAULT_WINDOW
    split_ratio: float = 0.9
    split_seed: int = 0
    extractor_seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    ks: tuple[int, ...] = (1, 3)

    def with_seed(self, seed: int) -> "PipelineConfig":
        """Set every data-shuffling seed at once (the extractor keeps its own)."""
        return replace(
            self,
            split_seed=seed,
            resample=replace(self.resample, seed=seed),
            train=replace(self.train, seed=seed),
        )


def _coerce(dc_type, section: configparser.SectionProxy, name: str):
    kwargs = {}
    known = {f.name: f for f in fields(dc_type)}
    for key, raw in section.items():
        if key not in known:
            raise ValueError(f"[{name}] unknown key {key!r}")
        default = getattr(dc_type(), key)
        kwargs[key] = _parse_like(default, raw, f"[{name}] {key}")
    return kwargs


def _parse_like(default, raw: str, where: str):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(int(p) for p in raw.replace(",", " ").split())
    except ValueError as exc:
        raise ValueError(f"{where}: cannot parse {raw!r}") from exc
    return raw


def load_config(path=None) -> PipelineConfig:
    cfg = PipelineConfig()
    if path is None:
        return cfg
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not parser.read(path):
        raise FileNotFoundError(f"config file {path} not found")
    top = {}
    for section in parser.sections():
        sec = parser[section]
        if section == "paths":
            for key, raw in sec.items():
                if key not in ("models", "reports", "label_map", "pca"):
                    raise ValueError(f"[paths] unknown key {key!r}")
                top[key] = raw.strip()
        elif section == "frontend":
            top["frontend"] = FrontendConfig(**_coerce(FrontendConfig, sec, section))
        elif section == "resample":
            top["resample"] = ResampleConfig(**_coerce(ResampleConfig, sec, section))
        elif section == "train":
            top["train"] = TrainConfig(**_coerce(TrainConfig, sec, section))
        elif section in ("segment", "split", "eval", "embedding"):
            allowed = {
                "segment": {"window": "window"},
                "split": {"ratio": "split_ratio", "seed": "split_seed"},
                "eval": {"k": "ks"},
                "embedding": {"extractor_seed": "extractor_seed"},
            }[section]
            for key, raw in sec.items():
                if key not in allowed:
                    raise ValueError(f"[{section}] unknown key {key!r}")
                attr = allowed[key]
                top[attr] = _parse_like(getattr(cfg, attr), raw, f"[{section}] {key}")
        else:
            raise ValueError(f"unknown config section [{section}]")
    base = Path(path).parent
    for key in ("models", "reports", "label_map", "pca"):
        if key in top and not Path(top[key]).is_absolute():
            top[key] = str(base / top[key])
    return replace(cfg, **top)
