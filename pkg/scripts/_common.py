"""Helpers shared by the experiment scripts."""

from __future__ import annotations

import dataclasses
from pathlib import Path

from biaslens.bias_detector import DetectorConfig, run_detection
from biaslens.keyword_index import select_keywords
from biaslens.log_model import build_dataset
from biaslens.synth import SynthConfig, simulate

ROOT = Path(__file__).resolve().parent.parent
DEFAULT_CONFIG = ROOT / "tests" / "data" / "planted10.json"


def load_config(path: str | Path, seed: int | None = None, null: bool = False) -> SynthConfig:
    cfg = SynthConfig.load(path)
    if null:
        cfg = dataclasses.replace(
            cfg, planted_biases=tuple(dataclasses.replace(p, multiplier=1.0) for p in cfg.planted_biases))
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    return cfg


def detect(cfg: SynthConfig, detector: DetectorConfig = DetectorConfig(), top_n: int = 100):
    """Simulate ``cfg`` and run detection on every category; returns (simulation, reports)."""
    sim = simulate(cfg)
    reports = []
    for category in cfg.n_articles:
        ds = build_dataset(sim.events, sim.articles, category)
        reports.append(run_detection(ds, select_keywords(ds.catalog, top_n=top_n), config=detector))
    return sim, reports
