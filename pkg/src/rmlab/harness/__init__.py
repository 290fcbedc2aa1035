"""Scenario runner: shaper construction, norm-moment estimation, regime
scenarios, the lemma battery, and report emission."""

from .config import ExperimentConfig, ShaperSpec, default_config, load_config
from .report import RunReport, Verdict, emit_report
from .shapers import build_shaper

__all__ = ["ExperimentConfig", "RunReport", "ShaperSpec", "Verdict", "build_shaper",
           "default_config", "emit_report", "load_config"]
