from .manifest import CaseManifestEntry, ExperimentConfig, load_config, load_manifest
from .report import (
    Report,
    canonical_json,
    comparison_rows,
    delta_percent,
    emit_report,
    growth_report,
    load_baselines,
    render_comparison_table,
)
from .runner import generate_phantom_cases, run_case, run_experiment

__all__ = [
    "CaseManifestEntry",
    "ExperimentConfig",
    "Report",
    "canonical_json",
    "comparison_rows",
    "delta_percent",
    "emit_report",
    "generate_phantom_cases",
    "growth_report",
    "load_baselines",
    "load_config",
    "load_manifest",
    "render_comparison_table",
    "run_case",
    "run_experiment",
]
