"""CLI, file formats, scenario generation, oracles and the end-to-end pipeline."""

from .metrics import EvalReport, evaluate
from .oracles import GuardRefused, oracle_exact_conflict, oracle_min_energy
from .pipeline import PipelineConfig, PipelineError, PipelineResult, run_pipeline
from .scenario import Scenario, ScenarioSpec, generate_scenario
