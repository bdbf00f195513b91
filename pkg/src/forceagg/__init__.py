"""Dempster-Shafer clustering of intelligence reports and template-based force aggregation."""

from .aggregate import ForceElement, aggregate, final_fit
from .annealer import AnnealConfig, anneal, critical_temperature
from .evidence import (
    ConflictMatrix,
    HardAssignment,
    Proposition,
    Report,
    TypeUniverse,
    build_conflict_matrix,
    cluster_conflict,
    energy,
    make_report,
)
from .refine import RefineOptions, refined_cluster
from .specification import ClusterPartition, CorePartition, credibility_table, extract_cores
from .templates import Template, TemplateFit, fit, make_template, select_template

__version__ = "0.1.0"
