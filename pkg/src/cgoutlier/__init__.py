"""Exact likelihood-ratio outlier tests in decomposable mixed graphical models."""

from .cgr import CgrFactor, CgrModel, QStatistic, cell_r_squared, fit_homogeneous, fit_inhomogeneous, fit_model, log_likelihood, q_statistic
from .deviance import DevianceBreakdown, discrete_deviance, h_func, score_observation, total_deviance
from .errors import (
    ArityMismatch,
    CgOutlierError,
    InconsistentTables,
    InsufficientData,
    MissingValue,
    NotDecomposable,
    ParseError,
    SingularDesign,
    UnknownLevel,
    UnknownVariable,
    UnknownVertex,
    UnseenCell,
    UnseenLevel,
)
from .graph import (
    MixedGraph,
    PerfectNumbering,
    RipSequence,
    VertexKind,
    continuous_parents,
    induced_subgraph,
    is_decomposable,
    perfect_numbering,
    rip_cliques,
    star_graph,
)
from .montecarlo import NullSample, TestResult, outlier_test, simulate_cell, simulate_null_deviances, test_with_model
from .tabular import CliqueTables, Column, ContingencyTable, Dataset, Observation, build_table, cell_indices, clique_mle_prob, marginal_count

__version__ = "0.1.0"

__all__ = [
    "ArityMismatch",
    "CgOutlierError",
    "CgrFactor",
    "CgrModel",
    "CliqueTables",
    "Column",
    "ContingencyTable",
    "Dataset",
    "DevianceBreakdown",
    "InconsistentTables",
    "InsufficientData",
    "MissingValue",
    "MixedGraph",
    "NotDecomposable",
    "NullSample",
    "Observation",
    "ParseError",
    "PerfectNumbering",
    "QStatistic",
    "RipSequence",
    "SingularDesign",
    "TestResult",
    "UnknownLevel",
    "UnknownVariable",
    "UnknownVertex",
    "UnseenCell",
    "UnseenLevel",
    "VertexKind",
    "build_table",
    "cell_indices",
    "cell_r_squared",
    "clique_mle_prob",
    "continuous_parents",
    "discrete_deviance",
    "fit_homogeneous",
    "fit_inhomogeneous",
    "fit_model",
    "h_func",
    "induced_subgraph",
    "is_decomposable",
    "log_likelihood",
    "marginal_count",
    "outlier_test",
    "perfect_numbering",
    "q_statistic",
    "rip_cliques",
    "score_observation",
    "simulate_cell",
    "simulate_null_deviances",
    "star_graph",
    "test_with_model",
    "total_deviance",
]
