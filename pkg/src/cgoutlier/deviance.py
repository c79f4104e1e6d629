"""Closed-form deviance of a tested observation.

The deviance splits into a discrete term, computed from clique and separator
counts of the table that includes the tested observation, and one term per
continuous vertex, ``-weight * log(Q_j)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cgr import CgrModel, QStatistic, q_statistic, residual_df, term_usable
from .errors import InconsistentTables
from .tabular import Cell, CliqueTables, Dataset, Observation


def g_func(x):
    """x log x for x > 0, else 0 (vectorised)."""
    x = np.asarray(x, dtype=float)
    safe = np.where(x > 0, x, 1.0)
    return np.where(x > 0, x * np.log(safe), 0.0)


def h_func(x):
    """G(x - 1) - G(x)."""
    out = g_func(np.asarray(x, dtype=float) - 1.0) - g_func(x)
    return float(out) if np.ndim(out) == 0 else out


def discrete_deviance_from_counts(clique_counts, separator_counts, total):
    """-2 log Q_D from the counts of the tested cell.

    Equals ``2 * (sum_k H(n_Ck) - sum_{k>=2} H(n_Sk) - H(|n|))``, which is
    nonnegative because H is decreasing on the positive integers.
    ``clique_counts`` has shape ``(..., K)``; ``separator_counts`` has shape
    ``(..., K)`` with column 0 (the empty first separator) ignored.
    """
    c = np.asarray(clique_counts, dtype=float)
    s = np.asarray(separator_counts, dtype=float)[..., 1:]
    return 2.0 * (h_func(c).sum(axis=-1) - h_func(s).sum(axis=-1) - h_func(total))


def discrete_deviance(tables: CliqueTables, i0: Cell) -> float:
    """-2 log Q_D for cell ``i0`` given tables that already include it."""
    total = tables.total
    cc = tables.clique_counts(i0)
    sc = tables.separator_counts(i0)
    if min(cc) < 1:
        raise InconsistentTables(f"cell {tuple(i0)} is absent from tables that should include it")
    return float(discrete_deviance_from_counts(cc, sc, total))


@dataclass(frozen=True)
class ContinuousTerm:
    target: str
    value: float  # -weight * log Q, 0 when skipped
    skipped: bool
    residual_df: int
    weight: int
    q: QStatistic | None = None


@dataclass(frozen=True)
class DevianceBreakdown:
    discrete_term: float
    continuous_terms: tuple[ContinuousTerm, ...]
    total: float

    @property
    def n_skipped(self) -> int:
        return sum(t.skipped for t in self.continuous_terms)


def total_deviance(qstats: list[QStatistic | ContinuousTerm], discrete_term: float) -> DevianceBreakdown:
    """Sum the discrete term and the continuous terms.

    Plain QStatistics count as usable terms; ContinuousTerms already carry
    their skip flag.
    """
    terms = []
    for q in qstats:
        if isinstance(q, ContinuousTerm):
            terms.append(q)
        else:
            terms.append(ContinuousTerm(q.target, q.term, False, q.residual_df, q.weight, q))
    total = discrete_term + sum(t.value for t in terms if not t.skipped)
    return DevianceBreakdown(float(discrete_term), tuple(terms), float(total))


def score_observation(model: CgrModel, data: Dataset, z: Observation) -> DevianceBreakdown:
    """Deviance of ``z`` against ``model`` fitted on ``data`` (which excludes ``z``).

    Continuous terms whose residual df is below one are skipped; the same gate
    is applied to simulated cells.
    """
    data.check_observation(z)
    tables = model.tables.add(z.discrete)
    disc = discrete_deviance(tables, z.discrete)
    n_aug = model.n_total + 1
    terms = []
    for j, factor in model.factors.items():
        cell = data.project(z, factor.parents.discrete)
        counts = factor.counts()
        n_cell = counts.get(cell, 0) + 1
        n_cells = len(counts) + (cell not in counts)
        nu = residual_df(model.mode, n_cell, factor.n_continuous_parents, n_aug, n_cells)
        weight = n_aug if model.homogeneous else n_cell
        if not term_usable(nu):
            terms.append(ContinuousTerm(j, 0.0, True, nu, weight))
            continue
        q = q_statistic(data, z, factor, model.df_convention)
        terms.append(ContinuousTerm(j, q.term, False, nu, weight, q))
    return total_deviance(terms, disc)
