"""Monte Carlo null distribution of the deviance and the outlier test.

Null replicates draw a discrete cell from the fitted decomposable table by the
chain rule over RIP cliques, then one Beta variate per usable continuous
vertex.  The continuous observations themselves are never simulated.

Randomness is keyed by ``(seed, block, stream)`` through
:class:`numpy.random.SeedSequence`: replicates are processed in fixed blocks of
:data:`BLOCK_SIZE`, stream 0 of a block drives the cell draws and stream
``k + 1`` the Beta draws of the ``k``-th continuous vertex.  Every block is
drawn in full and the last one truncated, so replicate ``i`` depends only on
``(seed, i)``: blocks can run on any number of threads, and a longer run
extends a shorter one.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cgr import CgrModel, beta_df, fit_model
from .deviance import DevianceBreakdown, discrete_deviance_from_counts, score_observation
from .graph import MixedGraph
from .tabular import Cell, CliqueTables, Dataset, Observation

BLOCK_SIZE = 1024
DEFAULT_NSIM = 5000
THREADS_ENV = "CGOUTLIER_THREADS"


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# cell simulation


@dataclass(frozen=True)
class _CliqueSampler:
    var_pos: np.ndarray  # positions of clique variables in the full cell
    sep_pos: np.ndarray  # positions of separator variables in the full cell
    entries: np.ndarray  # (E, |C|) clique cells sorted by separator group
    counts: np.ndarray  # (E,)
    cum: np.ndarray  # (E,) running count totals
    group_start: np.ndarray  # cumulative count before each group
    group_total: np.ndarray  # separator count of each group
    group_of: dict  # separator cell -> group id


class CellSampler:
    """Chain-rule sampler of full discrete cells from clique tables."""

    def __init__(self, tables: CliqueTables):
        self.tables = tables
        self.total = tables.total
        self.n_vars = len(tables.variables)
        self._samplers = []
        for ct, st in zip(tables.cliques, tables.separators):
            var_pos = np.array([tables.variables.index(v) for v in ct.variables], dtype=np.int64)
            sep_in_clique = [ct.variables.index(v) for v in st.variables]
            cells = sorted(ct.counts, key=lambda c: (tuple(c[k] for k in sep_in_clique), c))
            entries = np.array(cells, dtype=np.int64).reshape(len(cells), len(ct.variables))
            counts = np.array([ct.counts[c] for c in cells], dtype=np.int64)
            group_of: dict = {}
            starts, totals = [], []
            running = 0
            for c, n in zip(cells, counts):
                key = tuple(c[k] for k in sep_in_clique)
                if key not in group_of:
                    group_of[key] = len(starts)
                    starts.append(running)
                    totals.append(0)
                totals[-1] += int(n)
                running += int(n)
            self._samplers.append(
                _CliqueSampler(
                    var_pos,
                    np.array([tables.variables.index(v) for v in st.variables], dtype=np.int64),
                    entries,
                    counts,
                    np.cumsum(counts),
                    np.array(starts, dtype=np.int64),
                    np.array(totals, dtype=np.int64),
                    group_of,
                )
            )

    def sample(self, size: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Draw ``size`` cells.

        Returns the cells ``(size, s)`` plus, per replicate, the clique counts
        and separator counts ``(size, K)`` of the drawn cell.
        """
        cells = np.zeros((size, self.n_vars), dtype=np.int64)
        k_total = len(self._samplers)
        cc = np.zeros((size, k_total), dtype=np.int64)
        sc = np.zeros((size, k_total), dtype=np.int64)
        for k, smp in enumerate(self._samplers):
            if len(smp.sep_pos):
                keys, inverse = np.unique(cells[:, smp.sep_pos], axis=0, return_inverse=True)
                ids = np.array([smp.group_of[tuple(int(x) for x in key)] for key in keys], dtype=np.int64)
                group = ids[inverse.reshape(-1)]
            else:
                group = np.zeros(size, dtype=np.int64)
            offset = rng.integers(0, smp.group_total[group])
            idx = np.searchsorted(smp.cum, smp.group_start[group] + offset, side="right")
            cells[:, smp.var_pos] = smp.entries[idx]
            cc[:, k] = smp.counts[idx]
            sc[:, k] = smp.group_total[group]
        return cells, cc, sc


def simulate_cell(tables: CliqueTables, rng: np.random.Generator) -> Cell:
    cells, _, _ = CellSampler(tables).sample(1, rng)
    return tuple(int(x) for x in cells[0])


# ---------------------------------------------------------------------------
# null deviances


@dataclass(frozen=True)
class _TermSpec:
    target: str
    parent_pos: np.ndarray
    n_cont_parents: int
    counts: dict  # parent cell -> count, including the tested point


@dataclass(frozen=True)
class NullSample:
    deviances: np.ndarray
    n_sim: int
    seed: int
    skipped: dict = field(default_factory=dict)  # target -> replicates with the term gated off

    def cdf(self, x: float) -> float:
        return empirical_cdf(self.deviances, x)

    def summary(self) -> dict:
        d = self.deviances
        q = np.quantile(d, [0.5, 0.9, 0.95, 0.99]) if len(d) else [math.nan] * 4
        return {
            "n_sim": self.n_sim,
            "seed": self.seed,
            "mean": float(d.mean()) if len(d) else math.nan,
            "sd": float(d.std(ddof=1)) if len(d) > 1 else math.nan,
            "min": float(d.min()) if len(d) else math.nan,
            "max": float(d.max()) if len(d) else math.nan,
            "quantiles": {"0.5": float(q[0]), "0.9": float(q[1]), "0.95": float(q[2]), "0.99": float(q[3])},
            "skipped_terms": dict(self.skipped),
        }


def empirical_cdf(sample: np.ndarray, x: float) -> float:
    """Fraction of ``sample`` not exceeding ``x``."""
    sample = np.asarray(sample)
    if not len(sample):
        return math.nan
    return float(np.count_nonzero(sample <= x)) / len(sample)


def _term_specs(model: CgrModel, z_cell: Cell | None) -> list[_TermSpec]:
    variables = model.tables.variables
    specs = []
    for j, factor in model.factors.items():
        pos = np.array([variables.index(v) for v in factor.parents.discrete], dtype=np.int64)
        counts = factor.counts()
        if z_cell is not None:
            key = tuple(z_cell[p] for p in pos)
            counts[key] = counts.get(key, 0) + 1
        specs.append(_TermSpec(j, pos, factor.n_continuous_parents, counts))
    return specs


def simulate_null_deviances(
    model: CgrModel,
    n_sim: int = DEFAULT_NSIM,
    seed: int = 0,
    threads: int = 1,
    z_cell: Cell | None = None,
) -> NullSample:
    """Simulate ``n_sim`` deviances under the null.

    The counts used are those of ``model``; pass ``z_cell`` (the tested
    observation's discrete cell) when ``model`` was fitted without it, so the
    tables are augmented by that one observation first.
    """
    tables = model.tables if z_cell is None else model.tables.add(tuple(z_cell))
    sampler = CellSampler(tables)
    specs = _term_specs(model, z_cell)
    n_total = tables.total
    n_blocks = -(-n_sim // BLOCK_SIZE)

    def run_block(b: int):
        # always draw a full block so replicate k depends only on (seed, k)
        size = BLOCK_SIZE
        keep = min(BLOCK_SIZE, n_sim - b * BLOCK_SIZE)
        cell_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b, 0)))
        cells, cc, sc = sampler.sample(size, cell_rng)
        dev = discrete_deviance_from_counts(cc, sc, n_total)
        skipped = {}
        for k, spec in enumerate(specs):
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b, k + 1)))
            n_cell = _lookup_counts(cells[:, spec.parent_pos], spec.counts)
            if model.homogeneous:
                nu = np.where(n_cell >= 2, n_total - 1 - spec.n_cont_parents - len(spec.counts), -1)
                weight = np.full(size, n_total, dtype=float)
            else:
                nu = n_cell - spec.n_cont_parents - 2
                weight = n_cell.astype(float)
            usable = nu >= 1
            df = beta_df(nu, model.df_convention)
            q = rng.beta(np.where(usable, df, 2) / 2.0, 0.5)
            dev = dev + np.where(usable, -weight * np.log(q), 0.0)
            skipped[spec.target] = int(keep - usable[:keep].sum())
        return dev[:keep], skipped

    if threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_block, range(n_blocks)))
    else:
        results = [run_block(b) for b in range(n_blocks)]
    deviances = np.concatenate([r[0] for r in results]) if results else np.zeros(0)
    skipped = {s.target: sum(r[1][s.target] for r in results) for s in specs}
    return NullSample(deviances, n_sim, seed, skipped)


def _lookup_counts(parent_cells: np.ndarray, counts: dict) -> np.ndarray:
    if parent_cells.shape[1] == 0:
        return np.full(parent_cells.shape[0], counts.get((), 0), dtype=np.int64)
    keys, inverse = np.unique(parent_cells, axis=0, return_inverse=True)
    values = np.array([counts.get(tuple(int(x) for x in key), 0) for key in keys], dtype=np.int64)
    return values[inverse.reshape(-1)]


# ---------------------------------------------------------------------------
# the test


@dataclass(frozen=True)
class TestResult:
    observed: DevianceBreakdown
    cdf: float
    alpha: float
    null: NullSample

    __test__ = False  # not a pytest class

    @property
    def deviance(self) -> float:
        return self.observed.total

    @property
    def p_value(self) -> float:
        return 1.0 - self.cdf

    @property
    def outlier(self) -> bool:
        return self.cdf >= 1.0 - self.alpha


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def test_with_model(
    model: CgrModel,
    data: Dataset,
    z: Observation,
    n_sim: int = DEFAULT_NSIM,
    alpha: float = 0.05,
    seed: int = 0,
    threads: int = 1,
    null: NullSample | None = None,
) -> TestResult:
    """Outlier test of ``z`` against ``model`` fitted on ``data`` (without ``z``).

    A precomputed ``null`` sample is used as is; it must come from the same
    augmented counts for the test to be exact.
    """
    _check_alpha(alpha)
    observed = score_observation(model, data, z)
    if null is None:
        null = simulate_null_deviances(model, n_sim, seed, threads, z_cell=z.discrete)
    return TestResult(observed, empirical_cdf(null.deviances, observed.total), alpha, null)


test_with_model.__test__ = False


def outlier_test(
    g: MixedGraph,
    data: Dataset,
    z: Observation,
    n_sim: int = DEFAULT_NSIM,
    alpha: float = 0.05,
    mode: str = "inhomogeneous",
    seed: int = 0,
    threads: int = 1,
    df_convention: str = "residual",
) -> TestResult:
    """Test whether ``z`` is an outlier relative to ``data`` under graph ``g``.

    ``z`` is appended to ``data`` for the null model; the alternative fit is
    the one on ``data`` alone.
    """
    _check_alpha(alpha)
    data.check_observation(z)
    model = fit_model(g, data, mode, df_convention)
    return test_with_model(model, data, z, n_sim, alpha, seed, threads)


outlier_test.__test__ = False
