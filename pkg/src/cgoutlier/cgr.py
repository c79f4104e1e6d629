"""Conditional Gaussian regressions, one per continuous vertex.

Each continuous vertex ``j`` is regressed on its parents under a perfect
numbering: an intercept per discrete-parent cell plus slopes on the
continuous parents.  The inhomogeneous fit has its own slopes and variance in
every cell; the homogeneous fit shares both across cells and is computed from
within-cell centred cross-products, so only a ``p x p`` system is solved
(``p`` = number of continuous parents).

Variances are maximum-likelihood estimates (divisor ``n``).  Degrees of
freedom only enter the Beta laws of the variance ratios ``Q``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import linalg

from .errors import InsufficientData, SingularDesign, UnknownVariable, UnseenCell
from .graph import MixedGraph, Parents, PerfectNumbering, RipSequence, continuous_parents, induced_subgraph, perfect_numbering, rip_cliques
from .tabular import Cell, CliqueTables, Dataset, Observation, clique_mle_prob, group_rows

INHOMOGENEOUS = "inhomogeneous"
HOMOGENEOUS = "homogeneous"
MODES = (INHOMOGENEOUS, HOMOGENEOUS)

# "residual": residual df of the fit that excludes the tested point, which is
# what the exact variance-ratio identity uses.  "augmented": the same count
# with the tested point kept in, i.e. one more.
DF_CONVENTIONS = ("residual", "augmented")
DEFAULT_DF_CONVENTION = "residual"

MAX_CONDITION = 1e12


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def _check_convention(df_convention: str) -> None:
    if df_convention not in DF_CONVENTIONS:
        raise ValueError(f"df_convention must be one of {DF_CONVENTIONS}, got {df_convention!r}")


def _condition(a: np.ndarray) -> float:
    """Condition number of a symmetric PSD matrix after diagonal scaling."""
    if a.size == 0:
        return 1.0
    d = np.sqrt(np.diag(a))
    if np.any(d == 0):
        return math.inf
    return float(np.linalg.cond(a / np.outer(d, d)))


@dataclass(frozen=True)
class CellFit:
    """OLS fit within one discrete-parent cell (inhomogeneous model).

    ``coef`` is ``[alpha, beta_1, ..., beta_p]``; ``xtx_inv`` is the inverse
    cross-product matrix of the design ``[1, y_pa]`` used for leverages.
    Cells with fewer than ``p + 1`` rows, or an exactly singular design when
    no residual degrees of freedom are left, carry NaN parameters.
    """

    n: int
    coef: np.ndarray
    sse: float
    xtx_inv: np.ndarray
    sst: float

    @property
    def fitted(self) -> bool:
        return bool(np.all(np.isfinite(self.coef)))

    @property
    def variance(self) -> float:
        return self.sse / self.n if self.n else math.nan


@dataclass(frozen=True)
class CellMeans:
    n: int
    y_mean: float
    x_mean: np.ndarray


@dataclass(frozen=True)
class CgrFactor:
    """Fitted regression of one continuous vertex on its parents."""

    target: str
    parents: Parents
    mode: str
    n_total: int
    cells: Mapping[Cell, CellFit] = field(default_factory=dict)
    # homogeneous only
    beta: np.ndarray | None = None
    saa_inv: np.ndarray | None = None
    sse: float | None = None
    means: Mapping[Cell, CellMeans] = field(default_factory=dict)

    @property
    def homogeneous(self) -> bool:
        return self.mode == HOMOGENEOUS

    @property
    def n_continuous_parents(self) -> int:
        return len(self.parents.continuous)

    def counts(self) -> dict[Cell, int]:
        source = self.means if self.homogeneous else self.cells
        return {c: v.n for c, v in source.items()}

    @property
    def n_nonzero_cells(self) -> int:
        return len(self.means if self.homogeneous else self.cells)

    def intercept(self, cell: Cell) -> float:
        if self.homogeneous:
            m = self._means(cell)
            return float(m.y_mean - self.beta @ m.x_mean)
        return float(self._cell(cell).coef[0])

    def slopes(self, cell: Cell) -> np.ndarray:
        if self.homogeneous:
            return self.beta
        return self._cell(cell).coef[1:]

    def variance(self, cell: Cell) -> float:
        if self.homogeneous:
            self._means(cell)
            return self.sse / self.n_total
        return self._cell(cell).variance

    def mean(self, cell: Cell, x: np.ndarray) -> float:
        return self.intercept(cell) + float(self.slopes(cell) @ np.asarray(x, dtype=float))

    def _cell(self, cell: Cell) -> CellFit:
        try:
            return self.cells[tuple(cell)]
        except KeyError:
            raise UnseenCell(f"{self.target}: parent cell {tuple(cell)} was not observed") from None

    def _means(self, cell: Cell) -> CellMeans:
        try:
            return self.means[tuple(cell)]
        except KeyError:
            raise UnseenCell(f"{self.target}: parent cell {tuple(cell)} was not observed") from None

    def df_homogeneous(self) -> int:
        """|n| - p - |I+| for the data this factor was fitted on."""
        return self.n_total - self.n_continuous_parents - self.n_nonzero_cells


def _factor_arrays(data: Dataset, j: str, parents: Parents) -> tuple[np.ndarray, np.ndarray]:
    y = data.continuous[:, data.continuous_positions([j])[0]]
    x = data.continuous[:, data.continuous_positions(parents.continuous)]
    return y, x


def _ols_cell(y: np.ndarray, x: np.ndarray, target: str, cell: Cell) -> CellFit:
    n, p = x.shape
    sst = float(np.sum((y - y.mean()) ** 2)) if n else 0.0
    design = np.column_stack([np.ones(n), x])
    nan_fit = CellFit(n, np.full(p + 1, np.nan), math.nan, np.full((p + 1, p + 1), np.nan), sst)
    if n < p + 1:
        return nan_fit
    _, r = np.linalg.qr(design, mode="reduced")
    xtx = r.T @ r
    if _condition(xtx) > MAX_CONDITION:
        if n == p + 1:
            return nan_fit
        raise SingularDesign(f"{target}: design in parent cell {cell} is singular (collinear continuous parents)")
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - design @ coef
    rinv = linalg.solve_triangular(r, np.eye(p + 1))
    return CellFit(n, coef, float(resid @ resid), rinv @ rinv.T, sst)


def fit_inhomogeneous(data: Dataset, j: str, parents: Parents) -> CgrFactor:
    """Per-cell OLS of ``j`` on its continuous parents."""
    y, x = _factor_arrays(data, j, parents)
    cells = {}
    for cell, rows in group_rows(data, parents.discrete).items():
        cells[cell] = _ols_cell(y[rows], x[rows], j, cell)
    return CgrFactor(j, parents, INHOMOGENEOUS, data.n_rows, cells)


def fit_homogeneous(data: Dataset, j: str, parents: Parents) -> CgrFactor:
    """Shared-slope, shared-variance fit via within-cell centring."""
    y, x = _factor_arrays(data, j, parents)
    p = x.shape[1]
    means = {}
    gy = np.empty_like(y)
    gx = np.empty_like(x)
    for cell, rows in group_rows(data, parents.discrete).items():
        ym, xm = y[rows].mean(), x[rows].mean(axis=0)
        means[cell] = CellMeans(len(rows), float(ym), xm)
        gy[rows] = y[rows] - ym
        gx[rows] = x[rows] - xm
    df = data.n_rows - p - len(means)
    if df <= 0:
        raise InsufficientData(f"{j}: homogeneous fit has {df} residual degrees of freedom")
    saa = gx.T @ gx
    saj = gx.T @ gy
    sjj = float(gy @ gy)
    if p:
        if _condition(saa) > MAX_CONDITION:
            raise SingularDesign(f"{j}: centred cross-product matrix of continuous parents is singular")
        chol = linalg.cho_factor(saa)
        beta = linalg.cho_solve(chol, saj)
        saa_inv = linalg.cho_solve(chol, np.eye(p))
        sse = sjj - float(saj @ beta)
    else:
        beta = np.zeros(0)
        saa_inv = np.zeros((0, 0))
        sse = sjj
    return CgrFactor(j, parents, HOMOGENEOUS, data.n_rows, beta=beta, saa_inv=saa_inv, sse=max(sse, 0.0), means=means)


def fit_factor(data: Dataset, j: str, parents: Parents, mode: str) -> CgrFactor:
    _check_mode(mode)
    return fit_homogeneous(data, j, parents) if mode == HOMOGENEOUS else fit_inhomogeneous(data, j, parents)


# ---------------------------------------------------------------------------
# variance ratios


@dataclass(frozen=True)
class QStatistic:
    """Variance ratio of the tested point for one continuous vertex.

    ``weight`` multiplies ``-log(value)`` in the deviance: the parent-cell
    count including the tested point (inhomogeneous) or ``|n|``
    (homogeneous).  ``df`` is twice the first Beta shape parameter.
    ``residual`` is the prediction residual of ``z`` under the fit that
    excludes it; ``leverage`` is the hat value of ``z`` in the fit that
    includes it.
    """

    target: str
    value: float
    df: int
    weight: int
    residual_df: int
    cell: Cell
    residual: float
    leverage: float
    studentized: float

    @property
    def term(self) -> float:
        return -self.weight * math.log(self.value) if self.value > 0 else math.inf


def residual_df(mode: str, n_cell: int, p: int, n_total: int = 0, n_cells: int = 0) -> int:
    """Residual df of the fit that leaves the tested point out.

    All counts include the tested point: ``n_cell`` its parent-cell count,
    ``n_total`` the table total and ``n_cells`` the number of non-empty parent
    cells.  A homogeneous term whose cell holds only the tested point is
    degenerate (Q = 1) and reported as -1.
    """
    if mode == HOMOGENEOUS:
        if n_cell < 2:
            return -1
        return n_total - 1 - p - n_cells
    return n_cell - p - 2


def beta_df(res_df: int, df_convention: str = DEFAULT_DF_CONVENTION) -> int:
    _check_convention(df_convention)
    return res_df if df_convention == "residual" else res_df + 1


def term_usable(res_df: int) -> bool:
    return res_df >= 1


def q_statistic(
    data: Dataset,
    z: Observation,
    factor: CgrFactor,
    df_convention: str = DEFAULT_DF_CONVENTION,
) -> QStatistic:
    """Variance ratio for ``z`` from a single fit that excludes it.

    ``factor`` must have been fitted on ``data`` (the observations without
    ``z``).  The externally studentized residual ``r`` of ``z`` gives
    ``Q = nu / (nu + r**2)`` with ``nu`` the residual df of that fit, which is
    exactly the ratio of the maximum-likelihood variances with and without
    the mean restriction on ``z``.
    """
    j = factor.target
    cell = data.project(z, factor.parents.discrete)
    y0 = z.continuous[data.continuous_positions([j])[0]]
    x0 = np.array([z.continuous[k] for k in data.continuous_positions(factor.parents.continuous)])
    p = factor.n_continuous_parents
    counts = factor.counts()
    m = counts.get(cell, 0)
    if m == 0:
        raise UnseenCell(f"{j}: parent cell {cell} has no observations besides the tested one")
    if factor.homogeneous:
        nu = residual_df(HOMOGENEOUS, m + 1, p, factor.n_total + 1, factor.n_nonzero_cells)
    else:
        nu = residual_df(INHOMOGENEOUS, m + 1, p)
    if not term_usable(nu):
        raise InsufficientData(f"{j}: parent cell {cell} leaves {nu} residual degrees of freedom")

    if factor.homogeneous:
        means = factor.means[cell]
        d = x0 - means.x_mean
        e0 = y0 - means.y_mean - float(factor.beta @ d)
        h0 = 1.0 / m + float(d @ factor.saa_inv @ d)
        sse = factor.sse
        weight = factor.n_total + 1
    else:
        fit = factor.cells[cell]
        xa = np.concatenate([[1.0], x0])
        e0 = y0 - float(fit.coef @ xa)
        h0 = float(xa @ fit.xtx_inv @ xa)
        sse = fit.sse
        weight = m + 1

    # e0 is the prediction residual of the excluding fit; the full-fit
    # residual is e0 * (1 - leverage), so r = e0 * sqrt(1 - leverage) / s.
    leverage = h0 / (1.0 + h0)
    s2 = sse / nu
    if s2 > 0:
        r = e0 * math.sqrt((1.0 - leverage) / s2)
    else:
        r = 0.0 if e0 == 0 else math.copysign(math.inf, e0)
    f = r * r
    value = 1.0 if f == 0 else (0.0 if math.isinf(f) else 1.0 / (1.0 + f / nu))
    return QStatistic(j, value, beta_df(nu, df_convention), weight, nu, cell, e0, leverage, r)


# ---------------------------------------------------------------------------
# whole model


@dataclass(frozen=True)
class CgrModel:
    """A decomposable mixed graph fitted to a dataset.

    Holds the discrete-first perfect numbering, the RIP cliques of the
    discrete subgraph with their count tables, and one regression factor per
    continuous vertex in numbering order.
    """

    graph: MixedGraph
    numbering: PerfectNumbering
    rip: RipSequence
    tables: CliqueTables
    factors: Mapping[str, CgrFactor]
    mode: str
    df_convention: str = DEFAULT_DF_CONVENTION

    @property
    def n_total(self) -> int:
        return self.tables.total

    @property
    def homogeneous(self) -> bool:
        return self.mode == HOMOGENEOUS


def check_schema(g: MixedGraph, data: Dataset) -> None:
    labels = set(g.labels)
    cols = {c.name for c in data.columns}
    if labels != cols:
        extra = sorted(cols - labels)
        missing = sorted(labels - cols)
        raise UnknownVariable(f"graph vertices and data columns differ (not in data: {missing}, not in graph: {extra})")
    for c in data.columns:
        if g.kind_of[c.name] != c.kind:
            raise UnknownVariable(f"column {c.name!r} is {c.kind.value} in the data but {g.kind_of[c.name].value} in the graph")


def discrete_structure(g: MixedGraph, numbering: PerfectNumbering | None = None) -> RipSequence:
    """RIP cliques of the discrete subgraph."""
    gd = induced_subgraph(g, g.discrete)
    nb = None
    if numbering is not None:
        nb = PerfectNumbering(tuple(v for v in numbering.order if g.is_discrete(v)))
    return rip_cliques(gd, nb)


def fit_model(
    g: MixedGraph,
    data: Dataset,
    mode: str = INHOMOGENEOUS,
    df_convention: str = DEFAULT_DF_CONVENTION,
    numbering: PerfectNumbering | None = None,
) -> CgrModel:
    _check_mode(mode)
    _check_convention(df_convention)
    check_schema(g, data)
    if numbering is None:
        numbering = perfect_numbering(g)
    rip = discrete_structure(g, numbering)
    tables = CliqueTables.from_data(data, rip)
    factors = {j: fit_factor(data, j, pa, mode) for j, pa in continuous_parents(g, numbering).items()}
    return CgrModel(g, numbering, rip, tables, factors, mode, df_convention)


def log_likelihood(model: CgrModel, data: Dataset) -> float:
    """Log-likelihood of ``data`` at the fitted parameters of ``model``."""
    total = 0.0
    for j, factor in model.factors.items():
        y, x = _factor_arrays(data, j, factor.parents)
        for cell, rows in group_rows(data, factor.parents.discrete).items():
            var = factor.variance(cell)
            if not var > 0:
                raise UnseenCell(f"{j}: parent cell {cell} has no positive variance estimate")
            mu = factor.intercept(cell) + x[rows] @ factor.slopes(cell)
            resid = y[rows] - mu
            total += -0.5 * (len(rows) * math.log(2 * math.pi * var) + float(resid @ resid) / var)
    for cell, rows in group_rows(data, data.discrete_names).items():
        prob = clique_mle_prob(model.tables, cell)
        if prob <= 0:
            raise UnseenCell(f"discrete cell {cell} has zero fitted probability")
        total += len(rows) * math.log(prob)
    return total


def cell_r_squared(data: Dataset, j: str, parents: Parents) -> dict[Cell, float]:
    """Per discrete-parent cell coefficient of determination of the OLS fit.

    NaN where the cell cannot be fitted or the response is constant.
    """
    factor = fit_inhomogeneous(data, j, parents)
    out = {}
    for cell, fit in factor.cells.items():
        if not fit.fitted or fit.sst == 0:
            out[cell] = math.nan
        elif not parents.continuous:
            out[cell] = 0.0
        else:
            out[cell] = max(0.0, 1.0 - fit.sse / fit.sst)  # OLS with intercept: R2 >= 0 up to rounding
    return out
