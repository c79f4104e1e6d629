"""Datasets of mixed observations and sparse contingency tables over them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ArityMismatch, InconsistentTables, MissingValue, ParseError, UnknownVariable, UnseenLevel
from .graph import RipSequence, VertexKind

Cell = tuple[int, ...]


@dataclass(frozen=True)
class Column:
    name: str
    kind: VertexKind
    levels: tuple[str, ...] | None = None  # discrete only; None until frozen

    @property
    def is_discrete(self) -> bool:
        return self.kind is VertexKind.DISCRETE


@dataclass(frozen=True)
class Observation:
    """One row: level codes of the discrete columns and values of the continuous ones."""

    discrete: Cell
    continuous: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-split storage of mixed observations.

    ``discrete`` is an ``(n, s)`` integer array of level codes and
    ``continuous`` an ``(n, r)`` float array; column order follows the schema
    restricted to each kind.  Level dictionaries are frozen on construction.
    """

    columns: tuple[Column, ...]
    discrete: np.ndarray
    continuous: np.ndarray

    def __post_init__(self):
        d = np.array(self.discrete, dtype=np.int64, ndmin=2)
        c = np.array(self.continuous, dtype=float, ndmin=2)
        if d.shape[1] != len(self.discrete_names) or c.shape[1] != len(self.continuous_names):
            raise ValueError("data blocks do not match the column schema")
        if d.shape[0] != c.shape[0]:
            raise ValueError("discrete and continuous blocks have different row counts")
        d.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "discrete", d)
        object.__setattr__(self, "continuous", c)

    @classmethod
    def from_records(cls, columns: Sequence[Column], records: Iterable[Mapping[str, object]]) -> "Dataset":
        """Build from dict-like rows holding level names and floats.

        Discrete columns without an explicit level list get one from the data
        (sorted as strings, or numerically when every level parses as a number).
        """
        records = list(records)
        cols = []
        for col in columns:
            if col.is_discrete and col.levels is None:
                seen = {str(rec[col.name]) for rec in records}
                cols.append(Column(col.name, col.kind, sorted_levels(seen)))
            else:
                cols.append(col)
        proto = cls(tuple(cols), np.zeros((0, sum(c.is_discrete for c in cols))), np.zeros((0, sum(not c.is_discrete for c in cols))))
        obs = [proto.encode(rec, row=k) for k, rec in enumerate(records)]
        return proto.with_rows(obs)

    # -- schema ---------------------------------------------------------

    @cached_property
    def discrete_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns if c.is_discrete)

    @cached_property
    def continuous_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns if not c.is_discrete)

    @cached_property
    def discrete_index(self) -> dict[str, int]:
        return {n: k for k, n in enumerate(self.discrete_names)}

    @cached_property
    def continuous_index(self) -> dict[str, int]:
        return {n: k for k, n in enumerate(self.continuous_names)}

    @cached_property
    def column_by_name(self) -> dict[str, Column]:
        return {c.name: c for c in self.columns}

    def levels(self, name: str) -> tuple[str, ...]:
        return self.column_by_name[name].levels

    def n_levels(self, name: str) -> int:
        return len(self.levels(name))

    @property
    def n_rows(self) -> int:
        return self.discrete.shape[0]

    def __len__(self) -> int:
        return self.n_rows

    def discrete_positions(self, names: Iterable[str]) -> list[int]:
        out = []
        for n in names:
            if n not in self.discrete_index:
                raise UnknownVariable(f"{n!r} is not a discrete column")
            out.append(self.discrete_index[n])
        return out

    def continuous_positions(self, names: Iterable[str]) -> list[int]:
        out = []
        for n in names:
            if n not in self.continuous_index:
                raise UnknownVariable(f"{n!r} is not a continuous column")
            out.append(self.continuous_index[n])
        return out

    def canonical(self, names: Iterable[str]) -> tuple[str, ...]:
        """Discrete names sorted into schema order."""
        return tuple(sorted(set(names), key=lambda n: self.discrete_positions([n])[0]))

    # -- rows -----------------------------------------------------------

    def row(self, k: int) -> Observation:
        return Observation(
            tuple(int(x) for x in self.discrete[k]),
            tuple(float(x) for x in self.continuous[k]),
        )

    def rows(self) -> Iterable[Observation]:
        for k in range(self.n_rows):
            yield self.row(k)

    def with_rows(self, obs: Sequence[Observation]) -> "Dataset":
        if not obs:
            return self
        d = np.array([o.discrete for o in obs], dtype=np.int64).reshape(len(obs), len(self.discrete_names))
        c = np.array([o.continuous for o in obs], dtype=float).reshape(len(obs), len(self.continuous_names))
        return Dataset(self.columns, np.vstack([self.discrete, d]), np.vstack([self.continuous, c]))

    def append(self, obs: Observation) -> "Dataset":
        return self.with_rows([obs])

    def drop(self, k: int) -> "Dataset":
        keep = np.ones(self.n_rows, dtype=bool)
        keep[k] = False
        return self.take(keep)

    def take(self, rows) -> "Dataset":
        return Dataset(self.columns, self.discrete[rows], self.continuous[rows])

    def encode(self, record: Mapping[str, object], row: int | None = None) -> Observation:
        """Turn a dict of raw values (level names, numbers) into an Observation."""
        where = "" if row is None else f" (row {row})"
        disc = []
        for name in self.discrete_names:
            raw = record.get(name)
            if raw is None or str(raw).strip() == "":
                raise MissingValue(f"missing value for column {name!r}{where}")
            levels = self.levels(name)
            key = str(raw).strip()
            if key not in levels:
                raise UnseenLevel(f"level {key!r} of column {name!r}{where} is not among {list(levels)}")
            disc.append(levels.index(key))
        cont = []
        for name in self.continuous_names:
            raw = record.get(name)
            if raw is None or str(raw).strip() == "":
                raise MissingValue(f"missing value for column {name!r}{where}")
            try:
                cont.append(float(raw))
            except (TypeError, ValueError):
                raise ParseError(f"value {raw!r} of column {name!r}{where} is not a number") from None
        return Observation(tuple(disc), tuple(cont))

    def decode(self, obs: Observation) -> dict[str, object]:
        out: dict[str, object] = {}
        for name, code in zip(self.discrete_names, obs.discrete):
            out[name] = self.levels(name)[code]
        for name, value in zip(self.continuous_names, obs.continuous):
            out[name] = value
        return {c.name: out[c.name] for c in self.columns}

    def check_observation(self, obs: Observation) -> None:
        if len(obs.discrete) != len(self.discrete_names) or len(obs.continuous) != len(self.continuous_names):
            raise ArityMismatch("observation does not match the dataset schema")
        for name, code in zip(self.discrete_names, obs.discrete):
            if not 0 <= code < self.n_levels(name):
                raise UnseenLevel(f"level code {code} is out of range for column {name!r}")

    def project(self, obs: Observation, names: Sequence[str]) -> Cell:
        return tuple(obs.discrete[k] for k in self.discrete_positions(names))


def sorted_levels(seen: set[str]) -> tuple[str, ...]:
    try:
        return tuple(sorted(seen, key=float))
    except ValueError:
        return tuple(sorted(seen))


# ---------------------------------------------------------------------------
# contingency tables


@dataclass(frozen=True)
class ContingencyTable:
    """Sparse table of positive counts keyed by cells over ``variables``."""

    variables: tuple[str, ...]
    counts: Mapping[Cell, int] = field(hash=False)
    total: int

    def __post_init__(self):
        if any(v <= 0 for v in self.counts.values()):
            raise ValueError("stored counts must be positive")
        if sum(self.counts.values()) != self.total:
            raise ValueError("total does not match the stored counts")

    def __getitem__(self, cell: Cell) -> int:
        return self.counts.get(tuple(cell), 0)

    def __len__(self) -> int:
        return len(self.counts)

    def marginal(self, b: Sequence[str]) -> "ContingencyTable":
        pos = _positions(self.variables, b)
        out: dict[Cell, int] = {}
        for cell, n in self.counts.items():
            key = tuple(cell[p] for p in pos)
            out[key] = out.get(key, 0) + n
        return ContingencyTable(tuple(b), out, self.total)

    def marginal_count(self, b: Sequence[str], cell: Cell) -> int:
        if len(cell) != len(b):
            raise ArityMismatch(f"cell {cell!r} has {len(cell)} entries for {len(b)} variables")
        pos = _positions(self.variables, b)
        return sum(n for c, n in self.counts.items() if all(c[p] == x for p, x in zip(pos, cell)))

    def add(self, cell: Cell, times: int = 1) -> "ContingencyTable":
        if len(cell) != len(self.variables):
            raise ArityMismatch(f"cell {cell!r} does not match variables {self.variables}")
        counts = dict(self.counts)
        counts[tuple(cell)] = counts.get(tuple(cell), 0) + times
        if counts[tuple(cell)] == 0:
            del counts[tuple(cell)]
        return ContingencyTable(self.variables, counts, self.total + times)


def _positions(variables: Sequence[str], b: Sequence[str]) -> list[int]:
    try:
        return [variables.index(v) for v in b]
    except ValueError:
        raise UnknownVariable(f"{sorted(set(b) - set(variables))} not among table variables {list(variables)}") from None


def build_table(data: Dataset, a: Iterable[str]) -> ContingencyTable:
    names = data.canonical(a)
    if not names:
        return ContingencyTable((), {(): data.n_rows} if data.n_rows else {}, data.n_rows)
    block = data.discrete[:, data.discrete_positions(names)]
    cells, counts = np.unique(block, axis=0, return_counts=True)
    table = {tuple(int(x) for x in c): int(n) for c, n in zip(cells, counts)}
    return ContingencyTable(names, table, data.n_rows)


def marginal_count(t: ContingencyTable, b: Sequence[str], cell: Cell) -> int:
    return t.marginal_count(b, cell)


def cell_indices(data: Dataset, a: Sequence[str], cell: Cell) -> np.ndarray:
    """0-based row indices whose projection onto ``a`` equals ``cell``."""
    if len(cell) != len(a):
        raise ArityMismatch(f"cell {cell!r} has {len(cell)} entries for {len(a)} variables")
    if not a:
        return np.arange(data.n_rows)
    block = data.discrete[:, data.discrete_positions(a)]
    return np.flatnonzero(np.all(block == np.asarray(cell), axis=1))


def group_rows(data: Dataset, a: Sequence[str]) -> dict[Cell, np.ndarray]:
    """Row indices of every observed cell over ``a`` (all rows under ``()`` when empty)."""
    if not a:
        return {(): np.arange(data.n_rows)} if data.n_rows else {}
    block = data.discrete[:, data.discrete_positions(a)]
    cells, inverse = np.unique(block, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(len(cells) + 1))
    return {tuple(int(x) for x in c): order[bounds[k] : bounds[k + 1]] for k, c in enumerate(cells)}


# ---------------------------------------------------------------------------
# clique-factorised discrete MLE


@dataclass(frozen=True)
class CliqueTables:
    """Clique and separator marginals of the discrete part, in RIP order.

    ``variables`` is the full discrete variable set in schema order; cells
    passed to :meth:`prob` and friends are over those variables.
    """

    variables: tuple[str, ...]
    cliques: tuple[ContingencyTable, ...]
    separators: tuple[ContingencyTable, ...]  # separators[0] is the empty set

    @classmethod
    def from_data(cls, data: Dataset, rip: RipSequence) -> "CliqueTables":
        full = build_table(data, data.discrete_names)
        return cls.from_table(full, rip)

    @classmethod
    def from_table(cls, full: ContingencyTable, rip: RipSequence) -> "CliqueTables":
        order = {v: k for k, v in enumerate(full.variables)}

        def canon(vs):
            missing = set(vs) - set(order)
            if missing:
                raise UnknownVariable(f"clique variables {sorted(missing)} are not discrete columns")
            return tuple(sorted(vs, key=order.__getitem__))

        cliques = tuple(full.marginal(canon(c)) for c in rip.cliques)
        seps = tuple(full.marginal(canon(s)) for s in rip.separators)
        return cls(full.variables, cliques, seps)

    @property
    def total(self) -> int:
        totals = {t.total for t in self.cliques + self.separators}
        if len(totals) != 1:
            raise InconsistentTables(f"tables disagree on the total count: {sorted(totals)}")
        return totals.pop()

    @cached_property
    def _clique_pos(self) -> list[list[int]]:
        return [[self.variables.index(v) for v in t.variables] for t in self.cliques]

    @cached_property
    def _sep_pos(self) -> list[list[int]]:
        return [[self.variables.index(v) for v in t.variables] for t in self.separators]

    def clique_counts(self, cell: Cell) -> list[int]:
        return [t[tuple(cell[p] for p in pos)] for t, pos in zip(self.cliques, self._clique_pos)]

    def separator_counts(self, cell: Cell) -> list[int]:
        return [t[tuple(cell[p] for p in pos)] for t, pos in zip(self.separators, self._sep_pos)]

    def prob(self, cell: Cell) -> float:
        return clique_mle_prob(self, cell)

    def add(self, cell: Cell) -> "CliqueTables":
        """Tables with one more observation in ``cell``."""
        return CliqueTables(
            self.variables,
            tuple(t.add(tuple(cell[p] for p in pos)) for t, pos in zip(self.cliques, self._clique_pos)),
            tuple(t.add(tuple(cell[p] for p in pos)) for t, pos in zip(self.separators, self._sep_pos)),
        )


def clique_mle_prob(tables: CliqueTables, cell: Cell) -> float:
    """MLE cell probability from clique and separator marginals.

    Zero when any clique marginal of ``cell`` is unobserved.
    """
    total = tables.total
    if len(cell) != len(tables.variables):
        raise ArityMismatch(f"cell {cell!r} does not cover {tables.variables}")
    num = tables.clique_counts(cell)
    if min(num) == 0:
        return 0.0
    den = tables.separator_counts(cell)[1:]
    # exact integer ratio, correctly rounded once
    return math.prod(num) / (math.prod(den) * total)
