"""Small builders for datasets used across the test modules."""

from __future__ import annotations

import numpy as np

from cgoutlier.graph import MixedGraph, VertexKind
from cgoutlier.tabular import Column, Dataset

D, C = VertexKind.DISCRETE, VertexKind.CONTINUOUS


def make_dataset(disc: dict[str, int], cont: list[str], dmat, cmat) -> Dataset:
    """Dataset with discrete columns ``disc`` (name -> number of levels) first."""
    columns = [Column(n, D, tuple(str(k) for k in range(m))) for n, m in disc.items()]
    columns += [Column(n, C) for n in cont]
    n = len(dmat) if len(disc) else len(cmat)
    dmat = np.asarray(dmat, dtype=np.int64).reshape(n, len(disc))
    cmat = np.asarray(cmat, dtype=float).reshape(n, len(cont))
    return Dataset(tuple(columns), dmat, cmat)


def dataset_for_graph(g: MixedGraph, dmat, cmat, levels: int = 2) -> Dataset:
    return make_dataset({v: levels for v in g.discrete}, list(g.continuous), dmat, cmat)


def random_discrete_data(rng: np.random.Generator, g: MixedGraph, n: int, levels: int = 2) -> Dataset:
    """Skewed random cells so that some cells are empty and counts vary."""
    s = len(g.discrete)
    probs = rng.dirichlet(np.full(levels**s, 0.7)) if s else np.ones(1)
    flat = rng.choice(len(probs), size=n, p=probs)
    dmat = np.array(np.unravel_index(flat, (levels,) * s)).T if s else np.zeros((n, 0))
    return dataset_for_graph(g, dmat, np.zeros((n, len(g.continuous))), levels)


def random_regression_instance(rng: np.random.Generator, n_disc: int, p: int, min_cell: int = 2):
    """Data and a tested row for one regression factor ``y`` on ``pa``.

    Returns ``(data, z, parents)`` where ``data`` excludes ``z`` and every
    parent cell present in ``data`` holds at least ``min_cell`` rows; ``z``
    falls into an observed cell.
    """
    from cgoutlier.graph import Parents

    disc = {f"g{k}": int(rng.integers(2, 4)) for k in range(n_disc)}
    cont = [f"x{k}" for k in range(p)] + ["y"]
    n_cells_total = int(np.prod(list(disc.values()))) if disc else 1
    used = rng.choice(n_cells_total, size=int(rng.integers(1, min(n_cells_total, 4) + 1)), replace=False)
    sizes = rng.integers(min_cell, min_cell + 12, size=len(used))
    flat = np.repeat(used, sizes)
    n = len(flat)
    dmat = np.array(np.unravel_index(flat, tuple(disc.values()))).T if disc else np.zeros((n, 0), dtype=int)
    x = rng.normal(size=(n, p)) * rng.uniform(0.5, 3.0, size=p) + rng.normal(size=p)
    shift = rng.normal(scale=3.0, size=n_cells_total)[flat]
    slopes = rng.normal(size=p)
    y = shift + x @ slopes + rng.normal(scale=rng.uniform(0.3, 2.0), size=n)
    full = make_dataset(disc, cont, dmat, np.column_stack([x, y]))
    z_row = int(rng.integers(n))
    data = full.drop(z_row)
    z = full.row(z_row)
    # occasionally push the tested value away from the fit
    if rng.random() < 0.5:
        from cgoutlier.tabular import Observation

        z = Observation(z.discrete, z.continuous[:-1] + (z.continuous[-1] + rng.normal(scale=5.0),))
    return data, z, Parents(tuple(disc), tuple(cont[:-1]))
