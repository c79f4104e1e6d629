"""Synthetic conditional-Gaussian data on small reference graphs.

Used by the test-suite and handy for trying the CLI without real data.
"""

from __future__ import annotations

import numpy as np

from .graph import MixedGraph, VertexKind
from .tabular import Column, Dataset, Observation

D, C = VertexKind.DISCRETE, VertexKind.CONTINUOUS


def example_graph() -> MixedGraph:
    """Six-vertex decomposable graph: discrete b, c, f and continuous a, d, e."""
    return MixedGraph.build(
        [("a", C), ("b", D), ("c", D), ("d", C), ("e", C), ("f", D)],
        [("a", "b"), ("b", "c"), ("b", "d"), ("c", "d"), ("c", "e"), ("d", "e")],
    )


def example_columns() -> tuple[Column, ...]:
    return tuple(
        Column(v, k, ("0", "1") if k is D else None)
        for v, k in [("a", C), ("b", D), ("c", D), ("d", C), ("e", C), ("f", D)]
    )


_BC_PROBS = np.array([[0.3, 0.2], [0.15, 0.35]])  # P(b, c)
_F_PROB = 0.4
_D_MEAN = np.array([[0.0, 2.0], [-1.0, 1.5]])  # by (b, c)
_D_SD = np.array([[1.0, 0.5], [2.0, 1.5]])
_E_ALPHA = np.array([1.0, -2.0])  # by c
_E_BETA = np.array([0.8, -1.5])
_E_SD = np.array([0.7, 1.2])
_A_MEAN = np.array([5.0, -3.0])  # by b
_A_SD = np.array([1.0, 2.5])


def example_sd(name: str, obs: Observation) -> float:
    """Conditional standard deviation of a continuous variable given its parents."""
    b, c, _ = obs.discrete
    return {"a": _A_SD[b], "d": _D_SD[b, c], "e": _E_SD[c]}[name]


def sample_example(n: int, rng: np.random.Generator) -> Dataset:
    """Draw ``n`` rows from a CG distribution that factorises over :func:`example_graph`."""
    flat = rng.choice(4, size=n, p=_BC_PROBS.ravel())
    b, c = flat // 2, flat % 2
    f = (rng.random(n) < _F_PROB).astype(np.int64)
    d = _D_MEAN[b, c] + _D_SD[b, c] * rng.standard_normal(n)
    e = _E_ALPHA[c] + _E_BETA[c] * d + _E_SD[c] * rng.standard_normal(n)
    a = _A_MEAN[b] + _A_SD[b] * rng.standard_normal(n)
    return Dataset(example_columns(), np.column_stack([b, c, f]), np.column_stack([a, d, e]))
