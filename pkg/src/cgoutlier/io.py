"""File formats: CSV data, JSON schema/graph/model/report documents.

Every JSON document carries ``"schema_version"``.  Errors name the file and,
where it applies, the line, column or vertex at fault.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .cgr import CellFit, CellMeans, CgrFactor, CgrModel
from .errors import CgOutlierError, MissingValue, ParseError, UnknownVertex
from .graph import MixedGraph, Parents, PerfectNumbering, RipSequence, VertexKind, graph_from_mapping
from .tabular import CliqueTables, Column, ContingencyTable, Dataset, Observation, sorted_levels

SCHEMA_VERSION = 1

log = logging.getLogger(__name__)


def _read_json(path: str | Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    except OSError as exc:
        raise ParseError(f"{path}: cannot read file ({exc.strerror})") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected a JSON object at top level")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ParseError(f"{path}: unsupported schema_version {version!r}")
    return doc


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=False, allow_nan=True) + "\n"


def write_json(doc: dict, path: str | Path | None) -> None:
    text = dumps(doc)
    if path is None or str(path) == "-":
        print(text, end="")
    else:
        Path(path).write_text(text, encoding="utf-8")


# ---------------------------------------------------------------------------
# schema


def schema_to_dict(columns: Sequence[Column]) -> dict:
    cols = []
    for c in columns:
        entry: dict[str, Any] = {"name": c.name, "kind": c.kind.value}
        if c.levels is not None:
            entry["levels"] = list(c.levels)
        cols.append(entry)
    return {"schema_version": SCHEMA_VERSION, "columns": cols}


def schema_from_dict(doc: dict, source: str = "<schema>") -> tuple[Column, ...]:
    try:
        entries = doc["columns"]
        cols = []
        for e in entries:
            kind = VertexKind.parse(e["kind"])
            levels = e.get("levels")
            if levels is not None:
                if kind is not VertexKind.DISCRETE:
                    raise ParseError(f"{source}: continuous column {e['name']!r} cannot list levels")
                levels = tuple(str(x) for x in levels)
            cols.append(Column(str(e["name"]), kind, levels))
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{source}: malformed schema ({exc})") from None
    except ParseError as exc:
        raise ParseError(f"{source}: {exc}") from None
    names = [c.name for c in cols]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ParseError(f"{source}: duplicate column names {dupes}")
    return tuple(cols)


def load_schema(path: str | Path) -> tuple[Column, ...]:
    return schema_from_dict(_read_json(path), str(path))


def schema_from_graph(g: MixedGraph) -> tuple[Column, ...]:
    return tuple(Column(v, k) for v, k in zip(g.labels, g.kinds))


# ---------------------------------------------------------------------------
# data


def _read_csv(path: str | Path) -> tuple[list[str], list[tuple[int, dict]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = [h.strip() for h in next(reader)]
            except StopIteration:
                raise ParseError(f"{path}: empty file") from None
            rows = []
            for line in reader:
                if not line or all(not x.strip() for x in line):
                    continue
                if len(line) != len(header):
                    raise ParseError(f"{path}:{reader.line_num}: expected {len(header)} fields, found {len(line)}")
                rows.append((reader.line_num, dict(zip(header, line))))
    except OSError as exc:
        raise ParseError(f"{path}: cannot read file ({exc.strerror})") from None
    return header, rows


def load_dataset(path: str | Path, schema: Sequence[Column]) -> Dataset:
    """Read a comma-separated file with a header row.

    Discrete columns without explicit levels have them discovered from the
    file and then frozen.
    """
    header, rows = _read_csv(path)
    missing = [c.name for c in schema if c.name not in header]
    if missing:
        raise ParseError(f"{path}: header lacks schema columns {missing}")
    extra = [h for h in header if h not in {c.name for c in schema}]
    if extra:
        raise ParseError(f"{path}: header has columns not in the schema: {extra}")
    records = []
    for line_no, rec in rows:
        for c in schema:
            if rec[c.name].strip() == "":
                raise MissingValue(f"{path}:{line_no}: empty value in column {c.name!r}")
        records.append((line_no, rec))
    try:
        cols = []
        for col in schema:
            if col.is_discrete and col.levels is None:
                cols.append(Column(col.name, col.kind, sorted_levels({r[col.name].strip() for _, r in records})))
            else:
                cols.append(col)
        proto = Dataset(tuple(cols), np.zeros((0, sum(c.is_discrete for c in cols))), np.zeros((0, sum(not c.is_discrete for c in cols))))
    except CgOutlierError as exc:
        raise type(exc)(f"{path}: {exc}") from None
    obs = []
    for line_no, rec in records:
        try:
            obs.append(proto.encode(rec))
        except CgOutlierError as exc:
            raise type(exc)(f"{path}:{line_no}: {exc}") from None
    return proto.with_rows(obs)


def load_observations(path: str | Path, like: Dataset) -> list[Observation]:
    """Rows of a CSV file encoded against the levels of ``like``."""
    header, rows = _read_csv(path)
    missing = [c.name for c in like.columns if c.name not in header]
    if missing:
        raise ParseError(f"{path}: header lacks columns {missing}")
    out = []
    for line_no, rec in rows:
        try:
            out.append(like.encode(rec))
        except CgOutlierError as exc:
            raise type(exc)(f"{path}:{line_no}: {exc}") from None
    return out


def write_dataset(data: Dataset, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([c.name for c in data.columns])
        for obs in data.rows():
            rec = data.decode(obs)
            w.writerow([rec[c.name] if c.is_discrete else repr(float(rec[c.name])) for c in data.columns])


# ---------------------------------------------------------------------------
# graph


def graph_to_dict(g: MixedGraph) -> dict:
    edges = sorted(sorted(e, key=g.index.__getitem__) for e in g.edges)
    edges.sort(key=lambda e: (g.index[e[0]], g.index[e[1]]))
    return {
        "schema_version": SCHEMA_VERSION,
        "vertices": [{"label": v, "kind": k.value} for v, k in zip(g.labels, g.kinds)],
        "edges": edges,
    }


def load_graph(path: str | Path) -> MixedGraph:
    doc = _read_json(path)
    edges = doc.get("edges", [])
    if isinstance(edges, list):
        seen = set()
        for e in edges:
            if isinstance(e, list) and len(e) == 2:
                key = frozenset(e)
                if key in seen and len(key) == 2:
                    log.warning("%s: duplicate edge %s - %s ignored", path, e[0], e[1])
                seen.add(key)
    try:
        return graph_from_mapping(doc)
    except (ParseError, UnknownVertex) as exc:
        raise type(exc)(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# model


def _arr(x) -> list:
    return np.asarray(x, dtype=float).tolist()


def _table_to_list(t: ContingencyTable) -> dict:
    return {"variables": list(t.variables), "total": t.total, "cells": [[list(c), n] for c, n in sorted(t.counts.items())]}


def _table_from_list(d: dict) -> ContingencyTable:
    return ContingencyTable(tuple(d["variables"]), {tuple(c): int(n) for c, n in d["cells"]}, int(d["total"]))


def model_to_dict(model: CgrModel, columns: Sequence[Column]) -> dict:
    factors = []
    for j, f in model.factors.items():
        entry: dict[str, Any] = {
            "target": j,
            "discrete_parents": list(f.parents.discrete),
            "continuous_parents": list(f.parents.continuous),
            "n_total": f.n_total,
        }
        if f.homogeneous:
            entry["beta"] = _arr(f.beta)
            entry["saa_inv"] = _arr(f.saa_inv)
            entry["sse"] = f.sse
            entry["cells"] = [
                {"cell": list(c), "n": m.n, "y_mean": m.y_mean, "x_mean": _arr(m.x_mean)} for c, m in sorted(f.means.items())
            ]
        else:
            entry["cells"] = [
                {"cell": list(c), "n": cf.n, "coef": _arr(cf.coef), "sse": cf.sse, "sst": cf.sst, "xtx_inv": _arr(cf.xtx_inv)}
                for c, cf in sorted(f.cells.items())
            ]
        factors.append(entry)
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "cgr_model",
        "mode": model.mode,
        "df_convention": model.df_convention,
        "graph": graph_to_dict(model.graph),
        "schema": schema_to_dict(columns),
        "numbering": list(model.numbering.order),
        "discrete_cliques": [sorted(c, key=model.graph.index.__getitem__) for c in model.rip.cliques],
        "tables": {
            "variables": list(model.tables.variables),
            "cliques": [_table_to_list(t) for t in model.tables.cliques],
            "separators": [_table_to_list(t) for t in model.tables.separators],
        },
        "factors": factors,
    }


def model_from_dict(doc: dict, source: str = "<model>") -> tuple[CgrModel, tuple[Column, ...]]:
    try:
        if doc.get("kind") != "cgr_model":
            raise ParseError("not a model document")
        g = graph_from_mapping(doc["graph"])
        columns = schema_from_dict(doc["schema"], source)
        mode = doc["mode"]
        tables = CliqueTables(
            tuple(doc["tables"]["variables"]),
            tuple(_table_from_list(t) for t in doc["tables"]["cliques"]),
            tuple(_table_from_list(t) for t in doc["tables"]["separators"]),
        )
        factors = {}
        for e in doc["factors"]:
            parents = Parents(tuple(e["discrete_parents"]), tuple(e["continuous_parents"]))
            p = len(parents.continuous)
            if mode == "homogeneous":
                means = {
                    tuple(c["cell"]): CellMeans(int(c["n"]), float(c["y_mean"]), np.array(c["x_mean"], dtype=float).reshape(p))
                    for c in e["cells"]
                }
                factors[e["target"]] = CgrFactor(
                    e["target"], parents, mode, int(e["n_total"]),
                    beta=np.array(e["beta"], dtype=float).reshape(p),
                    saa_inv=np.array(e["saa_inv"], dtype=float).reshape(p, p),
                    sse=float(e["sse"]), means=means,
                )
            else:
                cells = {
                    tuple(c["cell"]): CellFit(
                        int(c["n"]),
                        np.array(c["coef"], dtype=float).reshape(p + 1),
                        float(c["sse"]),
                        np.array(c["xtx_inv"], dtype=float).reshape(p + 1, p + 1),
                        float(c["sst"]),
                    )
                    for c in e["cells"]
                }
                factors[e["target"]] = CgrFactor(e["target"], parents, mode, int(e["n_total"]), cells)
        model = CgrModel(
            g,
            PerfectNumbering(tuple(doc["numbering"])),
            RipSequence(tuple(frozenset(c) for c in doc["discrete_cliques"])),
            tables,
            factors,
            mode,
            doc.get("df_convention", "residual"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{source}: malformed model document ({exc})") from None
    return model, columns


def save_model(model: CgrModel, columns: Sequence[Column], path: str | Path | None) -> None:
    write_json(model_to_dict(model, columns), path)


def load_model(path: str | Path) -> tuple[CgrModel, tuple[Column, ...]]:
    return model_from_dict(_read_json(path), str(path))


def empty_like(columns: Sequence[Column]) -> Dataset:
    cols = tuple(columns)
    return Dataset(cols, np.zeros((0, sum(c.is_discrete for c in cols))), np.zeros((0, sum(not c.is_discrete for c in cols))))


# ---------------------------------------------------------------------------
# reports


@dataclass
class ReportDocument:
    """Result document written by every CLI subcommand."""

    command: str
    config: dict
    results: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    timing: dict | None = None

    def to_dict(self) -> dict:
        doc = {"schema_version": SCHEMA_VERSION, "kind": "report", "command": self.command, "config": self.config, "results": self.results}
        doc.update(self.extra)
        if self.timing is not None:
            doc["timing"] = self.timing
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ReportDocument":
        base = {"schema_version", "kind", "command", "config", "results", "timing"}
        return cls(doc["command"], doc["config"], doc.get("results", []), {k: v for k, v in doc.items() if k not in base}, doc.get("timing"))

    def dumps(self) -> str:
        return dumps(self.to_dict())


def load_report(path: str | Path) -> ReportDocument:
    doc = _read_json(path)
    if doc.get("kind") != "report":
        raise ParseError(f"{path}: not a report document")
    return ReportDocument.from_dict(doc)


def finite_or_none(x: float) -> float | str:
    """JSON-friendly float: infinities become strings."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x
