"""File formats: model JSON, data CSV, parameter dumps, prior dumps.

Every float in JSON output is rendered with 17 significant digits so a dump
re-read through any IEEE-754 double parser reproduces the value bit for bit.
"""

from __future__ import annotations

import csv
import io
import json
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .graphs import CliqueOrder, LabeledGraph
from .params import (
    CondProbs,
    ParamKey,
    ThetaMap,
    block_keys,
    canonical_keys,
)
from .priors import DirichletBlock, DirichletBlocks
from .tables import ContingencyTable, LevelSpec, from_cell_counts, ingest_rows

FIXTURES = ("chain3", "thick6", "branch11")


class FileFormatError(ValueError):
    """A user-supplied file is malformed; the message names file and location."""


# ---------------------------------------------------------------------------
# JSON rendering with fixed float formatting


def _render(obj: Any, out: list[str], indent: int) -> None:
    pad = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(f"{pad}  {json.dumps(str(k))}: ")
            _render(v, out, indent + 1)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(obj, (list, tuple)):
        seq = list(obj)
        if not seq:
            out.append("[]")
            return
        simple = all(isinstance(x, (int, float, str, bool)) for x in seq)
        if simple:
            out.append("[" + ", ".join(_scalar(x) for x in seq) + "]")
            return
        out.append("[\n")
        for i, v in enumerate(seq):
            out.append(pad + "  ")
            _render(v, out, indent + 1)
            out.append(",\n" if i < len(seq) - 1 else "\n")
        out.append(pad + "]")
    else:
        out.append(_scalar(obj))


def _scalar(x: Any) -> str:
    if isinstance(x, bool) or x is None:
        return json.dumps(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return json.dumps(str(x))


def to_json_text(obj: Any) -> str:
    out: list[str] = []
    _render(obj, out, 0)
    return "".join(out) + "\n"


# ---------------------------------------------------------------------------
# Model files


def parse_model(text: str, source: str = "<model>") -> tuple[LabeledGraph, LevelSpec]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{source}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "variables" not in doc or "edges" not in doc:
        raise FileFormatError(f"{source}: expected keys 'variables' and 'edges'")
    if not doc["variables"]:
        raise FileFormatError(f"{source}: at least one variable is required")
    names, sizes = [], []
    for i, entry in enumerate(doc["variables"]):
        if not isinstance(entry, dict) or "name" not in entry or "levels" not in entry:
            raise FileFormatError(f"{source}: variables[{i}] needs 'name' and 'levels'")
        names.append(str(entry["name"]))
        try:
            sizes.append(int(entry["levels"]))
        except (TypeError, ValueError):
            raise FileFormatError(f"{source}: variables[{i}].levels must be an integer")
    try:
        spec = LevelSpec(tuple(names), tuple(sizes))
    except ValueError as exc:
        raise FileFormatError(f"{source}: {exc}") from exc
    edges = []
    for i, e in enumerate(doc["edges"]):
        if not isinstance(e, (list, tuple)) or len(e) != 2:
            raise FileFormatError(f"{source}: edges[{i}] must be a pair")
        edges.append((str(e[0]), str(e[1])))
    try:
        graph = LabeledGraph.make(tuple(names), edges)
    except ValueError as exc:
        raise FileFormatError(f"{source}: {exc}") from exc
    return graph, spec


def load_model(path: str | Path) -> tuple[LabeledGraph, LevelSpec]:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise FileFormatError(f"{p}: cannot read ({exc})") from exc
    return parse_model(text, str(p))


def model_to_dict(graph: LabeledGraph, spec: LevelSpec) -> dict:
    return {
        "variables": [
            {"name": v, "levels": spec.size(v)} for v in spec.names
        ],
        "edges": [list(e) for e in graph.edge_pairs()],
    }


def fixture_text(name: str) -> str:
    if name not in FIXTURES:
        raise FileFormatError(f"unknown fixture {name!r}; available: {', '.join(FIXTURES)}")
    return (
        resources.files("decotab").joinpath(f"fixtures/{name}.json").read_text()
    )


def load_fixture(name: str) -> tuple[LabeledGraph, LevelSpec]:
    return parse_model(fixture_text(name), f"fixture:{name}")


# ---------------------------------------------------------------------------
# Data files (CSV)


def parse_data_csv(
    text: str, spec: LevelSpec, *, cell_counts: bool = False, source: str = "<data>"
) -> ContingencyTable:
    """Observation rows, or cell-count rows when ``cell_counts`` is set.

    The header must name every model variable (cell-count files add a final
    ``count`` column); columns may come in any order.
    """
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row and any(field.strip() for field in row)]
    if not rows:
        raise FileFormatError(f"{source}: empty file")
    header = [h.strip() for h in rows[0]]
    expected = list(spec.names) + (["count"] if cell_counts else [])
    if sorted(header) != sorted(expected):
        raise FileFormatError(
            f"{source}: header {header} does not match model variables {expected}"
        )
    if cell_counts and header[-1] != "count":
        order = [header.index(v) for v in spec.names] + [header.index("count")]
    else:
        order = [header.index(v) for v in spec.names] + (
            [header.index("count")] if cell_counts else []
        )

    def parse_row(row: list[str], lineno: int) -> list[int]:
        if len(row) != len(header):
            raise FileFormatError(f"{source}: line {lineno}: wrong column count")
        try:
            return [int(row[i].strip()) for i in order]
        except ValueError:
            raise FileFormatError(f"{source}: line {lineno}: non-integer entry")

    parsed = [parse_row(row, i + 2) for i, row in enumerate(rows[1:])]
    try:
        if cell_counts:
            return from_cell_counts(spec, [(r[:-1], r[-1]) for r in parsed])
        return ingest_rows(spec, parsed)
    except ValueError as exc:
        raise FileFormatError(f"{source}: {exc}") from exc


def load_data(path: str | Path, spec: LevelSpec, *, cell_counts: bool = False) -> ContingencyTable:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise FileFormatError(f"{p}: cannot read ({exc})") from exc
    return parse_data_csv(text, spec, cell_counts=cell_counts, source=str(p))


# ---------------------------------------------------------------------------
# Parameter dumps


def theta_to_dict(theta: ThetaMap, order: CliqueOrder, spec: LevelSpec) -> dict:
    entries = []
    for key in canonical_keys(theta.kind, order, spec):
        entry: dict[str, Any] = {"set": list(key.vars), "cell": list(key.cell)}
        if theta.kind in ("cond", "xi") and _is_slice_key(key, order):
            entry["slice"] = {"set": list(key.given_vars), "cell": list(key.given_cell)}
        entry["value"] = theta.values[key]
        entries.append(entry)
    return {"kind": theta.kind, "entries": entries}


def _is_slice_key(key: ParamKey, order: CliqueOrder) -> bool:
    return not set(key.vars) <= set(order.cliques[0])


def theta_from_dict(doc: dict, order: CliqueOrder, spec: LevelSpec, source: str = "<params>") -> ThetaMap:
    if not isinstance(doc, dict) or "kind" not in doc or "entries" not in doc:
        raise FileFormatError(f"{source}: expected keys 'kind' and 'entries'")
    kind = doc["kind"]
    if kind not in ("mod", "cond", "cliq", "xi"):
        raise FileFormatError(f"{source}: unknown kind {kind!r}")
    values: dict[ParamKey, float] = {}
    for i, entry in enumerate(doc["entries"]):
        try:
            vars_ = spec.sort(str(v) for v in entry["set"])
            if list(vars_) != [str(v) for v in entry["set"]]:
                raise FileFormatError(
                    f"{source}: entries[{i}].set is not in canonical order"
                )
            cell = tuple(int(x) for x in entry["cell"])
            given = entry.get("slice")
            if given is None:
                gvars, gcell = (), ()
            else:
                gvars = tuple(str(v) for v in given["set"])
                gcell = tuple(int(x) for x in given["cell"])
            value = float(entry["value"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FileFormatError(f"{source}: entries[{i}] malformed ({exc})") from exc
        values[ParamKey(vars_, cell, gvars, gcell)] = value
    expected = set(canonical_keys(kind, order, spec))
    if set(values) != expected:
        missing = expected - set(values)
        extra = set(values) - expected
        detail = []
        if missing:
            detail.append(f"missing {sorted(missing)[:3]}")
        if extra:
            detail.append(f"unexpected {sorted(extra)[:3]}")
        raise FileFormatError(f"{source}: entry set mismatch ({'; '.join(detail)})")
    return ThetaMap(kind, values)


def condprobs_to_dict(cp: CondProbs) -> dict:
    blocks = []
    for l, s_levels in block_keys(cp.order, cp.spec):
        vars_ = cp.block_vars(l)
        given_vars = () if l == 1 else cp.order.separators[l - 1]
        blocks.append(
            {
                "clique": l,
                "set": list(vars_),
                "slice": None if l == 1 else {"set": list(given_vars), "cell": list(s_levels)},
                "cells": [list(c.levels) for c in _cells_of(vars_, cp.spec)],
                "probs": [
                    float(cp.blocks[(l, s_levels)][c.levels])
                    for c in _cells_of(vars_, cp.spec)
                ],
            }
        )
    return {"kind": "pcond", "blocks": blocks}


def _cells_of(vars_: Sequence[str], spec: LevelSpec):
    from .tables import iter_cells

    return list(iter_cells(vars_, spec))


def condprobs_from_dict(
    doc: dict, order: CliqueOrder, spec: LevelSpec, source: str = "<params>"
) -> CondProbs:
    if not isinstance(doc, dict) or doc.get("kind") != "pcond" or "blocks" not in doc:
        raise FileFormatError(f"{source}: expected a pcond dump with 'blocks'")
    expected = block_keys(order, spec)
    blocks: dict[tuple[int, tuple[int, ...]], np.ndarray] = {}
    for i, b in enumerate(doc["blocks"]):
        try:
            l = int(b["clique"])
            s_levels = () if b.get("slice") is None else tuple(int(x) for x in b["slice"]["cell"])
            vars_ = order.cliques[0] if l == 1 else order.residuals[l - 1]
            cells = [tuple(int(x) for x in c) for c in b["cells"]]
            probs = [float(x) for x in b["probs"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise FileFormatError(f"{source}: blocks[{i}] malformed ({exc})") from exc
        want = [c.levels for c in _cells_of(vars_, spec)]
        if cells != want or len(probs) != len(want):
            raise FileFormatError(f"{source}: blocks[{i}] cell list mismatch")
        shape = tuple(spec.size(v) for v in vars_)
        arr = np.empty(shape, dtype=float)
        for levels, value in zip(cells, probs):
            arr[levels] = value
        blocks[(l, s_levels)] = arr
    if set(blocks) != set(expected):
        raise FileFormatError(f"{source}: block set does not match the model")
    try:
        return CondProbs(order, spec, blocks)
    except ValueError as exc:
        raise FileFormatError(f"{source}: {exc}") from exc


# ---------------------------------------------------------------------------
# Prior / posterior dumps


def blocks_to_dict(blocks: DirichletBlocks) -> dict:
    out = []
    for b in blocks.blocks:
        out.append(
            {
                "label": b.label,
                "set": list(b.vars),
                "slice": None
                if not b.given_vars
                else {"set": list(b.given_vars), "cell": list(b.given_cell)},
                "cells": [list(c) for c in b.cells],
                "alpha": [str(f) for f in b.alpha_rationals()],
            }
        )
    return {"blocks": out, "grouping": [list(g) for g in blocks.grouping]}


def blocks_from_dict(doc: dict, spec: LevelSpec, source: str = "<prior>") -> DirichletBlocks:
    if not isinstance(doc, dict) or "blocks" not in doc:
        raise FileFormatError(f"{source}: expected key 'blocks'")
    blocks = []
    for i, b in enumerate(doc["blocks"]):
        try:
            given = b.get("slice")
            blocks.append(
                DirichletBlock(
                    label=str(b["label"]),
                    vars=tuple(str(v) for v in b["set"]),
                    given_vars=() if given is None else tuple(str(v) for v in given["set"]),
                    given_cell=() if given is None else tuple(int(x) for x in given["cell"]),
                    cells=tuple(tuple(int(x) for x in c) for c in b["cells"]),
                    alpha=tuple(float(Fraction(a)) for a in b["alpha"]),
                )
            )
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            raise FileFormatError(f"{source}: blocks[{i}] malformed ({exc})") from exc
    grouping = tuple(
        tuple(int(i) for i in g) for g in doc.get("grouping", [[i] for i in range(len(blocks))])
    )
    return DirichletBlocks(spec, tuple(blocks), grouping)
