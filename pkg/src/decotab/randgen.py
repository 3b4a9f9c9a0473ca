"""Seeded random models: decomposable graphs, level specs, positive distributions.

Graphs are grown clique by clique, each new clique gluing a subset of an
existing one to fresh vertices; this keeps the result decomposable by
construction and exercises a wide range of clique/separator shapes.
"""

from __future__ import annotations

import string

import numpy as np

from .graphs import CliqueOrder, LabeledGraph, perfect_order
from .params import CondProbs, JointProbs
from .tables import ContingencyTable, LevelSpec


def random_decomposable_graph(
    rng: np.random.Generator, n_vertices: int, max_clique: int = 3
) -> LabeledGraph:
    if not 1 <= n_vertices <= 26:
        raise ValueError("supported sizes are 1..26 vertices")
    names = list(string.ascii_lowercase[:n_vertices])
    first = 1 + int(rng.integers(min(max_clique, n_vertices)))
    cliques = [names[:first]]
    placed = first
    while placed < n_vertices:
        host = cliques[int(rng.integers(len(cliques)))]
        take = int(rng.integers(0, min(len(host), max_clique - 1) + 1))
        glue = [str(v) for v in rng.choice(host, size=take, replace=False)] if take else []
        fresh = 1 + int(rng.integers(min(max_clique - len(glue), n_vertices - placed)))
        cliques.append(glue + names[placed : placed + fresh])
        placed += fresh
    return LabeledGraph.from_cliques(names, cliques)


def random_level_spec(
    rng: np.random.Generator, vertices: tuple[str, ...], max_levels: int = 3
) -> LevelSpec:
    sizes = tuple(int(rng.integers(2, max_levels + 1)) for _ in vertices)
    return LevelSpec(vertices, sizes)


def random_cond_probs(
    rng: np.random.Generator, order: CliqueOrder, spec: LevelSpec, concentration: float = 2.0
) -> CondProbs:
    """Markov distribution with independent Dirichlet blocks, strictly positive."""
    from .params import block_keys

    blocks = {}
    for l, s_levels in block_keys(order, spec):
        vars_ = order.cliques[0] if l == 1 else order.residuals[l - 1]
        shape = tuple(spec.size(v) for v in vars_)
        g = rng.gamma(shape=concentration, size=shape)
        blocks[(l, s_levels)] = g / g.sum()
    return CondProbs(order, spec, blocks)


def random_positive_joint(
    rng: np.random.Generator, spec: LevelSpec, concentration: float = 2.0
) -> JointProbs:
    g = rng.gamma(shape=concentration, size=spec.shape)
    return JointProbs(spec, g / g.sum())


def random_table(
    rng: np.random.Generator, p: JointProbs, n: int
) -> ContingencyTable:
    """Multinomial draw of n observations from the joint distribution."""
    counts = rng.multinomial(n, p.p.reshape(-1)).reshape(p.spec.shape)
    return ContingencyTable(p.spec, counts)


def random_model(
    rng: np.random.Generator, n_vertices: int, max_levels: int = 3, max_clique: int = 3
) -> tuple[LabeledGraph, CliqueOrder, LevelSpec]:
    g = random_decomposable_graph(rng, n_vertices, max_clique)
    order = perfect_order(g)
    spec = random_level_spec(rng, g.vertices, max_levels)
    return g, order, spec
