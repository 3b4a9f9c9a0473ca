"""The four parametrizations of the multinomial Markov model and their transforms.

A positive joint distribution Markov with respect to a decomposable graph can
be coordinatized four ways:

* ``mod``  — log-linear interactions of the joint table relative to the
  all-baseline cell, one free coordinate per complete set and starred cell;
  interactions on non-complete sets vanish exactly (the Markov property).
* ``cond`` — the same interactions computed per block of the clique/separator
  factorization: the first clique's marginal table and, for each later
  clique, every separator slice of its residual table.
* ``cliq`` — interactions of clique-marginal tables, one coordinate per
  complete set keyed by its home clique (the first clique containing it).
* ``xi``   — per-block log odds relative to the block's baseline cell; the
  subset-sum (zeta) transform of ``cond``, and the coordinate system in which
  blocks are plain multinomial logits.

All transforms here are exact bijections, evaluated with log-sum-exp
stabilization where sums of exponentials occur.  Alternating-sign subset sums
are evaluated literally, term by term.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .graphs import CliqueOrder, LabeledGraph, is_complete
from .tables import (
    MAX_TABLE_CELLS,
    CellIndex,
    ContingencyTable,
    LevelSpec,
    iter_cells,
    marginal_count,
    merge_cells,
    nonempty_subsets,
    subsets_with_empty,
)

PROB_SUM_TOL = 1e-12


def default_markov_tol() -> float:
    """Markov-validation tolerance: 1e-8 unless DECOTAB_MARKOV_TOL overrides it."""
    import os

    return float(os.environ.get("DECOTAB_MARKOV_TOL", "1e-8"))


class MarkovViolationError(ValueError):
    """The distribution is not Markov for the graph at the working tolerance."""

    def __init__(self, worst_set: tuple[str, ...], worst_value: float, tol: float):
        self.worst_set = worst_set
        self.worst_value = worst_value
        super().__init__(
            f"non-complete set {worst_set} carries interaction {worst_value:.3e}"
            f" (tolerance {tol:.1e})"
        )


class InternalDefectError(RuntimeError):
    """An internal consistency guarantee failed; not a user error."""


def logsumexp(values: np.ndarray) -> float:
    arr = np.asarray(values, dtype=float)
    m = float(arr.max())
    return m + math.log(float(np.exp(arr - m).sum()))


# ---------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class JointProbs:
    """Strictly positive cell probabilities over the full table, summing to 1."""

    spec: LevelSpec
    p: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.p, dtype=float)
        if arr.shape != self.spec.shape:
            raise ValueError(f"probability shape {arr.shape} does not match spec")
        if not (arr > 0).all():
            raise ValueError("joint probabilities must be strictly positive")
        if abs(float(arr.sum()) - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {float(arr.sum())!r}, not 1")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "p", arr)


class ParamKey(NamedTuple):
    """Index of one interaction coordinate.

    ``vars``/``cell`` name a starred cell of a marginal table; for slice-wise
    coordinates (``cond``/``xi``) the conditioning slice is carried in
    ``given_vars``/``given_cell`` (a full cell of the separator table).
    """

    vars: tuple[str, ...]
    cell: tuple[int, ...]
    given_vars: tuple[str, ...] = ()
    given_cell: tuple[int, ...] = ()


@dataclass
class ThetaMap:
    """An ordered bag of interaction coordinates of one kind.

    ``kind`` is one of ``mod``, ``cond``, ``cliq``, ``xi``.  For ``mod`` the
    derived scalar ``log_base`` (log-probability of the all-baseline cell)
    rides along; it is never a free coordinate.
    """

    kind: str
    values: dict[ParamKey, float]
    log_base: float | None = None

    def value(self, key: ParamKey) -> float:
        return self.values[key]

    def max_abs_diff(self, other: "ThetaMap") -> float:
        if set(self.values) != set(other.values):
            raise ValueError("parameter index sets differ")
        return max(
            abs(self.values[k] - other.values[k]) for k in self.values
        ) if self.values else 0.0


@dataclass(frozen=True)
class CondProbs:
    """Probability blocks of the clique/separator factorization.

    One block for the first clique's table and one per separator slice of
    each residual table, keyed by ``(l, slice levels)`` with 1-based clique
    number ``l`` (the first-clique block is ``(1, ())``).  Every block is a
    strictly positive array over its variables, summing to 1.
    """

    order: CliqueOrder
    spec: LevelSpec
    blocks: dict[tuple[int, tuple[int, ...]], np.ndarray]

    def __post_init__(self):
        expected = set(block_keys(self.order, self.spec))
        if set(self.blocks) != expected:
            raise ValueError("block keys do not match the clique order")
        frozen = {}
        for key, arr in self.blocks.items():
            arr = np.asarray(arr, dtype=float)
            vars_ = self.block_vars(key[0])
            if arr.shape != tuple(self.spec.size(v) for v in vars_):
                raise ValueError(f"block {key} has wrong shape {arr.shape}")
            if not (arr > 0).all():
                raise ValueError(f"block {key} is not strictly positive")
            if abs(float(arr.sum()) - 1.0) > PROB_SUM_TOL:
                raise ValueError(f"block {key} sums to {float(arr.sum())!r}")
            arr = arr.copy()
            arr.flags.writeable = False
            frozen[key] = arr
        object.__setattr__(self, "blocks", frozen)

    def block_vars(self, l: int) -> tuple[str, ...]:
        return self.order.cliques[0] if l == 1 else self.order.residuals[l - 1]

    def max_abs_diff(self, other: "CondProbs") -> float:
        if set(self.blocks) != set(other.blocks):
            raise ValueError("block structures differ")
        return max(
            float(np.abs(self.blocks[k] - other.blocks[k]).max()) for k in self.blocks
        )

    def joint(self) -> JointProbs:
        """Multiply the blocks back into the joint table they factorize."""
        spec = self.spec
        full = np.ones(spec.shape, dtype=float)
        full *= _expand(spec, self.order.cliques[0], self.blocks[(1, ())])
        for l in range(2, self.order.k + 1):
            s_vars = self.order.separators[l - 1]
            r_vars = self.order.residuals[l - 1]
            both = spec.sort(s_vars + r_vars)
            cond = np.empty(tuple(spec.size(v) for v in both), dtype=float)
            for s_cell in iter_cells(s_vars, spec):
                idx = tuple(
                    s_cell.level_of(v) if v in s_vars else slice(None) for v in both
                )
                cond[idx] = self.blocks[(l, s_cell.levels)]
            full *= _expand(spec, both, cond)
        return JointProbs(spec, full)

    @classmethod
    def from_joint(cls, p: JointProbs, order: CliqueOrder) -> "CondProbs":
        blocks: dict[tuple[int, tuple[int, ...]], np.ndarray] = {}
        blocks[(1, ())] = marginal_array(p, order.cliques[0])
        for l in range(2, order.k + 1):
            s_vars = order.separators[l - 1]
            q_c = marginal_array(p, order.cliques[l - 1])
            q_s = marginal_array(p, s_vars)
            c_vars = order.cliques[l - 1]
            for s_cell in iter_cells(s_vars, p.spec):
                idx = tuple(
                    s_cell.level_of(v) if v in s_vars else slice(None) for v in c_vars
                )
                blocks[(l, s_cell.levels)] = q_c[idx] / q_s[s_cell.levels]
        return cls(order, p.spec, blocks)


def block_keys(order: CliqueOrder, spec: LevelSpec) -> list[tuple[int, tuple[int, ...]]]:
    """Canonical block ordering: first clique, then slices by clique and cell."""
    keys: list[tuple[int, tuple[int, ...]]] = [(1, ())]
    for l in range(2, order.k + 1):
        for s_cell in iter_cells(order.separators[l - 1], spec):
            keys.append((l, s_cell.levels))
    return keys


def _expand(spec: LevelSpec, vars_: Sequence[str], arr: np.ndarray) -> np.ndarray:
    """Reshape a sub-table array for broadcasting against the full table."""
    shape = [1] * len(spec.names)
    for v in vars_:
        shape[spec.index(v)] = spec.size(v)
    return arr.reshape(shape)


def marginal_array(p: JointProbs, vars_: Sequence[str]) -> np.ndarray:
    """Marginal probability table over ``vars_`` with axes in canonical order."""
    keep = {p.spec.index(v) for v in vars_}
    drop = tuple(i for i in range(len(p.spec.names)) if i not in keep)
    return p.p.sum(axis=drop) if drop else p.p.copy()


def marginal_joint(p: JointProbs, vars_: Sequence[str]) -> JointProbs:
    sub = p.spec.restrict(vars_)
    return JointProbs(sub, marginal_array(p, sub.names))


def marginal_prob(p: JointProbs, cell: CellIndex) -> float:
    """Probability of a marginal cell; the empty cell has probability 1."""
    p.spec.validate_cell(cell)
    idx = [slice(None)] * len(p.spec.names)
    for v, x in zip(cell.vars, cell.levels):
        idx[p.spec.index(v)] = x
    return float(p.p[tuple(idx)].sum())


def conditional_prob(p: JointProbs, cell: CellIndex, given: CellIndex) -> float:
    """p(cell | given) = p(cell, given) / p(given); positivity keeps it defined."""
    return marginal_prob(p, merge_cells(p.spec, cell, given)) / marginal_prob(p, given)


# ---------------------------------------------------------------------------
# Interaction extraction (alternating sums on a log table)


def _loglin(logq: np.ndarray, table_vars: tuple[str, ...], cell: CellIndex) -> float:
    """Alternating-sign subset sum defining one interaction coordinate.

    ``logq`` is the log of a probability table with axes ``table_vars``;
    ``cell`` is a starred cell of a subset of those variables.  Evaluated
    literally, one subset at a time.
    """
    total = 0.0
    d = cell.vars
    for f in subsets_with_empty(d):
        inside = set(f)
        idx = tuple(
            cell.level_of(v) if v in inside else 0 for v in table_vars
        )
        sign = -1.0 if (len(d) - len(f)) % 2 else 1.0
        total += sign * float(logq[idx])
    return total


def _block_thetas(
    logq: np.ndarray,
    table_vars: tuple[str, ...],
    spec: LevelSpec,
    given_vars: tuple[str, ...] = (),
    given_cell: tuple[int, ...] = (),
) -> dict[ParamKey, float]:
    out: dict[ParamKey, float] = {}
    for d in nonempty_subsets(table_vars):
        for cell in iter_cells(d, spec, starred=True):
            out[ParamKey(d, cell.levels, given_vars, given_cell)] = _loglin(
                logq, table_vars, cell
            )
    return out


def _block_cumulant(
    theta_of_cell: Callable[[tuple[str, ...], CellIndex], float],
    table_vars: tuple[str, ...],
    spec: LevelSpec,
) -> float:
    """log of 1 + the sum over non-baseline block cells of exp(subset sums).

    ``theta_of_cell(f, cell_f)`` supplies the interaction for a starred
    sub-cell; the all-baseline cell contributes the 1.
    """
    exponents = []
    for cell in iter_cells(table_vars, spec):
        supp = cell.support()
        s = 0.0
        for f in nonempty_subsets(supp):
            s += theta_of_cell(f, cell.restrict(f))
        exponents.append(s)
    return logsumexp(np.array(exponents))


# ---------------------------------------------------------------------------
# Canonical key enumeration


def home_sets(order: CliqueOrder, l: int) -> list[tuple[str, ...]]:
    """Subsets of C_{l+1} whose home clique is l (0-based): they meet R_{l+1}."""
    resid = set(order.residuals[l])
    return [e for e in nonempty_subsets(order.cliques[l]) if set(e) & resid]


def mod_keys(order: CliqueOrder, spec: LevelSpec) -> list[ParamKey]:
    """All (complete set, starred cell) coordinates, grouped by home clique."""
    keys = []
    for l in range(order.k):
        for e in home_sets(order, l):
            for cell in iter_cells(e, spec, starred=True):
                keys.append(ParamKey(e, cell.levels))
    return keys


def cond_keys(order: CliqueOrder, spec: LevelSpec) -> list[ParamKey]:
    keys = []
    for d in nonempty_subsets(order.cliques[0]):
        for cell in iter_cells(d, spec, starred=True):
            keys.append(ParamKey(d, cell.levels))
    for l in range(2, order.k + 1):
        s_vars = order.separators[l - 1]
        for s_cell in iter_cells(s_vars, spec):
            for d in nonempty_subsets(order.residuals[l - 1]):
                for cell in iter_cells(d, spec, starred=True):
                    keys.append(ParamKey(d, cell.levels, s_vars, s_cell.levels))
    return keys


def canonical_keys(kind: str, order: CliqueOrder, spec: LevelSpec) -> list[ParamKey]:
    if kind in ("mod", "cliq"):
        return mod_keys(order, spec)
    if kind in ("cond", "xi"):
        return cond_keys(order, spec)
    raise ValueError(f"unknown parametrization kind {kind!r}")


def theta_vector(theta: ThetaMap, keys: Sequence[ParamKey]) -> np.ndarray:
    return np.array([theta.values[k] for k in keys], dtype=float)


def theta_from_vector(kind: str, keys: Sequence[ParamKey], vec: np.ndarray) -> ThetaMap:
    if len(keys) != len(vec):
        raise ValueError("vector length does not match key count")
    return ThetaMap(kind, {k: float(v) for k, v in zip(keys, vec)})


# ---------------------------------------------------------------------------
# mod <-> joint probabilities


def theta_mod_from_p(p: JointProbs, g: LabeledGraph) -> ThetaMap:
    """Log-linear interactions of the joint table on all complete sets.

    The returned map also carries log p(baseline) as the derived scalar; it
    is a function of the free coordinates, not one of them.
    """
    order = _order_for(g)
    logp = np.log(p.p)
    values = {}
    for key in mod_keys(order, p.spec):
        cell = CellIndex(key.vars, key.cell)
        values[key] = _loglin(logp, p.spec.names, cell)
    baseline = (0,) * len(p.spec.names)
    return ThetaMap("mod", values, log_base=float(logp[baseline]))


def markov_residual(p: JointProbs, g: LabeledGraph) -> tuple[tuple[str, ...], float]:
    """Largest-magnitude interaction on a non-complete set, with its set.

    Zero (to rounding) exactly when p is Markov with respect to g.
    """
    logp = np.log(p.p)
    worst_set: tuple[str, ...] = ()
    worst = 0.0
    for d in nonempty_subsets(p.spec.names):
        if len(d) < 2 or is_complete(g, d):
            continue
        for cell in iter_cells(d, p.spec, starred=True):
            v = abs(_loglin(logp, p.spec.names, cell))
            if v > worst:
                worst, worst_set = v, d
    return worst_set, worst


def _order_for(g: LabeledGraph) -> CliqueOrder:
    from .graphs import perfect_order

    return perfect_order(g)


def _log_weights(theta: ThetaMap, vars_: Sequence[str], spec: LevelSpec) -> np.ndarray:
    """Per-cell sums of applicable interactions over the ``vars_`` sub-table."""
    shape = tuple(spec.size(v) for v in vars_)
    s = np.zeros(shape, dtype=float)
    pos = {v: i for i, v in enumerate(vars_)}
    for key, val in theta.values.items():
        if key.given_vars:
            raise ValueError("slice-wise coordinates have no joint weight table")
        if not set(key.vars) <= set(vars_):
            raise ValueError(f"coordinate on {key.vars} lies outside {tuple(vars_)}")
        idx: list = [slice(None)] * len(vars_)
        for v, x in zip(key.vars, key.cell):
            idx[pos[v]] = x
        s[tuple(idx)] += val
    return s


def p_from_theta_mod(theta: ThetaMap, g: LabeledGraph, spec: LevelSpec) -> JointProbs:
    """Joint probabilities from ``mod`` coordinates; exact inverse of extraction."""
    if spec.n_cells() > MAX_TABLE_CELLS:
        raise ValueError(f"table would exceed {MAX_TABLE_CELLS} cells")
    for key in theta.values:
        if not is_complete(g, key.vars):
            raise ValueError(f"coordinate on non-complete set {key.vars}")
    s = _log_weights(theta, spec.names, spec)
    log_z = logsumexp(s)
    return JointProbs(spec, np.exp(s - log_z))


def cumulant(theta: ThetaMap, a: Sequence[str], spec: LevelSpec) -> float:
    """Log normalizer of the exponential-family weights restricted to ``a``.

    Keys of ``theta`` must lie inside ``a``; absent (non-complete) sets count
    as zero.  Evaluated as a log-sum-exp over the cells of the a-table.
    """
    a_sorted = spec.sort(a)
    s = _log_weights(theta, a_sorted, spec)
    return logsumexp(s)


# ---------------------------------------------------------------------------
# cond extraction and the xi coordinates


def theta_cond_from_p(
    p: JointProbs,
    order: CliqueOrder,
    *,
    validate: bool = True,
    tol: float | None = None,
) -> ThetaMap:
    """Blockwise interactions: first-clique marginal plus every residual slice.

    Markov-ness of ``p`` is checked by default; the error reports the worst
    offending non-complete set.
    """
    if validate:
        tol = default_markov_tol() if tol is None else tol
        worst_set, worst = markov_residual(p, order.graph())
        if worst > tol:
            raise MarkovViolationError(worst_set, worst, tol)
    values: dict[ParamKey, float] = {}
    c1 = order.cliques[0]
    values.update(_block_thetas(np.log(marginal_array(p, c1)), c1, p.spec))
    for l in range(2, order.k + 1):
        s_vars = order.separators[l - 1]
        r_vars = order.residuals[l - 1]
        c_vars = order.cliques[l - 1]
        q_c = marginal_array(p, c_vars)
        q_s = marginal_array(p, s_vars)
        for s_cell in iter_cells(s_vars, p.spec):
            idx = tuple(
                s_cell.level_of(v) if v in s_vars else slice(None) for v in c_vars
            )
            cond = q_c[idx] / q_s[s_cell.levels]
            values.update(
                _block_thetas(np.log(cond), r_vars, p.spec, s_vars, s_cell.levels)
            )
    return ThetaMap("cond", values)


def xi_from_theta_cond(cond: ThetaMap, order: CliqueOrder) -> ThetaMap:
    """Subset sums of block interactions: the block-wise multinomial logits."""
    _expect_kind(cond, "cond")
    values = {}
    for key in cond.values:
        cell = CellIndex(key.vars, key.cell)
        total = 0.0
        for f in nonempty_subsets(key.vars):
            sub = cell.restrict(f)
            total += cond.values[ParamKey(sub.vars, sub.levels, key.given_vars, key.given_cell)]
        values[key] = total
    return ThetaMap("xi", values)


def theta_cond_from_xi(xi: ThetaMap, order: CliqueOrder) -> ThetaMap:
    """Inverse of the subset-sum transform (alternating-sign inversion)."""
    _expect_kind(xi, "xi")
    values = {}
    for key in xi.values:
        cell = CellIndex(key.vars, key.cell)
        total = 0.0
        for f in nonempty_subsets(key.vars):
            sub = cell.restrict(f)
            sign = -1.0 if (len(key.vars) - len(f)) % 2 else 1.0
            total += sign * xi.values[ParamKey(sub.vars, sub.levels, key.given_vars, key.given_cell)]
        values[key] = total
    return ThetaMap("cond", values)


def xi_from_condprobs(cp: CondProbs) -> ThetaMap:
    """Log odds of each block cell against the block's all-baseline cell."""
    values = {}
    for (l, s_levels), arr in cp.blocks.items():
        vars_ = cp.block_vars(l)
        given_vars = () if l == 1 else cp.order.separators[l - 1]
        log_arr = np.log(arr)
        base = log_arr[(0,) * len(vars_)]
        for d in nonempty_subsets(vars_):
            for cell in iter_cells(d, cp.spec, starred=True):
                idx = tuple(cell.level_of(v) if v in d else 0 for v in vars_)
                values[ParamKey(d, cell.levels, given_vars, s_levels)] = float(
                    log_arr[idx] - base
                )
    return ThetaMap("xi", values)


def p_from_xi(xi: ThetaMap, order: CliqueOrder, spec: LevelSpec) -> CondProbs:
    """Blockwise softmax: probabilities from log odds, log-sum-exp guarded.

    Each block cell's weight is the xi coordinate of its support (zero for
    the all-baseline cell); the normalizing sum ranges over that block's own
    cells and nothing else.
    """
    _expect_kind(xi, "xi")
    blocks = {}
    for l, s_levels in block_keys(order, spec):
        vars_ = order.cliques[0] if l == 1 else order.residuals[l - 1]
        given_vars = () if l == 1 else order.separators[l - 1]
        shape = tuple(spec.size(v) for v in vars_)
        s = np.zeros(shape, dtype=float)
        for cell in iter_cells(vars_, spec):
            supp = cell.support()
            if not supp:
                continue
            sub = cell.restrict(supp)
            s[cell.levels] = xi.values[ParamKey(supp, sub.levels, given_vars, s_levels)]
        log_z = logsumexp(s)
        blocks[(l, s_levels)] = np.exp(s - log_z)
    return CondProbs(order, spec, blocks)


def _expect_kind(theta: ThetaMap, kind: str) -> None:
    if theta.kind != kind:
        raise ValueError(f"expected a {kind!r} map, got {theta.kind!r}")


# ---------------------------------------------------------------------------
# cond <-> cliq


def _slice_levels(s_vars: tuple[str, ...], cell: CellIndex, f: tuple[str, ...]) -> tuple[int, ...]:
    """Full separator cell with ``cell``'s levels on f and baseline elsewhere."""
    inside = set(f)
    return tuple(cell.level_of(v) if v in inside else 0 for v in s_vars)


def cliq_from_cond(cond: ThetaMap, order: CliqueOrder, spec: LevelSpec) -> ThetaMap:
    """Clique-marginal interactions from slice-wise ones.

    For a set E of clique l with separator part F0 and residual part D, the
    clique coordinate is the alternating sum over F ⊆ F0 (empty included) of
    D's coordinate in the slice (i_F, baseline on the rest of the separator).
    The first clique's block is copied unchanged.
    """
    _expect_kind(cond, "cond")
    values = {}
    for l in range(order.k):
        s_vars = order.separators[l]
        sset = set(s_vars)
        for e in home_sets(order, l):
            f0 = tuple(v for v in e if v in sset)
            d = tuple(v for v in e if v not in sset)
            for cell in iter_cells(e, spec, starred=True):
                d_cell = cell.restrict(d)
                total = 0.0
                for f in subsets_with_empty(f0):
                    sign = -1.0 if (len(f0) - len(f)) % 2 else 1.0
                    key = ParamKey(
                        d, d_cell.levels, s_vars, _slice_levels(s_vars, cell, f)
                    )
                    if key not in cond.values:
                        raise ValueError(
                            f"missing slice coordinate for clique {l + 1},"
                            f" slice {key.given_cell}"
                        )
                    total += sign * cond.values[key]
                values[ParamKey(e, cell.levels)] = total
    return ThetaMap("cliq", values)


def cond_from_cliq(cliq: ThetaMap, order: CliqueOrder, spec: LevelSpec) -> ThetaMap:
    """Slice-wise interactions from clique-marginal ones (subset sums).

    For D inside residual l and a slice with support F, the slice coordinate
    is the sum over G ⊆ F (empty included) of the clique coordinate on G ∪ D.
    Exact inverse of :func:`cliq_from_cond`.
    """
    _expect_kind(cliq, "cliq")
    values = {}
    for d in nonempty_subsets(order.cliques[0]):
        for cell in iter_cells(d, spec, starred=True):
            values[ParamKey(d, cell.levels)] = cliq.values[ParamKey(d, cell.levels)]
    for l in range(2, order.k + 1):
        s_vars = order.separators[l - 1]
        for s_cell in iter_cells(s_vars, spec):
            f0 = s_cell.support()
            for d in nonempty_subsets(order.residuals[l - 1]):
                for cell in iter_cells(d, spec, starred=True):
                    total = 0.0
                    for g in subsets_with_empty(f0):
                        merged = merge_cells(spec, s_cell.restrict(g), cell)
                        total += cliq.values[ParamKey(merged.vars, merged.levels)]
                    values[ParamKey(d, cell.levels, s_vars, s_cell.levels)] = total
    return ThetaMap("cond", values)


# ---------------------------------------------------------------------------
# cliq <-> mod


def _pair_adjacency(order: CliqueOrder) -> set[frozenset[str]]:
    pairs: set[frozenset[str]] = set()
    for c in order.cliques:
        for u, v in itertools.combinations(c, 2):
            pairs.add(frozenset((u, v)))
    return pairs


def _exterior_components(
    order: CliqueOrder, adj: set[frozenset[str]], l: int, e: tuple[str, ...]
) -> list[tuple[str, ...]]:
    """Interaction components of later-clique vertices that couple all of ``e``.

    The exterior of clique l is the union of C_m \\ C_l over all later
    cliques m.  Components of the induced adjacency whose neighborhoods miss
    some vertex of ``e`` contribute identically to every term of the
    alternating sum and cancel, so only fully coupled components are
    enumerated.
    """
    c_l = set(order.cliques[l])
    exterior: set[str] = set()
    for m in range(l + 1, order.k):
        exterior |= set(order.cliques[m]) - c_l
    comps: list[set[str]] = []
    remaining = set(exterior)
    while remaining:
        start = next(iter(remaining))
        comp = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for w in remaining - comp:
                if frozenset((u, w)) in adj:
                    comp.add(w)
                    stack.append(w)
        remaining -= comp
        comps.append(comp)
    kept = []
    for comp in comps:
        if all(any(frozenset((v, z)) in adj for z in comp) for v in e):
            kept.append(tuple(sorted(comp, key=order.vertices.index)))
    return kept


def mod_from_cliq(cliq: ThetaMap, order: CliqueOrder, spec: LevelSpec) -> ThetaMap:
    """Joint-table interactions from clique-marginal ones, by reverse sweep.

    Cliques are processed last to first.  A coordinate whose set lies inside
    no later separator equals its clique-marginal value; otherwise it is
    corrected by an alternating sum of log normalizers over the exterior of
    its clique, every interaction of which belongs to a later clique and is
    already available.  A lookup that would need an earlier clique signals an
    internal defect.
    """
    _expect_kind(cliq, "cliq")
    adj = _pair_adjacency(order)
    homes = {
        key: l for l in range(order.k) for key in _home_keys(order, spec, l)
    }
    done: dict[ParamKey, float] = {}

    def lookup(l: int, merged: CellIndex) -> float:
        key = ParamKey(merged.vars, merged.levels)
        if key in done:
            return done[key]
        if key in homes:
            raise InternalDefectError(
                f"reverse sweep at clique {l + 1} needs {key.vars}, whose home"
                f" clique {homes[key] + 1} has not been processed"
            )
        return 0.0  # non-complete set: exact structural zero

    for l in range(order.k - 1, -1, -1):
        c_l = set(order.cliques[l])
        later_seps = [
            set(order.separators[m])
            for m in range(l + 1, order.k)
            if c_l & set(order.cliques[m])
        ]
        comp_cache: dict[tuple[str, ...], list[tuple[str, ...]]] = {}
        for e in home_sets(order, l):
            needs_correction = any(set(e) <= s for s in later_seps)
            if e not in comp_cache:
                comp_cache[e] = _exterior_components(order, adj, l, e)
            comps = comp_cache[e]
            if needs_correction:
                n_ext = 1
                for comp in comps:
                    for v in comp:
                        n_ext *= spec.size(v)
                if n_ext > MAX_TABLE_CELLS:
                    raise ValueError(
                        f"correction for {e} at clique {l + 1} would enumerate"
                        f" {n_ext} exterior cells (limit {MAX_TABLE_CELLS})"
                    )
            for cell in iter_cells(e, spec, starred=True):
                base = cliq.values[ParamKey(e, cell.levels)]
                if not needs_correction or not comps:
                    done[ParamKey(e, cell.levels)] = base
                    continue
                corr = 0.0
                for f in subsets_with_empty(e):
                    sign = -1.0 if (len(e) - len(f)) % 2 else 1.0
                    f_cell = cell.restrict(f)
                    k_val = 0.0
                    for comp in comps:
                        k_val += _exterior_block_log_norm(
                            spec, lookup, l, f, f_cell, comp
                        )
                    corr += sign * k_val
                done[ParamKey(e, cell.levels)] = base - corr
    return ThetaMap("mod", done)


def _home_keys(order: CliqueOrder, spec: LevelSpec, l: int) -> list[ParamKey]:
    return [
        ParamKey(e, cell.levels)
        for e in home_sets(order, l)
        for cell in iter_cells(e, spec, starred=True)
    ]


def _exterior_block_log_norm(
    spec: LevelSpec,
    lookup: Callable[[int, CellIndex], float],
    l: int,
    f: tuple[str, ...],
    f_cell: CellIndex,
    comp: tuple[str, ...],
) -> float:
    """log(1 + Σ exp(...)) over the cells of one exterior component's table.

    For a component cell with support G, the exponent sums the joint
    interactions on K ∪ G' over K ⊆ f (empty included) and nonempty G' ⊆ G.
    """
    exponents = [0.0]
    for comp_cell in iter_cells(comp, spec):
        supp = comp_cell.support()
        if not supp:
            continue
        s = 0.0
        for g in nonempty_subsets(supp):
            g_cell = comp_cell.restrict(g)
            for k_sub in subsets_with_empty(f):
                merged = merge_cells(spec, f_cell.restrict(k_sub), g_cell)
                s += lookup(l, merged)
        exponents.append(s)
    return logsumexp(np.array(exponents))


def cliq_from_mod(mod: ThetaMap, order: CliqueOrder, spec: LevelSpec) -> ThetaMap:
    """Clique-marginal interactions from joint ones, by composition.

    Goes through the joint table and the slice-wise coordinates; the exact
    inverse of :func:`mod_from_cliq` up to rounding.
    """
    _expect_kind(mod, "mod")
    p = p_from_theta_mod(mod, order.graph(), spec)
    cond = theta_cond_from_p(p, order, validate=False)
    return cliq_from_cond(cond, order, spec)


# ---------------------------------------------------------------------------
# Sufficient statistics and the likelihood in each parametrization


@dataclass(frozen=True)
class SufficientStats:
    """Canonical statistics paired with each parametrization.

    ``mod`` holds marginal counts for every (complete set, starred cell);
    the ``cliq`` statistics reuse them.  ``cond`` holds per-slice counts with
    their slice totals; ``cliq_totals`` the per-slice-support totals.  Values
    are reals so fictitious (half-integer) counts fit the same carrier.
    """

    order: CliqueOrder
    spec: LevelSpec
    n_total: float
    mod: dict[ParamKey, float]
    cond: dict[ParamKey, float]
    cond_totals: dict[tuple[int, tuple[int, ...]], float]
    cliq_totals: dict[tuple[int, tuple[str, ...], tuple[int, ...]], float]

    @classmethod
    def from_table(cls, t: ContingencyTable, order: CliqueOrder) -> "SufficientStats":
        spec = t.spec
        mod = {
            key: float(marginal_count(t, CellIndex(key.vars, key.cell)))
            for key in mod_keys(order, spec)
        }
        cond: dict[ParamKey, float] = {}
        cond_totals: dict[tuple[int, tuple[int, ...]], float] = {}
        cliq_totals: dict[tuple[int, tuple[str, ...], tuple[int, ...]], float] = {}
        for key in cond_keys(order, spec):
            if key.given_vars:
                merged = merge_cells(
                    spec,
                    CellIndex(key.given_vars, key.given_cell),
                    CellIndex(key.vars, key.cell),
                )
                cond[key] = float(marginal_count(t, merged))
            else:
                cond[key] = mod[ParamKey(key.vars, key.cell)]
        for l in range(2, order.k + 1):
            s_vars = order.separators[l - 1]
            for s_cell in iter_cells(s_vars, spec):
                cond_totals[(l, s_cell.levels)] = float(marginal_count(t, s_cell))
            for f in subsets_with_empty(s_vars):
                for f_cell in iter_cells(f, spec, starred=True) if f else [CellIndex((), ())]:
                    cliq_totals[(l, f, f_cell.levels)] = float(
                        marginal_count(t, f_cell)
                    )
        return cls(order, spec, float(t.total), mod, cond, cond_totals, cliq_totals)


def loglik(theta: ThetaMap, stats: SufficientStats) -> float:
    """Log density (multinomial coefficient excluded) in the map's own coordinates.

    The three parametrizations agree with each other and with the direct sum
    of count times log probability.
    """
    if theta.kind == "mod":
        return _loglik_mod(theta, stats)
    if theta.kind == "cond":
        return _loglik_cond(theta, stats)
    if theta.kind == "cliq":
        return _loglik_cliq(theta, stats)
    raise ValueError(f"no likelihood form for kind {theta.kind!r}")


def _loglik_mod(theta: ThetaMap, stats: SufficientStats) -> float:
    if set(theta.values) != set(stats.mod):
        raise ValueError("parameter and statistic index sets differ")
    inner = sum(theta.values[k] * stats.mod[k] for k in stats.mod)
    k_full = cumulant(theta, stats.spec.names, stats.spec)
    return inner - stats.n_total * k_full


def _cond_block_value(
    theta: ThetaMap, spec: LevelSpec, vars_: tuple[str, ...],
    given_vars: tuple[str, ...], given_levels: tuple[int, ...],
    counts: dict[ParamKey, float], total: float,
) -> float:
    inner = 0.0
    for d in nonempty_subsets(vars_):
        for cell in iter_cells(d, spec, starred=True):
            key = ParamKey(d, cell.levels, given_vars, given_levels)
            inner += theta.values[key] * counts[key]

    def theta_of(f: tuple[str, ...], sub: CellIndex) -> float:
        return theta.values[ParamKey(f, sub.levels, given_vars, given_levels)]

    return inner - total * _block_cumulant(theta_of, vars_, spec)


def _loglik_cond(theta: ThetaMap, stats: SufficientStats) -> float:
    order, spec = stats.order, stats.spec
    total = _cond_block_value(
        theta, spec, order.cliques[0], (), (), stats.cond, stats.n_total
    )
    for l in range(2, order.k + 1):
        s_vars = order.separators[l - 1]
        for s_cell in iter_cells(s_vars, spec):
            total += _cond_block_value(
                theta, spec, order.residuals[l - 1], s_vars, s_cell.levels,
                stats.cond, stats.cond_totals[(l, s_cell.levels)],
            )
    return total


def _loglik_cliq(theta: ThetaMap, stats: SufficientStats) -> float:
    order, spec = stats.order, stats.spec

    def c1_theta(f: tuple[str, ...], sub: CellIndex) -> float:
        return theta.values[ParamKey(f, sub.levels)]

    total = 0.0
    for d in nonempty_subsets(order.cliques[0]):
        for cell in iter_cells(d, spec, starred=True):
            key = ParamKey(d, cell.levels)
            total += theta.values[key] * stats.mod[key]
    total -= stats.n_total * _block_cumulant(c1_theta, order.cliques[0], spec)

    for l in range(2, order.k + 1):
        s_vars = order.separators[l - 1]
        r_vars = order.residuals[l - 1]
        for e in home_sets(order, l - 1):
            for cell in iter_cells(e, spec, starred=True):
                key = ParamKey(e, cell.levels)
                total += theta.values[key] * stats.mod[key]
        for f in subsets_with_empty(s_vars):
            f_cells = iter_cells(f, spec, starred=True) if f else [CellIndex((), ())]
            for f_cell in f_cells:
                n_f = stats.cliq_totals[(l, f, f_cell.levels)]
                inner = 0.0
                for h in subsets_with_empty(f):
                    sign = -1.0 if (len(f) - len(h)) % 2 else 1.0
                    h_cell = f_cell.restrict(h)

                    def slice_theta(g: tuple[str, ...], sub: CellIndex) -> float:
                        s = 0.0
                        for k_sub in subsets_with_empty(h_cell.vars):
                            merged = merge_cells(
                                spec, h_cell.restrict(k_sub), sub
                            )
                            s += theta.values[ParamKey(merged.vars, merged.levels)]
                        return s

                    inner += sign * _block_cumulant(slice_theta, r_vars, spec)
                total -= n_f * inner
    return total
