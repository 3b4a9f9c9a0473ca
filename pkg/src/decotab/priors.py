"""Reference priors, conjugate updating and posterior sampling.

The reference prior for the clique/separator probability blocks is a product
of symmetric Dirichlet(1/2) distributions, one per block.  Pushed through the
(unit-Jacobian) parameter transforms it stays in conjugate form: the same
likelihood expressions with the observed counts replaced by half-integer
fictitious counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .graphs import CliqueOrder
from .params import (
    CondProbs,
    ParamKey,
    SufficientStats,
    ThetaMap,
    block_keys,
    cliq_from_mod,
    cond_keys,
    loglik,
    mod_keys,
)
from .tables import (
    CellIndex,
    ContingencyTable,
    LevelSpec,
    iter_cells,
    marginal_count,
    merge_cells,
    subsets_with_empty,
)

HALF = Fraction(1, 2)


@dataclass(frozen=True)
class DirichletBlock:
    """One Dirichlet-distributed probability block.

    ``vars``/``cells`` enumerate the block's table; ``given_vars``/
    ``given_cell`` identify the conditioning slice (empty for a marginal
    block).  ``alpha`` entries are positive, half-integer valued.
    """

    label: str
    vars: tuple[str, ...]
    given_vars: tuple[str, ...]
    given_cell: tuple[int, ...]
    cells: tuple[tuple[int, ...], ...]
    alpha: tuple[float, ...]

    def __post_init__(self):
        if len(self.cells) != len(self.alpha):
            raise ValueError("cells and alpha differ in length")
        if any(a <= 0 for a in self.alpha):
            raise ValueError(f"block {self.label}: improper hyperparameters")

    @property
    def dim(self) -> int:
        return len(self.cells)

    def alpha_rationals(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(a) for a in self.alpha)

    def mean(self) -> np.ndarray:
        a = np.asarray(self.alpha, dtype=float)
        return a / a.sum()

    def log_beta(self) -> float:
        """Log multivariate beta function of the hyperparameter vector."""
        return sum(math.lgamma(a) for a in self.alpha) - math.lgamma(sum(self.alpha))


@dataclass(frozen=True)
class DirichletBlocks:
    """An ordered product of Dirichlet blocks (a prior or posterior).

    ``grouping`` records which blocks the reference-prior construction treats
    as one group; merging groups leaves the density untouched, so it is pure
    metadata.
    """

    spec: LevelSpec
    blocks: tuple[DirichletBlock, ...]
    grouping: tuple[tuple[int, ...], ...]

    def block(self, label: str) -> DirichletBlock:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)

    def log_normalizer(self) -> float:
        return sum(b.log_beta() for b in self.blocks)

    def log_density_probs(self, probs: Sequence[np.ndarray]) -> float:
        """Log density at the given per-block probability vectors."""
        if len(probs) != len(self.blocks):
            raise ValueError("one probability vector per block required")
        total = -self.log_normalizer()
        for b, q in zip(self.blocks, probs):
            q = np.asarray(q, dtype=float).reshape(-1)
            if q.shape != (b.dim,):
                raise ValueError(f"block {b.label}: wrong vector length")
            total += float(((np.asarray(b.alpha) - 1.0) * np.log(q)).sum())
        return total


def _slice_label(l: int, s_vars: tuple[str, ...], s_cell: tuple[int, ...]) -> str:
    if not s_vars:
        return f"C{l}"
    inside = ",".join(f"{v}={x}" for v, x in zip(s_vars, s_cell))
    return f"R{l}|{inside}"


def reference_prior_pcond(
    order: CliqueOrder, spec: LevelSpec, *, merge_slices: bool = False
) -> DirichletBlocks:
    """Dirichlet(1/2,...,1/2) on every clique/separator factorization block.

    With ``merge_slices`` the slices of each residual are recorded as a
    single reference-prior group; the density is identical either way.
    """
    blocks = []
    group_of: list[int] = []
    for l, s_levels in block_keys(order, spec):
        if l == 1:
            vars_, given_vars = order.cliques[0], ()
        else:
            vars_, given_vars = order.residuals[l - 1], order.separators[l - 1]
        cells = tuple(c.levels for c in iter_cells(vars_, spec))
        blocks.append(
            DirichletBlock(
                label=_slice_label(l, given_vars, s_levels),
                vars=vars_,
                given_vars=given_vars,
                given_cell=s_levels,
                cells=cells,
                alpha=(0.5,) * len(cells),
            )
        )
        group_of.append(l if merge_slices else len(blocks))
    grouping: dict[int, list[int]] = {}
    for i, gid in enumerate(group_of):
        grouping.setdefault(gid, []).append(i)
    return DirichletBlocks(
        spec, tuple(blocks), tuple(tuple(g) for g in grouping.values())
    )


def posterior_update(prior: DirichletBlocks, t: ContingencyTable) -> DirichletBlocks:
    """Conjugate update: every cell hyperparameter gains its observed count."""
    if t.spec != prior.spec:
        raise ValueError("table and prior are on different models")
    new_blocks = []
    for b in prior.blocks:
        given = CellIndex(b.given_vars, b.given_cell)
        alpha = []
        for levels, a in zip(b.cells, b.alpha):
            cell = merge_cells(t.spec, given, CellIndex(b.vars, levels))
            alpha.append(a + marginal_count(t, cell))
        new_blocks.append(
            DirichletBlock(b.label, b.vars, b.given_vars, b.given_cell, b.cells, tuple(alpha))
        )
    return DirichletBlocks(prior.spec, tuple(new_blocks), prior.grouping)


def sample_blocks(
    blocks: DirichletBlocks, seed: int, n_draws: int
) -> list[list[np.ndarray]]:
    """Independent joint draws, one probability vector per block per draw.

    Stream-splitting rule: draw d uses SeedSequence(seed).spawn(n_draws)[d];
    within a draw the blocks consume that generator in canonical block
    order.  Identical seeds give identical draws regardless of how draws are
    distributed across workers.
    """
    if n_draws < 0:
        raise ValueError("n_draws must be nonnegative")
    children = np.random.SeedSequence(seed).spawn(n_draws)
    draws = []
    for child in children:
        rng = np.random.default_rng(child)
        vecs = []
        for b in blocks.blocks:
            g = rng.gamma(shape=np.asarray(b.alpha, dtype=float))
            vecs.append(g / g.sum())
        draws.append(vecs)
    return draws


def sample_posterior(
    post: DirichletBlocks, order: CliqueOrder, seed: int, n_draws: int
) -> list[CondProbs]:
    """Exact conjugate sampling of the probability blocks, as CondProbs."""
    keys = block_keys(order, post.spec)
    if len(keys) != len(post.blocks):
        raise ValueError("blocks do not form a clique/separator factorization")
    out = []
    for vecs in sample_blocks(post, seed, n_draws):
        block_map = {}
        for (l, s_levels), b, vec in zip(keys, post.blocks, vecs):
            shape = tuple(post.spec.size(v) for v in b.vars)
            block_map[(l, s_levels)] = vec.reshape(shape)
        out.append(CondProbs(order, post.spec, block_map))
    return out


# ---------------------------------------------------------------------------
# Fictitious counts and theta-space reference priors


@dataclass(frozen=True)
class FictitiousCounts:
    """Half-integer pseudo-counts that put the reference prior in conjugate form.

    For the ``cond`` statistics, a cell of the first clique's table is backed
    by half the number of table cells extending it; each residual slice is an
    all-halves table of its own.  For ``cliq`` the per-slice tables aggregate
    across slice supports.  Values are exact rationals.
    """

    tag: str
    order: CliqueOrder
    spec: LevelSpec
    entries: dict[ParamKey, Fraction]
    totals: dict[tuple, Fraction]
    grand_total: Fraction

    def to_stats(self) -> SufficientStats:
        order, spec = self.order, self.spec
        mod: dict[ParamKey, float] = {}
        cond: dict[ParamKey, float] = {}
        cond_totals: dict[tuple[int, tuple[int, ...]], float] = {}
        cliq_totals: dict[tuple[int, tuple[str, ...], tuple[int, ...]], float] = {}
        if self.tag == "cond":
            cond = {k: float(v) for k, v in self.entries.items()}
            cond_totals = {k: float(v) for k, v in self.totals.items()}
        else:
            mod = {k: float(v) for k, v in self.entries.items()}
            cliq_totals = {k: float(v) for k, v in self.totals.items()}
        return SufficientStats(
            order, spec, float(self.grand_total), mod, cond, cond_totals, cliq_totals
        )


def _n_cells(spec: LevelSpec, vars_: Iterable[str]) -> int:
    out = 1
    for v in vars_:
        out *= spec.size(v)
    return out


def fictitious_counts(tag: str, order: CliqueOrder, spec: LevelSpec) -> FictitiousCounts:
    """The prior pseudo-counts for the ``cond`` or ``cliq`` statistics.

    cond: a marginal cell of the first clique on D counts |cells of C_1 \\ D|/2
    with grand total |cells of C_1|/2; a slice cell on D counts
    |cells of R_l \\ D|/2 with slice total |cells of R_l|/2.

    cliq: a cell on slice-support F and residual set D counts
    |cells of S_l \\ F| * |cells of R_l \\ D| / 2, with per-support total
    |cells of S_l \\ F| * |cells of R_l| / 2.  The empty set has one cell.
    """
    if tag not in ("cond", "cliq"):
        raise ValueError(f"unknown fictitious-count tag {tag!r}")
    c1 = order.cliques[0]
    entries: dict[ParamKey, Fraction] = {}
    totals: dict[tuple, Fraction] = {}
    grand = Fraction(_n_cells(spec, c1), 2)
    if tag == "cond":
        for key in cond_keys(order, spec):
            if not key.given_vars and set(key.vars) <= set(c1):
                rest = [v for v in c1 if v not in key.vars]
            else:
                l = _clique_of_residual(order, key.given_vars, key.vars)
                r_vars = order.residuals[l - 1]
                rest = [v for v in r_vars if v not in key.vars]
            entries[key] = Fraction(_n_cells(spec, rest), 2)
        for l in range(2, order.k + 1):
            half_r = Fraction(_n_cells(spec, order.residuals[l - 1]), 2)
            for s_cell in iter_cells(order.separators[l - 1], spec):
                totals[(l, s_cell.levels)] = half_r
    else:
        for key in mod_keys(order, spec):
            l = order.home(key.vars) + 1
            if l == 1:
                rest = [v for v in c1 if v not in key.vars]
                entries[key] = Fraction(_n_cells(spec, rest), 2)
            else:
                s_vars = order.separators[l - 1]
                r_vars = order.residuals[l - 1]
                f = [v for v in key.vars if v in s_vars]
                d = [v for v in key.vars if v in r_vars]
                s_rest = [v for v in s_vars if v not in f]
                r_rest = [v for v in r_vars if v not in d]
                entries[key] = Fraction(
                    _n_cells(spec, s_rest) * _n_cells(spec, r_rest), 2
                )
        for l in range(2, order.k + 1):
            s_vars = order.separators[l - 1]
            r_size = _n_cells(spec, order.residuals[l - 1])
            for f in subsets_with_empty(s_vars):
                s_rest = [v for v in s_vars if v not in f]
                value = Fraction(_n_cells(spec, s_rest) * r_size, 2)
                for f_cell in iter_cells(f, spec, starred=True):
                    totals[(l, f, f_cell.levels)] = value
    return FictitiousCounts(tag, order, spec, entries, totals, grand)


def _clique_of_residual(
    order: CliqueOrder, s_vars: tuple[str, ...], d: tuple[str, ...]
) -> int:
    for l in range(2, order.k + 1):
        if order.separators[l - 1] == s_vars and set(d) <= set(order.residuals[l - 1]):
            return l
    raise KeyError(f"no residual block with separator {s_vars} containing {d}")


@dataclass(frozen=True)
class ThetaReferencePrior:
    """Reference prior on one of the interaction parametrizations.

    Represented by its conjugate form: the likelihood of the matching
    parametrization evaluated at fictitious counts, normalized by the product
    of Dirichlet normalizers (the transforms from the probability blocks all
    have unit Jacobian).  The ``mod`` prior is the ``cliq`` one re-expressed,
    so points are transformed before evaluation.
    """

    tag: str
    order: CliqueOrder
    spec: LevelSpec
    fictitious: FictitiousCounts
    log_normalizer: float

    def log_density(self, theta: ThetaMap) -> float:
        if self.tag == "mod":
            point = cliq_from_mod(theta, self.order, self.spec)
        else:
            point = theta
        if point.kind != self.fictitious.tag:
            raise ValueError(
                f"prior on {self.tag!r} cannot evaluate a {theta.kind!r} point"
            )
        return loglik(point, self.fictitious.to_stats()) - self.log_normalizer


def reference_prior_theta(
    tag: str, order: CliqueOrder, spec: LevelSpec
) -> ThetaReferencePrior:
    """Log-density evaluator plus fictitious counts for cond, cliq or mod."""
    if tag not in ("cond", "cliq", "mod"):
        raise ValueError(f"unknown parametrization tag {tag!r}")
    fict = fictitious_counts("cliq" if tag == "mod" else tag, order, spec)
    log_norm = reference_prior_pcond(order, spec).log_normalizer()
    return ThetaReferencePrior(tag, order, spec, fict, log_norm)
