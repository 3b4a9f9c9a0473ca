"""decotab: parametrizations and reference priors for decomposable contingency tables."""

from .graphs import (
    Chordality,
    CliqueOrder,
    LabeledGraph,
    NotDecomposableError,
    boundary,
    check_decomposable,
    connected_components,
    induced_subgraph,
    is_complete,
    perfect_order,
)
from .tables import (
    CellIndex,
    ContingencyTable,
    LevelSpec,
    from_cell_counts,
    ingest_rows,
    iter_cells,
    marginal_count,
    slice_counts,
    starred_cells,
)
from .params import (
    CondProbs,
    JointProbs,
    MarkovViolationError,
    ParamKey,
    SufficientStats,
    ThetaMap,
    block_keys,
    canonical_keys,
    markov_residual,
    cliq_from_cond,
    cliq_from_mod,
    cond_from_cliq,
    conditional_prob,
    cumulant,
    loglik,
    marginal_joint,
    marginal_prob,
    mod_from_cliq,
    p_from_theta_mod,
    p_from_xi,
    theta_cond_from_p,
    theta_cond_from_xi,
    theta_mod_from_p,
    xi_from_condprobs,
    xi_from_theta_cond,
)
from .priors import (
    DirichletBlock,
    DirichletBlocks,
    FictitiousCounts,
    ThetaReferencePrior,
    fictitious_counts,
    posterior_update,
    reference_prior_pcond,
    reference_prior_theta,
    sample_posterior,
)
from .cuts import (
    CutCheck,
    CutDecomposition,
    CutProbs,
    NotACutError,
    cut_decomposition,
    cut_loglik,
    cut_reference_prior,
    is_cut,
)

__version__ = "0.1.0"
