"""Subset selection and coresets for matrix approximation.

Well-conditioned spanning sets via ellipsoid coresets, one-sided lp Lewis
weights (offline and online), oblivious p-stable / SRHT sketches, column
subset selection for entrywise losses, online coresets for lp subspace
approximation and Euclidean (k,p)-clustering, and query-efficient active
lp regression -- with brute-force oracles so the guarantees are testable
at desk scale.
"""

from .rng import SeededRng
from .losses import LossSpec, get_loss, huber, abs_p, l1_l2, fair, cauchy
from .core import (
    InputError,
    DegenerateInputError,
    ConvergenceError,
    BudgetExceededError,
    as_matrix,
    load_matrix,
    save_matrix,
    iter_rows,
    norm,
    entrywise_norm,
    p2_norm,
    gnorm,
    least_squares,
    best_rank_k,
    numerical_rank,
)
from .ellipsoid import (
    EllipsoidCoreset,
    SpanningSet,
    mvee_coreset,
    l2_spanning_set,
    linf_embedding_subset,
    avg_top_k_embedding,
    well_cond_decomposition,
    lp_subspace_spanning,
    cascaded_inf_embedding_check,
    at_k_norm,
    coefficient_norms,
)
from .lewis import (
    LewisWeights,
    SamplingMatrix,
    compute_lewis,
    lewis_sample,
    reweight_p_to_q,
    OnlineLewisSampler,
    online_lewis,
)
from .sketching import pstable, pstable_embed, srht_apply, srht_plan, fwht
from .css import (
    CssResult,
    CssConstants,
    g_regression,
    css_gnorm,
    css_boost,
    lp_rank_factor,
    hard_instances,
)
from .online_subspace import (
    OnlineConstants,
    StrongCoreset,
    integer_round,
    OnlineSensitivityState,
    online_subspace_coreset,
    entrywise_online_coreset,
)
from .clustering import (
    ClusterConstants,
    OnlineClusterState,
    online_cluster,
    cluster_sensitivity,
    cluster_coreset,
)
from .active import (
    LabelOracle,
    ActivePlan,
    active_lp_solve,
    active_online_lp_solve,
    active_large_distortion,
    median_select,
)

__version__ = "0.1.0"
