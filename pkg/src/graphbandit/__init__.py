"""Graph-clustered contextual bandits.

A toolkit for recommendation experiments where users are clustered online:
per-user ridge estimates feed an RBF similarity graph, the graph is
sparsified and partitioned into communities, and arm selection runs a
ridge-UCB rule on the active user's cluster aggregate.  Includes per-user
LinUCB and edge-deletion (connected components) baselines, synthetic and
logged-replay environments, a tag-dataset ingest pipeline, and a seeded
benchmark harness with CSV/SVG reporting.
"""

__version__ = "0.1.0"

from .environments import (
    LoggedWorld,
    Round,
    SyntheticWorld,
    generate_world,
    instant_regret,
    realize_payoff,
    sample_logged_round,
    sample_round,
)
from .linalg import (
    PCAResult,
    inv_rank_one_update,
    pca_fit,
    rank_one_update,
    rbf_weight,
    solve_spd,
)
from .policies import (
    CLUBPolicy,
    ClusterAggregate,
    GraphClusterPolicy,
    LinUCBPolicy,
    PolicyConfig,
    RandomPolicy,
    SharedLinUCBPolicy,
    UserEstimate,
    cluster_aggregate,
    confidence_bound,
    make_policy,
)
from .usergraph import (
    SimilarityGraph,
    build_similarity_graph,
    louvain,
    median_pairwise_distance,
    modularity,
    nmi,
    sparsify_top_n,
)

__all__ = [
    "__version__",
    # linalg
    "rank_one_update",
    "solve_spd",
    "inv_rank_one_update",
    "pca_fit",
    "PCAResult",
    "rbf_weight",
    # environments
    "SyntheticWorld",
    "LoggedWorld",
    "Round",
    "generate_world",
    "sample_round",
    "realize_payoff",
    "instant_regret",
    "sample_logged_round",
    # usergraph
    "SimilarityGraph",
    "build_similarity_graph",
    "median_pairwise_distance",
    "sparsify_top_n",
    "louvain",
    "modularity",
    "nmi",
    # policies
    "PolicyConfig",
    "UserEstimate",
    "ClusterAggregate",
    "confidence_bound",
    "cluster_aggregate",
    "GraphClusterPolicy",
    "LinUCBPolicy",
    "SharedLinUCBPolicy",
    "CLUBPolicy",
    "RandomPolicy",
    "make_policy",
]
