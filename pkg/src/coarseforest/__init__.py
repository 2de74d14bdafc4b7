"""coarseforest: finite-scale constructions and checks from coarse metric geometry.

The package builds leveled Rips/ball approximations of finite metric spaces,
quotient trees of coned graph complexes, and empirical quasi-isometry /
quasi-symmetry reports for the maps between them.
"""

from coarseforest.errors import (
    BudgetExceededError,
    CoarseForestError,
    DegenerateTripleError,
    DisconnectedGraphError,
    MetricValidationError,
    NotATreeError,
    RangeExhaustedError,
)
from coarseforest.metric import (
    ChainCertificate,
    ControlFit,
    FiniteMetricSpace,
    UltrametricSpace,
    d_finitely_connected,
    epsilon_components,
    greedy_maximal_separated,
    is_ultrametric,
    quasi_symmetry_control_estimate,
    subdominant_ultrametric,
    validate_metric,
)
from coarseforest.graph import (
    ExpansionProfile,
    Graph,
    PropernessProfile,
    QIReport,
    all_pairs_distances,
    bottleneck_delta,
    expansion_profile,
    four_point_delta,
    properness_profile,
    qi_estimate,
)
from coarseforest.hyperbolic import (
    BranchPointResult,
    LeveledGraph,
    PQReport,
    analyzable_window,
    branch_point,
    build_h,
    build_rh,
    level_component_analysis,
    pq_detector,
    rh_to_h_distortion,
    rips_graph,
)
from coarseforest.gamma import GammaGraph, build_gamma, induce_hat_f, verify_gamma_qi
from coarseforest.treeify import (
    ConedComplex,
    PerturbedFunction,
    QuotientTree,
    TrackSystem,
    cone_complex,
    extract_tracks,
    loop_bound,
    perturb,
    quotient,
    rescale,
    treeify_pipeline,
)

__version__ = "0.1.0"
