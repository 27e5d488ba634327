"""Random self-similar dendrites from multiplicative cascades.

Simulation library and CLI for building random dendrite graphs driven by a
multiplicative cascade, measuring their resistance metric, natural measure,
and percolation geometry, and estimating the similarity dimension.
"""

__version__ = "0.1.0"

from .addr import Address, CutSet, ROOT, concat, format_address, parse_address, truncate
from .cascade import CascadeHandle, MartingaleValue, martingale, martingale_limit_approx
from .errors import (
    BudgetError,
    CascadeError,
    ConditionError,
    InsufficientDataError,
    NoRootError,
    NotFoundError,
    UnsupportedLawError,
    ValidationError,
)
from .laws import (
    BetaIID,
    BoundedPairPlusOne,
    Deterministic,
    DiscreteIID,
    ScalingLaw,
    SqrtDirichlet,
    UniformIID,
    check_atom_mass_subcritical,
    check_pair_mean_one,
    check_small_weight_decay,
    law_from_spec,
    mean_sum_theta,
    solve_alpha,
)
from .resist import (
    ConstantPerturbation,
    ExponentialPerturbation,
    HeightSample,
    ResistanceApprox,
    UniformPerturbation,
    gw_population,
    gw_trajectory,
    height_walk,
    partial_height,
    resistance,
)
from .bulk import CutsetArrays, cutset_count_multi, expand_cutset, resistance_batch
from .dendrite import (
    DendriteEdge,
    DendriteGraph,
    VertexInfo,
    build_cutset_graph,
    build_level,
    embed,
    graph_diameter,
    graph_from_json,
    graph_to_json,
    path_resistance,
    refine_edge,
)
from .render import render_svg, write_svg
from .measure import (
    DimensionEstimate,
    MeasureAssignment,
    ball_mass_sandwich,
    cell_masses,
    cover_sum_exponent,
    cutset_masses,
    local_dimension,
    mass_convergence,
    sample_point,
    subtree_diameters,
)
from .perc import (
    ClusterReport,
    OpenMarking,
    cluster_sizes_arrays,
    epsilon0_search,
    explore_cluster,
    largest_cluster,
    mark_open,
    neighborhood_count,
    open_adjacency,
    open_cell_mask,
)
from .stats import LineFit, TailFit, fit_line, tail_fit
from .harness import ExperimentConfig, Report, run

__all__ = [
    "Address",
    "CutSet",
    "ROOT",
    "concat",
    "format_address",
    "parse_address",
    "truncate",
    "CascadeHandle",
    "MartingaleValue",
    "martingale",
    "martingale_limit_approx",
    "BetaIID",
    "BoundedPairPlusOne",
    "Deterministic",
    "DiscreteIID",
    "ScalingLaw",
    "SqrtDirichlet",
    "UniformIID",
    "check_atom_mass_subcritical",
    "check_pair_mean_one",
    "check_small_weight_decay",
    "law_from_spec",
    "mean_sum_theta",
    "solve_alpha",
    "ConstantPerturbation",
    "ExponentialPerturbation",
    "HeightSample",
    "ResistanceApprox",
    "UniformPerturbation",
    "gw_population",
    "gw_trajectory",
    "height_walk",
    "partial_height",
    "resistance",
    "CutsetArrays",
    "cutset_count_multi",
    "expand_cutset",
    "resistance_batch",
    "DendriteEdge",
    "DendriteGraph",
    "VertexInfo",
    "build_cutset_graph",
    "build_level",
    "embed",
    "graph_diameter",
    "graph_from_json",
    "graph_to_json",
    "path_resistance",
    "refine_edge",
    "render_svg",
    "write_svg",
    "DimensionEstimate",
    "MeasureAssignment",
    "ball_mass_sandwich",
    "cell_masses",
    "cover_sum_exponent",
    "cutset_masses",
    "local_dimension",
    "mass_convergence",
    "sample_point",
    "subtree_diameters",
    "ClusterReport",
    "OpenMarking",
    "cluster_sizes_arrays",
    "epsilon0_search",
    "explore_cluster",
    "largest_cluster",
    "mark_open",
    "neighborhood_count",
    "open_adjacency",
    "open_cell_mask",
    "LineFit",
    "TailFit",
    "fit_line",
    "tail_fit",
    "ExperimentConfig",
    "Report",
    "run",
    "BudgetError",
    "CascadeError",
    "ConditionError",
    "InsufficientDataError",
    "NoRootError",
    "NotFoundError",
    "UnsupportedLawError",
    "ValidationError",
]
