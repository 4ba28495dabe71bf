"""Katz centrality and walk counts under edge local differential privacy.

Modules
-------
graph
    ``Graph``, edge-list loading, degree profile, spectral radius, clipping parameters.
exact
    Exact walk counts and Katz centrality (recursion, dense solve, brute force).
privacy
    Seeded Laplace noise, per-round noise scale, budget ledger.
protocol
    The multi-round clipped-noise protocol and its trace.
analysis
    Monte-Carlo harness, top-k recall, error bounds, ratio test, sweeps.
cli
    ``ldpkatz`` command line.
"""

from .analysis import (
    PHI,
    BoundReport,
    ExperimentResult,
    bound_katz_bias,
    bound_katz_variance,
    bound_path_bias,
    bound_path_variance,
    bound_report,
    monte_carlo,
    noclip_noise_growth,
    privacy_ratio_check,
    sweep,
    topk_recall,
)
from .exact import (
    CentralityVector,
    brute_force_walk_count,
    exact_katz_iterative,
    exact_katz_solve,
    exact_path_counts,
    true_katz,
)
from .graph import (
    ClippingParams,
    DegreeProfile,
    EdgeListParseError,
    Graph,
    degree_profile,
    load_edge_list,
    max_eigenvalue,
    select_clipping_params,
    write_edge_list,
)
from .privacy import (
    BudgetLedger,
    NoiseSource,
    expected_max_abs_laplace,
    laplace_sample,
    make_ledger,
    round_noise_scale,
)
from .protocol import ProtocolConfig, ProtocolRun, run_path_estimation, run_protocol

__version__ = "0.1.0"
