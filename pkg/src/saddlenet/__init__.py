"""Distributed saddle-point subgradient dynamics with Laplacian averaging.

Library layout:

* :mod:`saddlenet.graph`: weighted digraphs, time-varying sequences, and the
  consensus constants (nondegeneracy, degrees, spectral bound, stepsize
  window, small-world generator).
* :mod:`saddlenet.projections`: exact Euclidean projections onto the convex
  sets the dynamics projects onto.
* :mod:`saddlenet.dynamics`: the projected saddle-point subgradient dynamics
  with Laplacian averaging, learning-rate schedules, and run traces.
* :mod:`saddlenet.constrained`: separable constrained problems, their
  distributed Lagrangian saddle form, the per-agent algorithm, and the
  distributed protocol bounding the optimal dual set.
* :mod:`saddlenet.analysis`: every convergence-bound constant and runnable
  checks of the ISS, certificate, and envelope inequalities.
* :mod:`saddlenet.benchmark`: the resource-allocation benchmark family and
  the experiment harness behind the CLI.
"""

from .analysis import (
    BoundConstants,
    IssReport,
    Lemma42Report,
    c_u,
    cdoubling,
    check_iss_bounds,
    check_lemma42,
    corollary_constants,
    cumulative_disagreement,
    disagreement,
    theorem_bound,
)
from .benchmark import (
    BenchmarkInstance,
    ExperimentConfig,
    OracleSolution,
    benchmark_graphs,
    dual_radius_formula,
    fit_loglog_slope,
    lagrangian_saddle,
    oracle_solve,
    random_instance,
    run_benchmark,
    to_separable,
    write_outputs,
)
from .constrained import (
    DualBoundRun,
    SeparableProblem,
    SlaterPoint,
    build_lagrangian_saddle,
    cspsg_step,
    max_agreement_round,
    min_agreement_round,
    run_dual_bound_protocol,
    slater_components,
)
from .dynamics import (
    ConstantRate,
    DoublingTrick,
    HarmonicRate,
    InvSqrtRate,
    NetworkState,
    RunTrace,
    SaddleProblem,
    initial_state,
    rate,
    run,
    step,
    update_running_average,
)
from .graph import (
    DigraphSequence,
    WeightedDigraph,
    check_joint_connectivity,
    consensus_stepsize_interval,
    is_strongly_connected,
    is_weight_balanced,
    laplacian,
    max_out_degree,
    nondegeneracy_delta,
    sigma_max_bound,
    watts_strogatz,
)
from .projections import (
    Box,
    CenteredBall,
    ConvexSet,
    FullSpace,
    NonnegOrthant,
    OrthantBall,
    Product,
    Replicated,
    project,
    residual,
    set_from_json,
    set_to_json,
)

__version__ = "0.1.0"
