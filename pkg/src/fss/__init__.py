"""Finite-size scaling toolkit for LDPC codes over the binary erasure channel.

Submodules:
    ensemble     degree distributions, density evolution, thresholds
    asymptotics  mean and covariance evolution of the peeling process, alpha
    graph        configuration-model Tanner graph sampling
    decoder      peeling decoder on sampled graphs
    scaling      basic and refined scaling laws, threshold shift, error floor
    experiment   Monte Carlo sweeps, failure classification, threshold estimation
    fit          scaling-parameter fits to empirical data
    toywalk      1-d biased random walk used to probe the n^(-1/6) correction
    cli          command-line front end (`fss`)

Heavy submodules (decoder, toywalk) compile numba kernels on import and are
not pulled in here; import them explicitly.
"""

from .errors import FssError
from .ensemble import (
    CriticalPoint,
    DegreeDistribution,
    Ensemble,
    EnsembleError,
    critical_point,
    de_evolve,
    de_threshold,
    make_regular,
    parse_distribution,
    parse_ensemble,
)
from .graph import (
    GraphError,
    TannerGraph,
    degree_census,
    degree_counts,
    dump_graph,
    load_graph,
    sample_graph,
)

__version__ = "0.1.0"

__all__ = [
    "CriticalPoint",
    "DegreeDistribution",
    "Ensemble",
    "EnsembleError",
    "FssError",
    "GraphError",
    "TannerGraph",
    "critical_point",
    "de_evolve",
    "de_threshold",
    "degree_census",
    "degree_counts",
    "dump_graph",
    "load_graph",
    "make_regular",
    "parse_distribution",
    "parse_ensemble",
    "sample_graph",
    "__version__",
]
