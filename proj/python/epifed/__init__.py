"""Epidemic simulation, graph partitioning and federated epidemic prediction."""

from ._core import (  # noqa: F401
    Error,
    Graph,
    ParseError,
    ValidationError,
    accuracy,
    aggregate,
    edge_cut,
    efficacy_energy,
    epidemic_threshold,
    exact_markov_sis,
    generate_synthetic,
    graph_info,
    load_edge_list,
    macro_f1,
    partition,
    prevalence_errors,
    resolve_config,
    run_simulate,
    run_sweep,
    run_train,
    simulate,
    spectral_radius,
    top_k_by_degree,
)

__version__ = "0.1.0"
