"""Structurally-controlled random-graph OOD benchmarks for message-passing
networks: relaxed Watts-Strogatz generation, exact/MCMC Ising targets,
graph-theory multi-task targets, a minimal autodiff GNN engine with
multi-module update functions, and BounceGrad meta-learning."""

from .graphs import GenParams, Graph, GraphMeasures, generate, iso_key, measures
from .embedding import (
    PcaModel,
    SplitSpec,
    degree_histogram,
    fit_pca,
    project,
    select_groups,
    subsample_test,
)
from .ising import (
    IsingModel,
    accept_targets,
    exact_marginals,
    gibbs_marginals,
    mean_kl,
    sample_model,
)
from .graph_tasks import (
    MultiTaskTarget,
    TaskFeatures,
    diameter,
    eccentricity_all,
    is_connected,
    laplacian_features,
    make_features,
    spectral_radius,
    sssp,
)
from .model import (
    GTheoryInstance,
    IsingInstance,
    MessageStats,
    ProcessorConfig,
    collect_message_stats,
    gtheory_config,
    ising_config,
    train,
)
from .annealing import (
    SaState,
    accept,
    bounce,
    meta_test_search,
    meta_train,
    propose,
    schedule_temp,
)

__version__ = "0.1.0"
