"""Completion-time modelling and device planning for CoCoA-style learning over wireless edge devices."""

from .channel import (
    PhaseOutages,
    RadioConfig,
    SnrProfile,
    db_to_linear,
    linear_to_db,
    outage_data_dist,
    outage_local_update_noma,
    outage_local_update_oma,
    outage_multicast,
    outage_worstbest_multicast,
    phase_outages,
)
from .cocoa import (
    Dataset,
    DualState,
    LossKit,
    Partition,
    TrainingDiverged,
    TrainTrace,
    centralized_baseline,
    duality_gap,
    global_step,
    local_solve,
    partition_dataset,
    sigma_max,
    sigma_prime,
    train,
)
from .completion import (
    CompletionEstimate,
    SystemConfig,
    avg_completion_mc,
    centralized_time,
    completion_bounds,
    expected_completion_closed,
    global_iterations,
    iteration_budget,
    local_compute_time,
    respace,
)
from .errors import DegenerateModelWarning, DivergenceError, DomainError
from .experiments import ExperimentConfig, load_dataset, parse_config, parse_config_text
from .planner import (
    AdditionVerdict,
    addition_verdict,
    high_accuracy_condition,
    necessary_condition_holds,
    optimal_k_search,
    q_of_k,
    stationarity_residual,
    stationary_point,
)
from .retransmission import (
    TxCountModel,
    expected_max_tx_bounds,
    expected_max_tx_iid,
    expected_max_tx_series,
    expected_max_weighted_tx_mc,
    geometric_pmf,
    sample_tx_count,
)

__version__ = "0.1.0"
