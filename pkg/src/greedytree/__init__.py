"""Greedy impurity-based decision tree learning over product distributions.

Exact population learners, addressing-function hard instances, set-family
searches and the experiments that check memory-first query order and error
floors on them.
"""

__version__ = "0.1.0"

from .codes import SetFamily, distance, gv_search, min_weight_gray, separation_distance
from .distributions import (
    ProductDistribution,
    SmoothedSpec,
    condition,
    derive_seed,
    sample_input,
    sample_smoothed,
    xor_bias,
)
from .evaluation import (
    ErrorReport,
    agnostic_experiment,
    junta_sanity_experiment,
    leaf_mean_stats,
    memory_first_experiment,
    parity_example,
    tree_error,
)
from .exceptions import (
    ArityMismatchError,
    ConflictingRestrictionError,
    GreedyTreeError,
    InfeasibleEpsilonError,
    InfiniteSmoothnessError,
    InvalidSpecError,
    SearchFailedError,
    UnsupportedTargetError,
)
from .harness import ExperimentConfig, RunRecord, export_dataset, run
from .impurity import ENTROPY, GINI, KM, ImpurityFunction, gain_ratio_bounds, get_impurity, purity_gain
from .learner import GreedyTreeClassifier, GrowthPolicy, build_tree_exact, build_tree_sampled
from .targets import (
    AddressingTarget,
    CodedAddressing,
    DisjointParityAddressing,
    Restriction,
    RestrictedTarget,
    address_pmf,
    expectation,
    junta_distance,
    make_agnostic_restriction,
    target_from_spec,
)
from .tree import DecisionTree

__all__ = [name for name in dir() if not name.startswith("_")]
