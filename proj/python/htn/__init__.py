"""Hidden tree Markov networks.

Ensembles of bottom-up hidden tree Markov models combined through fixed
contrastive units and an adaptive softmax head, for classifying labeled
ordered trees of varying shape. The heavy lifting lives in the C++ extension
module; this package re-exports its public surface.
"""

from htn._core import (  # noqa: F401
    Dataset,
    EpochRecord,
    FoldSplit,
    ForwardTrace,
    GridCell,
    GridSearchResult,
    GroupCheck,
    HtmmParameters,
    HtnModel,
    LabelVocab,
    LabeledTree,
    MalformedInput,
    Metrics,
    ModelArchive,
    NodePosteriors,
    Normalization,
    ProbTables,
    SelectionScheme,
    SyntheticSpec,
    TrainConfig,
    TrainResult,
    TreeNode,
    TreeParseError,
    VersionMismatch,
    brute_force_marginal,
    brute_force_posteriors,
    em_step,
    evaluate,
    finite_difference_report,
    forward,
    generate_synthetic,
    generative_baseline,
    grid_search,
    isomorphic,
    load_archive,
    load_dataset,
    loss,
    materialize,
    pair_index,
    parse_tree,
    predict,
    save_archive,
    save_dataset,
    serialize_tree,
    stratified_folds,
    total_log_likelihood,
    train,
    upward_downward,
    upward_log_likelihood,
)

__version__ = "0.1.0"
