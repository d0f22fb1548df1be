"""warpalign: multiple time series alignment with a trainable piecewise-linear warper."""

from .baselines import BarycenterState, DtwResult, dba_average, dtw, dtw_distance_to_set
from .data import (
    ClassGroup,
    LabeledDataset,
    Series,
    equalize_lengths,
    equalize_lengths_to,
    group_by_label,
    grow_series,
    parse_ucr_tsv,
    shrink_series,
)
from .errors import (
    CheckpointIntegrityError,
    CheckpointVersionError,
    ConfigError,
    ContractViolation,
    FormatError,
    ParseError,
    TrainingError,
    WarpAlignError,
)
from .losses import (
    LossConfig,
    alignment_loss_and_grad,
    cosine_similarity,
    final_loss,
    main_loss,
    mean_pairwise_loss,
    penalization,
    signed_square_loss,
)
from .network import (
    Checkpoint,
    NetConfig,
    WarperNetwork,
    init_network,
    load_checkpoint,
    reduced_test_config,
    save_checkpoint,
)
from .pipeline import (
    AlignmentReport,
    ClassWarper,
    TimingRow,
    TrainConfig,
    classify_dba_nn,
    classify_dtw_nn,
    classify_nn,
    classify_ours,
    infer_warp,
    mpce,
    mtsa_objective,
    timing_bench,
    train_class_warper,
    warped_average,
)
from .warp import (
    ConstraintReport,
    PiecewiseLinearWarp,
    SoftWarpMatrix,
    WarpPath,
    apply_warp,
    build_soft_matrix,
    check_constraints,
    eval_tau,
    hard_warp_path,
    normalize_durations,
)

__version__ = "0.1.0"
