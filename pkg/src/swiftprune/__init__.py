"""swiftprune: post-training weight pruning without Hessian inversions.

Scores each weight by the increase in layerwise reconstruction loss its
removal would cause, using a closed-form rank-one curvature model that
collapses the usual O(n^3) inverse-Hessian work to O(1) per weight. Pruning
decisions are made in a single streaming pass with an RTT-style EWMA
detector, optionally under an N:M structural constraint. Compiled kernels
(Cython) and a bit-identical pure-Python fallback are selected at import.
"""

from swiftprune._kernels import available_backends, backend_name
from swiftprune.compare import run_compare
from swiftprune.errors import (
    ConfigError,
    DataError,
    DimensionError,
    DomainError,
    FormatError,
    NumericalError,
    StructureError,
    SwiftPruneError,
    TruncationError,
)
from swiftprune.ewma import (
    EwmaParams,
    RowResult,
    TensorState,
    ewma_step,
    init_state,
    la_for_sparsity,
    prune_matrix,
    prune_row,
)
from swiftprune.io import (
    RunConfig,
    TraceRecord,
    mask_sparsity,
    read_config,
    read_mask,
    read_matrix,
    read_trace,
    read_vector,
    write_config,
    write_mask,
    write_matrix,
    write_trace,
)
from swiftprune.metrics import (
    ContributionScore,
    RowContext,
    approximation_deviation,
    contribution,
    exact_contribution,
    hessian_matrix,
    hqq_inv_brute,
    hqq_inv_closed,
    layer_loss,
    magnitude_score,
    magnitude_scores,
    row_loss,
    score_matrix,
    wanda_score,
    wanda_scores,
)
from swiftprune.nm import (
    NMPattern,
    PackedNM,
    masked_matvec,
    pack_nm,
    prune_matrix_nm,
    read_packed_nm,
    select_nm_group,
    unpack_nm,
    write_packed_nm,
)
from swiftprune.reports import CompareReport, PruneReport, read_report
from swiftprune.select import (
    magnitude_threshold_prune,
    oracle_prune,
    prune_with_config,
    topk_prune,
)
from swiftprune.synth import synth_fixture

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
