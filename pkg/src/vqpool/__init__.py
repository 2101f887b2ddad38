"""Unsupervised pooling of frame-level speech representations via vector
quantization, plus classical baselines and a nearest-neighbor benchmark."""

from .formats import (
    DatasetHeader,
    FormatError,
    PooledEmbedding,
    UtteranceRecord,
    ValidationError,
    load_dataset,
    load_embeddings,
    read_dataset,
    read_embeddings,
    save_dataset,
    save_embeddings,
    write_dataset,
    write_embeddings,
)
from .knn import AnnConfig, Metric, NeighborIndex, build_index, classify_vote, evaluate
from .methods import MethodKind, PoolingMethod, parse_method, pool_record, pool_records
from .pooling import (
    PoolingWeights,
    normalize_weights,
    pool_average,
    pool_statistics,
    pool_weighted,
)
from .synth import SyntheticSpec, generate_synthetic
from .transforms import (
    SoftDecayParams,
    WhiteningModel,
    apply_whitening,
    fit_whitening,
    soft_decay_transform,
    svd,
)
from .vq import (
    CodebookCounts,
    EqualityMode,
    FramePartition,
    allsquash_partition,
    build_counts,
    frames_equal,
    pool_squashed,
    squash_partition,
    weights_bp,
    weights_gp,
    weights_lp,
    weights_sif,
)

__version__ = "0.1.0"
