"""Optimization-based keyframe sampling for LiDAR place recognition.

The package streams odometry frames through a sliding-window combinatorial
optimizer that balances descriptor redundancy against descriptor-space
information preservation, ships the usual baseline samplers behind the
same estimator interface, and evaluates the resulting keyframe maps with
precision/recall retrieval metrics.
"""

__version__ = "0.1.0"

from .core import (
    Keyframe,
    KeyframeStore,
    KeyframeWindow,
    Pose,
    Session,
    ValidationError,
    cumulative_arclength,
    pose_distance,
)
from .terms import (
    ObjectiveParams,
    descriptor_distance,
    descriptor_similarity,
    eigendecompose,
    numerical_jacobian,
    objective,
    preservation,
    redundancy,
    transform_descriptors,
)
from .optimizer import (
    OptimizerState,
    SubsetSelection,
    WindowConfig,
    enumerate_feasible_subsets,
    extend_with_neighbors,
    finalize,
    optimize_window,
    process_frame,
    slide_amount,
)
from .samplers import (
    AllFramesSampler,
    ConstantIntervalSampler,
    EntropySampler,
    SamplerOutput,
    SpaciousnessSampler,
    WindowOptimizedSampler,
    make_sampler,
    sample_all,
    sample_constant,
    sample_entropy,
    sample_optimized,
    sample_spaciousness,
)
from .descriptors import (
    ScanContextConfig,
    SyntheticFieldConfig,
    load_descriptors,
    ring_key,
    save_descriptors,
    scan_context,
    synthetic_descriptor,
)
from .evaluation import (
    EvalConfig,
    EvalReport,
    auc,
    evaluate_gpr,
    evaluate_lcd,
    f1_max,
    memory_ratio,
    query_benchmark,
)
from .dataset_io import (
    SplitMix64,
    SyntheticSessionSpec,
    generate_synthetic_session,
    read_kitti_poses,
    read_pointcloud_bin,
    read_tum_poses,
    write_results,
    write_svg_plot,
)
