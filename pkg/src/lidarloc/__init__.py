"""Camera localization in LiDAR point-cloud maps.

Renders synthetic depth views of a pre-built map at candidate camera poses,
scores or regresses rigid corrections, and iteratively refines a rough
initial pose estimate.
"""

from .camera import CameraModel
from .losses import PoseTarget, numerical_gradient, rotation_loss, total_loss, translation_loss
from .occlusion import OcclusionParams, brute_force_visibility, occlusion_filter
from .pointmap import CropSpec, PointCloudMap, crop_local, load_map, save_map, voxel_downsample
from .projection import (
    AugmentParams,
    DepthImage,
    augment,
    pad_image,
    project,
    save_depth_png,
    save_depth_raw,
)
from .refine import (
    GridSearchRegressor,
    IdentityRegressor,
    OracleRegressor,
    RefinementTrace,
    RenderSettings,
    SearchGrid,
    SpoolRegressor,
    StageSpec,
    default_stage_schedule,
    grid_search_correction,
    oracle_correction,
    refine,
)
from .se3 import (
    NoiseSpec,
    PoseSE3,
    Quat,
    angular_distance,
    geodesic_angle,
    matrix_to_quat,
    pose_apply,
    pose_compose,
    pose_error,
    pose_from_kitti_line,
    pose_from_matrix,
    pose_inverse,
    pose_to_kitti_line,
    pose_to_matrix,
    quat_inv,
    quat_mul,
    quat_to_matrix,
    sample_init_pose,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
