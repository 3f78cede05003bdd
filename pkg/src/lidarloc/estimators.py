"""Scikit-learn compatible wrappers around the geometric pipeline.

These estimators expose the fit/transform/predict and get_params surface so
the pipeline pieces compose with model-selection and pipeline tooling; the
geometry itself lives in the functional modules.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .camera import CameraModel
from .occlusion import OcclusionParams, occlusion_filter
from .pointmap import CropSpec, PointCloudMap, voxel_downsample
from .projection import DepthImage
from .refine import (
    GridSearchRegressor,
    RenderSettings,
    SearchGrid,
    StageSpec,
    default_stage_schedule,
    refine,
)
from .validation import check_points


class VoxelGridDownsampler(BaseEstimator, TransformerMixin):
    """Voxel-grid downsampling as a stateless transformer.

    transform accepts an (N, 3) array or a PointCloudMap and returns the same
    kind, with one centroid per occupied voxel of side `resolution`.
    """

    def __init__(self, resolution: float = 0.1):
        self.resolution = resolution

    def fit(self, X=None, y=None):
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        return self

    def transform(self, X):
        self.fit()
        if isinstance(X, PointCloudMap):
            return voxel_downsample(X, self.resolution)
        cloud = PointCloudMap(check_points(X, "X"))
        return voxel_downsample(cloud, self.resolution).points


class OcclusionCuller(BaseEstimator, TransformerMixin):
    """Occlusion-estimation filter over DepthImage inputs.

    Set `angle_min` (radians) directly or leave it None to derive it from the
    dimensionless `threshold` via OcclusionParams.from_threshold.
    """

    def __init__(self, window: int = 5, threshold: float = 3.0, angle_min: float | None = None):
        self.window = window
        self.threshold = threshold
        self.angle_min = angle_min

    def _params(self) -> OcclusionParams:
        if self.angle_min is not None:
            return OcclusionParams(self.window, self.angle_min)
        return OcclusionParams.from_threshold(self.window, self.threshold)

    def fit(self, X=None, y=None):
        self._params()
        return self

    def transform(self, X):
        params = self._params()
        if isinstance(X, DepthImage):
            return occlusion_filter(X, params)
        return [occlusion_filter(img, params) for img in X]


class MapLocalizer(BaseEstimator):
    """Camera localizer over a fitted LiDAR map.

    fit(X) ingests map points ((N, 3) array or PointCloudMap) and voxel
    downsamples them; predict(X) refines a list of (frame, initial_pose)
    pairs and returns the localized poses. Unless explicit `regressors` are
    supplied, each stage runs a grid-search regressor against the fitted map,
    in which case every frame must be a reference DepthImage.
    """

    def __init__(
        self,
        camera: CameraModel | None = None,
        stages: list[StageSpec] | None = None,
        regressors: dict | None = None,
        map_resolution: float = 0.1,
        grid_counts: tuple = (3, 3, 3, 3, 3, 3),
        occlusion_window: int = 5,
        occlusion_threshold: float = 3.0,
        z_near: float = 0.05,
        workers: int = 1,
    ):
        self.camera = camera
        self.stages = stages
        self.regressors = regressors
        self.map_resolution = map_resolution
        self.grid_counts = grid_counts
        self.occlusion_window = occlusion_window
        self.occlusion_threshold = occlusion_threshold
        self.z_near = z_near
        self.workers = workers

    def fit(self, X, y=None):
        if self.camera is None:
            raise ValueError("MapLocalizer requires a camera")
        cloud = X if isinstance(X, PointCloudMap) else PointCloudMap(check_points(X, "X"))
        self.map_ = voxel_downsample(cloud, self.map_resolution)
        self.stages_ = list(self.stages) if self.stages is not None else default_stage_schedule()
        if self.regressors is not None:
            self.regressors_ = dict(self.regressors)
        else:
            self.regressors_ = {
                stage.regressor: GridSearchRegressor(
                    self.map_,
                    self.camera,
                    SearchGrid(
                        (stage.max_translation,) * 3 + (stage.max_rotation,) * 3,
                        tuple(self.grid_counts),
                    ),
                    z_near=self.z_near,
                )
                for stage in self.stages_
            }
        self.settings_ = RenderSettings(
            crop=CropSpec(),
            occlusion=OcclusionParams.from_threshold(self.occlusion_window, self.occlusion_threshold),
            z_near=self.z_near,
            workers=self.workers,
        )
        return self

    def _check_fitted(self):
        if not hasattr(self, "map_"):
            raise NotFittedError("MapLocalizer must be fitted with map points first")

    def predict(self, X):
        """Refine each (frame, initial_pose) pair; returns a list of poses."""
        self._check_fitted()
        poses = []
        for frame, h_init in X:
            final, _ = refine(
                h_init, frame, self.map_, self.camera, self.stages_, self.regressors_, self.settings_
            )
            poses.append(final)
        return poses

    def predict_with_traces(self, X, h_gt_list=None):
        self._check_fitted()
        results = []
        for i, (frame, h_init) in enumerate(X):
            h_gt = None if h_gt_list is None else h_gt_list[i]
            results.append(
                refine(
                    h_init, frame, self.map_, self.camera, self.stages_, self.regressors_,
                    self.settings_, h_gt=h_gt,
                )
            )
        return results
