"""Iterative pose refinement: a cascade of regressors over re-rendered views.

Every stage renders the map at the current pose estimate, asks its regressor
for a rigid correction and applies it on the camera side:
new = compose(correction, current). Stages are trained/valid for descending
error ranges, so later stages see increasingly aligned views. A single
refinement is inherently sequential; distinct frames can refine concurrently
against the shared immutable map.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np

from .camera import CameraModel
from .losses import PoseTarget
from .occlusion import OcclusionParams, occlusion_filter
from .pointmap import CropSpec, PointCloudMap, crop_local
from .projection import DEFAULT_Z_NEAR, DepthImage, project, save_depth_raw
from .se3 import (
    NoiseSpec,
    PoseSE3,
    Quat,
    camera_center,
    euler_zyx_to_quat,
    geodesic_angle,
    pose_compose,
    pose_error,
    pose_inverse,
    quat_inv,
    quat_mul,
    quat_to_euler_zyx,
    quat_to_matrix,
    sample_init_pose,
)


class RegressorProtocol(Protocol):
    """Anything that predicts a camera-frame pose correction from a view pair."""

    def predict(self, frame, lidar_image: DepthImage) -> PoseTarget: ...


@dataclass(frozen=True)
class StageSpec:
    """One cascade stage: regressor binding plus its trained error range."""

    regressor: str
    max_translation: float
    max_rotation: float  # radians

    def __post_init__(self):
        if self.max_translation <= 0 or self.max_rotation <= 0:
            raise ValueError("stage error ranges must be positive")


def default_stage_schedule(regressor: str = "default") -> list[StageSpec]:
    """Three stages with the published descending error ranges."""
    return [
        StageSpec(regressor, 2.0, math.radians(10.0)),
        StageSpec(regressor, 1.0, math.radians(2.0)),
        StageSpec(regressor, 0.6, math.radians(2.0)),
    ]


@dataclass(frozen=True)
class RenderSettings:
    crop: CropSpec = CropSpec()
    occlusion: OcclusionParams | None = OcclusionParams()
    z_near: float = DEFAULT_Z_NEAR
    workers: int = 1


@dataclass
class TraceEntry:
    stage: int
    pose: PoseSE3
    render_pose: PoseSE3 | None = None
    error: np.ndarray | None = None
    translation_error: float | None = None
    rotation_error: float | None = None
    render_ms: float = 0.0
    predict_ms: float = 0.0
    range_exceeded: bool | None = None


@dataclass
class RefinementTrace:
    """Stage-0 initial state plus one entry per executed stage."""

    entries: list[TraceEntry] = field(default_factory=list)

    def final_pose(self) -> PoseSE3:
        return self.entries[-1].pose

    def errors(self) -> np.ndarray:
        return np.array([e.error for e in self.entries])

    def csv_rows(self) -> list[list]:
        rows = [["stage", "longitudinal", "lateral", "vertical", "roll", "pitch", "yaw",
                 "translation_norm", "rotation_angle", "render_ms", "predict_ms", "range_exceeded"]]
        for e in self.entries:
            err = ["", "", "", "", "", ""] if e.error is None else [repr(float(v)) for v in e.error]
            rows.append(
                [e.stage, *err,
                 "" if e.translation_error is None else repr(e.translation_error),
                 "" if e.rotation_error is None else repr(e.rotation_error),
                 repr(round(e.render_ms, 3)), repr(round(e.predict_ms, 3)),
                 "" if e.range_exceeded is None else str(e.range_exceeded)]
            )
        return rows

    def to_json_dict(self) -> dict:
        from .se3 import pose_to_kitti_line

        return {
            "stages": [
                {
                    "stage": e.stage,
                    "pose": pose_to_kitti_line(e.pose),
                    "render_pose": None if e.render_pose is None else pose_to_kitti_line(e.render_pose),
                    "error": None if e.error is None else [float(v) for v in e.error],
                    "translation_error": e.translation_error,
                    "rotation_error": e.rotation_error,
                    "render_ms": round(e.render_ms, 3),
                    "predict_ms": round(e.predict_ms, 3),
                    "range_exceeded": e.range_exceeded,
                }
                for e in self.entries
            ]
        }


class RefinementError(RuntimeError):
    """A regressor failed; `trace` holds the stages completed so far."""

    def __init__(self, message: str, trace: RefinementTrace):
        super().__init__(message)
        self.trace = trace


def needed_correction(h_gt: PoseSE3, h_current: PoseSE3) -> PoseSE3:
    """Exact camera-side correction C with compose(C, h_current) = h_gt."""
    return pose_compose(h_gt, pose_inverse(h_current))


def _within_range(delta: PoseSE3, stage: StageSpec) -> bool:
    if np.max(np.abs(delta.translation)) > stage.max_translation:
        return False
    angles = quat_to_euler_zyx(delta.rotation.normalized())
    return max(abs(a) for a in angles) <= stage.max_rotation


def _gt_entry_fields(entry: TraceEntry, h_gt: PoseSE3 | None) -> None:
    if h_gt is None:
        return
    entry.error = pose_error(h_gt, entry.pose)
    entry.translation_error = float(np.linalg.norm(entry.error[:3]))
    entry.rotation_error = geodesic_angle(h_gt, entry.pose)


def refine(
    h_init: PoseSE3,
    frame,
    cloud: PointCloudMap,
    camera: CameraModel,
    stages: Sequence[StageSpec],
    regressors: Mapping[str, RegressorProtocol],
    settings: RenderSettings | None = None,
    h_gt: PoseSE3 | None = None,
) -> tuple[PoseSE3, RefinementTrace]:
    """Run the stage cascade from `h_init`; returns the final pose and trace.

    Each stage crops the map at the current estimate, renders the depth view,
    applies the occlusion filter when configured, queries the stage regressor
    and composes the predicted correction. When `h_gt` is given the trace
    carries per-stage error decompositions and a flag for stages whose
    incoming error exceeded their trained range (refinement still proceeds).
    """
    if not stages:
        raise ValueError("stage schedule is empty")
    for prev, nxt in zip(stages, stages[1:]):
        if nxt.max_translation > prev.max_translation:
            raise ValueError("stages must have non-increasing translation ranges")
    missing = [s.regressor for s in stages if s.regressor not in regressors]
    if missing:
        raise ValueError(f"no regressor bound for stage id(s): {sorted(set(missing))}")
    settings = settings or RenderSettings()

    trace = RefinementTrace()
    first = TraceEntry(stage=0, pose=h_init)
    _gt_entry_fields(first, h_gt)
    trace.entries.append(first)

    current = h_init
    for idx, stage in enumerate(stages, start=1):
        exceeded = None
        if h_gt is not None:
            exceeded = not _within_range(needed_correction(h_gt, current), stage)

        t0 = time.perf_counter()
        cropped = crop_local(cloud, current, settings.crop)
        view = project(cropped, current, camera, settings.z_near, settings.workers)
        if settings.occlusion is not None:
            view = occlusion_filter(view, settings.occlusion)
        t1 = time.perf_counter()
        try:
            target = regressors[stage.regressor].predict(frame, view)
        except Exception as exc:
            raise RefinementError(f"stage {idx} regressor '{stage.regressor}' failed: {exc}", trace) from exc
        t2 = time.perf_counter()

        correction = PoseSE3(target.rotation.normalized(), target.translation)
        current = pose_compose(correction, current)
        entry = TraceEntry(
            stage=idx,
            pose=current,
            render_pose=view.generating_pose,
            render_ms=(t1 - t0) * 1e3,
            predict_ms=(t2 - t1) * 1e3,
            range_exceeded=exceeded,
        )
        _gt_entry_fields(entry, h_gt)
        trace.entries.append(entry)
    return current, trace


# --- regressors ---------------------------------------------------------------


class IdentityRegressor:
    """Predicts no correction; useful as a pipeline no-op and timing baseline."""

    def predict(self, frame, lidar_image: DepthImage) -> PoseTarget:
        return PoseTarget.identity()


def oracle_correction(
    h_current: PoseSE3,
    h_gt: PoseSE3,
    contraction: float = 0.0,
    residual_noise: NoiseSpec = NoiseSpec(0.0, 0.0),
    seed: int = 0,
) -> PoseTarget:
    """Ground-truth correction pulled toward identity by `contraction`.

    contraction 0 returns the exact correction, 1 the identity. For any value
    c the remaining camera-center offset and geodesic angle are exactly c
    times their incoming values, so cascades of this oracle contract errors
    geometrically. Residual noise, when nonzero, left-composes a perturbation
    sampled per `seed` onto the correction.
    """
    if not 0.0 <= contraction <= 1.0:
        raise ValueError(f"contraction must lie in [0, 1], got {contraction}")
    exact = needed_correction(h_gt, h_current)
    q = exact.rotation.normalized()
    if q.a < 0:
        q = Quat(-q.a, -q.b, -q.c, -q.d)
    vec = math.sqrt(q.b * q.b + q.c * q.c + q.d * q.d)
    angle = 2.0 * math.atan2(vec, q.a)
    if vec < 1e-15:
        q_frac = Quat.identity()
    else:
        half = 0.5 * (1.0 - contraction) * angle
        s = math.sin(half) / vec
        q_frac = Quat(math.cos(half), q.b * s, q.c * s, q.d * s)

    r_frac = quat_to_matrix(q_frac.normalized())
    r_cur = quat_to_matrix(h_current.rotation)
    offset = camera_center(h_current) - camera_center(h_gt)
    translation = (1.0 - contraction) * (r_frac @ (r_cur @ offset))

    target = PoseTarget(translation, q_frac)
    if residual_noise.max_translation > 0 or residual_noise.max_rotation > 0:
        noisy = sample_init_pose(PoseSE3(target.rotation, target.translation), residual_noise, seed)
        target = PoseTarget(noisy.translation, noisy.rotation)
    return target


class OracleRegressor:
    """Test double standing in for a learned regressor.

    Reads the current pose from the rendered view and returns the (optionally
    contracted and noise-perturbed) true correction. Noise draws use
    seed + call_index, so a fresh instance replays identically.
    """

    def __init__(
        self,
        h_gt: PoseSE3,
        contraction: float = 0.0,
        residual_noise: NoiseSpec = NoiseSpec(0.0, 0.0),
        seed: int = 0,
    ):
        self.h_gt = h_gt
        self.contraction = contraction
        self.residual_noise = residual_noise
        self.seed = seed
        self._calls = 0

    def predict(self, frame, lidar_image: DepthImage) -> PoseTarget:
        target = oracle_correction(
            lidar_image.generating_pose,
            self.h_gt,
            self.contraction,
            self.residual_noise,
            self.seed + self._calls,
        )
        self._calls += 1
        return target


class InsufficientOverlapError(RuntimeError):
    """No grid candidate shared enough nonzero pixels with the reference."""


@dataclass(frozen=True)
class SearchGrid:
    """Per-axis offsets for the 6-DoF candidate grid.

    Order: translation x, y, z (meters), then Euler z, y, x (radians). A count
    of 1 pins that axis to zero; odd counts include the identity offset.
    """

    extents: tuple[float, float, float, float, float, float]
    counts: tuple[int, int, int, int, int, int]

    def __post_init__(self):
        if len(self.extents) != 6 or len(self.counts) != 6:
            raise ValueError("extents and counts must each have 6 entries")
        if any(c < 1 for c in self.counts):
            raise ValueError("counts must be >= 1")
        if any(e < 0 for e in self.extents):
            raise ValueError("extents must be non-negative")

    def axis_values(self, i: int) -> np.ndarray:
        if self.counts[i] == 1:
            return np.zeros(1)
        return np.linspace(-self.extents[i], self.extents[i], self.counts[i])

    def candidates(self):
        """Yield (flat_index, correction pose) in row-major axis order."""
        axes = [self.axis_values(i) for i in range(6)]
        for flat, (tx, ty, tz, rz, ry, rx) in enumerate(itertools.product(*axes)):
            yield flat, PoseSE3(euler_zyx_to_quat(rz, ry, rx), np.array([tx, ty, tz]))


def _correction_magnitude(c: PoseSE3) -> float:
    # meters and radians weighted equally; only used to break exact ties
    q = c.rotation.normalized()
    angle = 2.0 * math.atan2(math.sqrt(q.b**2 + q.c**2 + q.d**2), abs(q.a))
    return float(np.linalg.norm(c.translation)) + angle


class _CandidateScorer:
    """Shared scoring engine for grid searches over one reference view.

    Renders candidates with the same minimum-depth rule as project() but in
    float32 with reused buffers, which is 2-3x faster and still deterministic;
    the public rendering path stays float64.
    """

    def __init__(self, reference: DepthImage, cloud: PointCloudMap, camera: CameraModel, z_near: float):
        self.ref = reference.depth
        self.ref_nonzero = self.ref > 0
        self.camera = camera
        self.z_near = np.float32(z_near)
        self.points = cloud.points.astype(np.float32)
        self.height = camera.padded_height
        self.width = camera.padded_width
        self._buf = np.empty((self.height, self.width), dtype=np.float32)
        p = camera.projection
        self._proj3 = p[:, :3].T.astype(np.float32)
        self._proj_off = p[:, 3].astype(np.float32)

    def score(self, h_candidate: PoseSE3) -> tuple[float, int] | None:
        """(mean abs depth difference, overlap) or None below 1 shared pixel."""
        r = quat_to_matrix(h_candidate.rotation).astype(np.float32)
        t = h_candidate.translation.astype(np.float32)
        cam_pts = self.points @ r.T + t
        cam_pts = cam_pts[cam_pts[:, 2] > self.z_near]
        uvw = cam_pts @ self._proj3 + self._proj_off
        u = np.floor(uvw[:, 0] / uvw[:, 2] + np.float32(0.5)).astype(np.int64)
        v = np.floor(uvw[:, 1] / uvw[:, 2] + np.float32(0.5)).astype(np.int64)
        ok = (u >= 0) & (u < self.width) & (v >= 0) & (v < self.height)
        buf = self._buf
        buf.fill(np.inf)
        np.minimum.at(buf, (v[ok], u[ok]), cam_pts[ok, 2])
        both = self.ref_nonzero & (buf != np.inf)
        overlap = int(np.count_nonzero(both))
        if overlap == 0:
            return None
        score = float(np.mean(np.abs(self.ref[both] - buf[both])))
        return score, overlap


def grid_search_correction(
    reference_depth: DepthImage,
    cloud: PointCloudMap,
    camera: CameraModel,
    h_current: PoseSE3,
    grid: SearchGrid,
    z_near: float = DEFAULT_Z_NEAR,
    min_overlap: int = 50,
    min_overlap_fraction: float = 0.0,
) -> PoseTarget:
    """Exhaustive 6-DoF grid search scored by mean absolute depth difference.

    Each candidate correction is rendered at compose(candidate, h_current) and
    scored over pixels where both the reference and the candidate have
    returns. Candidates sharing fewer than `min_overlap` such pixels are
    skipped, as are those below `min_overlap_fraction` of the best overlap any
    candidate achieves; the fraction guards against mostly-misaligned
    candidates that cherry-pick a small, accidentally well-matching pixel set.
    Ties are broken by smaller correction magnitude, then lower grid index,
    making the argmin independent of evaluation order.
    """
    scorer = _CandidateScorer(reference_depth, cloud, camera, z_near)
    scored = []  # (score, magnitude, flat_index, overlap, pose)
    for flat, correction in grid.candidates():
        result = scorer.score(pose_compose(correction, h_current))
        if result is None or result[1] < min_overlap:
            continue
        scored.append((result[0], _correction_magnitude(correction), flat, result[1], correction))
    if not scored:
        raise InsufficientOverlapError(
            f"insufficient overlap: no candidate reached {min_overlap} shared pixels"
        )
    threshold = min_overlap_fraction * max(entry[3] for entry in scored)
    eligible = [entry for entry in scored if entry[3] >= threshold]
    chosen = min(eligible, key=lambda entry: entry[:3])[4]
    return PoseTarget(chosen.translation, chosen.rotation)


class MultiPassGridRegressor:
    """Grid-search regressor running several narrowing passes per prediction.

    Each pass is one exhaustive grid argmin (same scoring and tie rules as
    grid_search_correction); its correction is composed and the next pass
    searches around the moved pose. The returned target is the net correction,
    so one cascade stage behaves like one black-box regressor. A pass is
    rejected in favor of no-op when its best score does not undercut the
    identity candidate's score by `margin` (relative), which stops jitter
    once the estimate sits inside the scoring noise floor.
    """

    def __init__(
        self,
        cloud: PointCloudMap,
        camera: CameraModel,
        passes: Sequence[SearchGrid],
        crop: CropSpec | None = None,
        z_near: float = DEFAULT_Z_NEAR,
        min_overlap: int = 50,
        min_overlap_fraction: float = 0.65,
        margin: float = 0.02,
        net_rotation_only: bool = False,
    ):
        self.cloud = cloud
        self.camera = camera
        self.passes = list(passes)
        self.crop = crop or CropSpec()
        self.z_near = z_near
        self.min_overlap = min_overlap
        self.min_overlap_fraction = min_overlap_fraction
        self.margin = margin
        # With net_rotation_only the passes still search translation axes (to
        # decouple the confounds) but only the orientation part of the net is
        # returned. A pure-rotation correction leaves the camera center fixed,
        # so such a stage can never worsen the translation error.
        self.net_rotation_only = net_rotation_only

    def _run_pass(self, scorer: "_CandidateScorer", h_current: PoseSE3, grid: SearchGrid) -> PoseSE3 | None:
        scored = []
        identity_score = None
        for flat, correction in grid.candidates():
            result = scorer.score(pose_compose(correction, h_current))
            if result is None or result[1] < self.min_overlap:
                continue
            entry = (result[0], _correction_magnitude(correction), flat, result[1], correction)
            scored.append(entry)
            if entry[1] == 0.0:
                identity_score = result[0]
        if not scored:
            return None
        threshold = self.min_overlap_fraction * max(e[3] for e in scored)
        eligible = [e for e in scored if e[3] >= threshold]
        best = min(eligible, key=lambda e: e[:3])
        if identity_score is not None and best[0] > identity_score * (1.0 - self.margin):
            return PoseSE3.identity()
        return best[4]

    def predict(self, frame, lidar_image: DepthImage) -> PoseTarget:
        if not isinstance(frame, DepthImage):
            raise TypeError("MultiPassGridRegressor needs a reference DepthImage as the frame")
        entry = lidar_image.generating_pose
        scoring_cloud = crop_local(self.cloud, entry, self.crop)
        scorer = _CandidateScorer(frame, scoring_cloud, self.camera, self.z_near)
        current = entry
        net = PoseSE3.identity()
        moved = False
        for grid in self.passes:
            correction = self._run_pass(scorer, current, grid)
            if correction is None:
                continue
            moved = True
            current = pose_compose(correction, current)
            net = pose_compose(correction, net)
        if not moved:
            raise InsufficientOverlapError(
                f"insufficient overlap: no pass reached {self.min_overlap} shared pixels"
            )
        if self.margin > 0.0:
            # net guard: only move when the final view clearly beats the entry
            # view, so a converged estimate is left alone instead of jittered
            entry_score = scorer.score(entry)
            final_score = scorer.score(current)
            if (
                entry_score is not None
                and final_score is not None
                and final_score[0] > entry_score[0] * (1.0 - self.margin)
            ):
                return PoseTarget.identity()
        return PoseTarget(net.translation, net.rotation)


def planar_grid(translation_extent: float, rotation_extent: float, counts: int = 5) -> SearchGrid:
    """Joint grid over the in-plane axes: x, z translation and yaw."""
    return SearchGrid(
        (translation_extent, 0.0, translation_extent, 0.0, rotation_extent, 0.0),
        (counts, 1, counts, 1, counts, 1),
    )


def vertical_grid(translation_extent: float, rotation_extent: float, counts: int = 5) -> SearchGrid:
    """Joint grid over the out-of-plane axes: y translation, roll and pitch."""
    return SearchGrid(
        (0.0, translation_extent, 0.0, rotation_extent, 0.0, rotation_extent),
        (1, counts, 1, counts, 1, counts),
    )


def default_grid_passes(max_translation: float, max_rotation: float) -> list[SearchGrid]:
    """Narrowing planar/vertical pass schedule covering the given error range.

    Alternates the two axis groups while shrinking extents by roughly 1/2.5
    per round, ending near 1/20 of the entry range; incoming error at the
    range boundary lands within every subsequent pass's coverage.
    """
    passes = [
        planar_grid(max_translation, max_rotation),
        vertical_grid(max_translation, max_rotation),
        planar_grid(max_translation, max_rotation),
    ]
    t, r = max_translation, max_rotation
    while t > max_translation / 16.0:
        t, r = t / 2.5, r / 2.5
        passes.append(vertical_grid(t, r))
        passes.append(planar_grid(t, r))
    return passes


class GridSearchRegressor:
    """Classical search-based regressor for scenes with a reference depth.

    The `frame` passed to predict must be the reference DepthImage rendered at
    the true pose (the stand-in for a sensed depth frame). The scoring cloud
    is cropped around the current estimate before rendering candidates.
    """

    def __init__(
        self,
        cloud: PointCloudMap,
        camera: CameraModel,
        grid: SearchGrid,
        crop: CropSpec | None = None,
        z_near: float = DEFAULT_Z_NEAR,
        min_overlap: int = 50,
        min_overlap_fraction: float = 0.0,
    ):
        self.cloud = cloud
        self.camera = camera
        self.grid = grid
        self.crop = crop or CropSpec()
        self.z_near = z_near
        self.min_overlap = min_overlap
        self.min_overlap_fraction = min_overlap_fraction

    def predict(self, frame, lidar_image: DepthImage) -> PoseTarget:
        if not isinstance(frame, DepthImage):
            raise TypeError("GridSearchRegressor needs a reference DepthImage as the frame")
        h_current = lidar_image.generating_pose
        scoring_cloud = crop_local(self.cloud, h_current, self.crop)
        return grid_search_correction(
            frame,
            scoring_cloud,
            self.camera,
            h_current,
            self.grid,
            self.z_near,
            self.min_overlap,
            self.min_overlap_fraction,
        )


# --- external regressor over the file-spool protocol --------------------------

SPOOL_REQUEST_PREFIX = "req_"
SPOOL_RESPONSE_PREFIX = "resp_"
SPOOL_SHUTDOWN_NAME = "shutdown"


def write_atomic(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


class SpoolRegressor:
    """Client side of the file-spool protocol used by external model servers.

    For each prediction it saves the RGB frame and the raw depth dump next to
    the spool, drops a one-line request file and waits for the matching
    response: `<id> <tx> <ty> <tz> <qa> <qb> <qc> <qd>`. A response whose
    second token is ERROR raises. Writes are atomic (temp file + rename) so
    the server never sees partial requests.
    """

    def __init__(self, spool_dir, timeout_s: float = 30.0, poll_s: float = 0.02):
        self.spool = Path(spool_dir)
        self.spool.mkdir(parents=True, exist_ok=True)
        self.timeout_s = timeout_s
        self.poll_s = poll_s

    def predict(self, frame, lidar_image: DepthImage) -> PoseTarget:
        request_id = uuid.uuid4().hex[:16]
        rgb_path = self.spool / f"frame_{request_id}.png"
        depth_path = self.spool / f"depth_{request_id}.raw"

        from PIL import Image

        rgb = frame if isinstance(frame, Image.Image) else Image.fromarray(np.asarray(frame))
        rgb.save(rgb_path)
        save_depth_raw(lidar_image, depth_path)
        write_atomic(
            self.spool / f"{SPOOL_REQUEST_PREFIX}{request_id}.txt",
            f"{request_id} {rgb_path} {depth_path}\n".encode(),
        )

        response = self.spool / f"{SPOOL_RESPONSE_PREFIX}{request_id}.txt"
        deadline = time.monotonic() + self.timeout_s
        while not response.exists():
            if time.monotonic() > deadline:
                raise TimeoutError(f"no response for request {request_id} within {self.timeout_s}s")
            time.sleep(self.poll_s)
        tokens = response.read_text().split()
        if len(tokens) >= 2 and tokens[1] == "ERROR":
            raise RuntimeError(f"external regressor error: {' '.join(tokens[2:])}")
        if len(tokens) != 8 or tokens[0] != request_id:
            raise ValueError(f"malformed response for request {request_id}")
        vals = [float(t) for t in tokens[1:]]
        return PoseTarget(np.array(vals[:3]), Quat(*vals[3:]))


def json_dump_trace(trace: RefinementTrace, path) -> None:
    with open(path, "w") as fh:
        json.dump(trace.to_json_dict(), fh, indent=2)
        fh.write("\n")
