"""Error statistics, Gaussian-KDE density curves, and the runtime breakdown."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .occlusion import occlusion_filter
from .pointmap import crop_local
from .projection import project
from .refine import RenderSettings
from .se3 import euler_zyx_to_quat

ERROR_COMPONENTS = ("longitudinal", "lateral", "vertical", "roll", "pitch", "yaw")

# Published single-execution GPU timings (ms); reported for reference only,
# never asserted: they were measured on CUDA hardware.
REFERENCE_GPU_TIMINGS_MS = {"z_buffer": 8.6, "occlusion": 1.4, "regressor": 4.6, "total": 14.7}


@dataclass(frozen=True)
class ComponentStats:
    median: float
    mean: float
    std: float

    @staticmethod
    def from_samples(values: np.ndarray) -> "ComponentStats":
        return ComponentStats(
            float(np.median(values)), float(np.mean(values)), float(np.std(values))
        )


@dataclass(frozen=True)
class ErrorSummary:
    """Per-component and aggregate statistics of 6-component pose errors."""

    count: int
    components: dict
    translation_norm: ComponentStats
    rotation_angle: ComponentStats

    def to_dict(self) -> dict:
        out = {"count": self.count}
        for name, stats in self.components.items():
            out[name] = {"median": stats.median, "mean": stats.mean, "std": stats.std}
        out["translation_norm"] = self.translation_norm.__dict__.copy()
        out["rotation_angle"] = self.rotation_angle.__dict__.copy()
        return out


def _total_angle(roll: float, pitch: float, yaw: float) -> float:
    """Geodesic angle of the rotation recomposed from its Euler split."""
    q = euler_zyx_to_quat(roll, yaw, pitch)
    return 2.0 * math.atan2(math.sqrt(q.b * q.b + q.c * q.c + q.d * q.d), abs(q.a))


def summarize(samples) -> ErrorSummary:
    """Exact order statistics per error component plus aggregate magnitudes.

    `samples` is an (N, 6) array of (longitudinal, lateral, vertical, roll,
    pitch, yaw) errors. Medians average the two middle values for even N; the
    standard deviation is the population one, so a single sample gives 0.
    """
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.size == 0:
        raise ValueError("summarize needs at least one sample")
    if arr.shape[1] != 6:
        raise ValueError(f"samples must have 6 components, got {arr.shape[1]}")
    components = {
        name: ComponentStats.from_samples(arr[:, i]) for i, name in enumerate(ERROR_COMPONENTS)
    }
    t_norm = np.linalg.norm(arr[:, :3], axis=1)
    angles = np.array([_total_angle(r, p, y) for r, p, y in arr[:, 3:]])
    return ErrorSummary(
        count=arr.shape[0],
        components=components,
        translation_norm=ComponentStats.from_samples(t_norm),
        rotation_angle=ComponentStats.from_samples(angles),
    )


def silverman_bandwidth(samples: np.ndarray) -> float:
    """Rule-of-thumb bandwidth 0.9 * min(std, IQR/1.34) * n^(-1/5)."""
    arr = np.asarray(samples, dtype=np.float64).ravel()
    n = arr.size
    if n < 2:
        return 1.0
    std = float(np.std(arr, ddof=1))
    q75, q25 = np.percentile(arr, [75, 25])
    iqr = float(q75 - q25)
    scale = min(std, iqr / 1.34) if iqr > 0 else std
    if scale <= 0:
        scale = max(abs(float(arr[0])), 1.0) * 1e-3
    return 0.9 * scale * n ** (-0.2)


def kde_pdf(samples, bandwidth: float | None = None, grid_size: int = 512):
    """Gaussian-kernel density on an even grid spanning samples +- 3 bandwidths.

    Returns (grid, density). The curve integrates to ~1 (trapezoid) whenever
    the grid resolves the kernels, which grid_size=512 comfortably does.
    """
    arr = np.asarray(samples, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("kde_pdf needs at least one sample")
    if bandwidth is None:
        bandwidth = silverman_bandwidth(arr)
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be positive, got {bandwidth}")
    lo = float(arr.min()) - 3.0 * bandwidth
    hi = float(arr.max()) + 3.0 * bandwidth
    grid = np.linspace(lo, hi, grid_size)
    z = (grid[None, :] - arr[:, None]) / bandwidth
    density = np.exp(-0.5 * z * z).sum(axis=0) / (arr.size * bandwidth * math.sqrt(2.0 * math.pi))
    return grid, density


def uniform_pdf(bound: float, grid_size: int = 512):
    """Density of U[-bound, +bound]; the theoretic curve for injected noise."""
    if bound <= 0:
        raise ValueError("bound must be positive")
    margin = 0.15 * bound
    grid = np.linspace(-bound - margin, bound + margin, grid_size)
    density = np.where(np.abs(grid) <= bound, 1.0 / (2.0 * bound), 0.0)
    return grid, density


# --- runtime breakdown --------------------------------------------------------


@dataclass
class TimingBreakdown:
    """Per-repetition step timings (ms) with aggregate statistics."""

    z_buffer_ms: list = field(default_factory=list)
    occlusion_ms: list = field(default_factory=list)
    regressor_ms: list = field(default_factory=list)
    total_ms: list = field(default_factory=list)

    STEP_NAMES = ("z_buffer_ms", "occlusion_ms", "regressor_ms", "total_ms")

    def aggregate(self) -> dict:
        out = {}
        for name in self.STEP_NAMES:
            vals = np.asarray(getattr(self, name))
            out[name] = {"mean": float(vals.mean()), "median": float(np.median(vals))}
        return out

    def to_dict(self) -> dict:
        return {
            "repetitions": len(self.total_ms),
            "aggregate": self.aggregate(),
            "per_repetition": {name: list(getattr(self, name)) for name in self.STEP_NAMES},
            "reference_gpu_ms": dict(REFERENCE_GPU_TIMINGS_MS),
        }


def benchmark(
    cloud,
    camera,
    pose,
    regressor,
    frame=None,
    repetitions: int = 20,
    warmup: int = 3,
    settings: RenderSettings | None = None,
) -> TimingBreakdown:
    """Time the render / occlusion-filter / regressor steps of one execution.

    The first `warmup` iterations (at least 3) are discarded. Timings use the
    monotonic high-resolution clock; the benchmark runs strictly sequentially
    so numbers are not polluted by sibling measurements.
    """
    if warmup < 3:
        raise ValueError("warmup must be >= 3 iterations")
    settings = settings or RenderSettings()
    result = TimingBreakdown()
    for rep in range(warmup + repetitions):
        t0 = time.perf_counter()
        cropped = crop_local(cloud, pose, settings.crop)
        view = project(cropped, pose, camera, settings.z_near, settings.workers)
        t1 = time.perf_counter()
        if settings.occlusion is not None:
            view = occlusion_filter(view, settings.occlusion)
        t2 = time.perf_counter()
        regressor.predict(frame, view)
        t3 = time.perf_counter()
        if rep < warmup:
            continue
        result.z_buffer_ms.append((t1 - t0) * 1e3)
        result.occlusion_ms.append((t2 - t1) * 1e3)
        result.regressor_ms.append((t3 - t2) * 1e3)
        result.total_ms.append((t3 - t0) * 1e3)
    return result


# --- report writers -----------------------------------------------------------


def write_summary_json(summary: ErrorSummary, path, timestamp: bool = True) -> None:
    payload = {"summary": summary.to_dict()}
    if timestamp:
        payload["generated_at"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_summary_csv(summary: ErrorSummary, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "median", "mean", "std"])
        for name, stats in summary.components.items():
            writer.writerow([name, repr(stats.median), repr(stats.mean), repr(stats.std)])
        for name, stats in (
            ("translation_norm", summary.translation_norm),
            ("rotation_angle", summary.rotation_angle),
        ):
            writer.writerow([name, repr(stats.median), repr(stats.mean), repr(stats.std)])


def write_breakdown_csv(result: TimingBreakdown, path) -> None:
    agg = result.aggregate()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "mean_ms", "median_ms"])
        for name in TimingBreakdown.STEP_NAMES:
            writer.writerow([name.removesuffix("_ms"), repr(agg[name]["mean"]), repr(agg[name]["median"])])


def plot_error_pdfs(stage_errors: dict, noise_bounds, path, bandwidths=None) -> None:
    """Six-panel SVG of per-component error densities, one curve per stage.

    `stage_errors` maps a label (e.g. 'iteration 1') to an (N, 6) error array.
    `noise_bounds` is (translation_bound_m, rotation_bound_rad) for the dashed
    theoretic uniform densities of the injected initial noise; pass None to
    skip them. The SVG is written without a creation date so artifacts are
    reproducible.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(2, 3, figsize=(15, 7))
    for i, name in enumerate(ERROR_COMPONENTS):
        ax = axes[i // 3][i % 3]
        for label, errors in stage_errors.items():
            values = np.asarray(errors)[:, i]
            bw = None if bandwidths is None else bandwidths[i]
            grid, density = kde_pdf(values, bw)
            ax.plot(grid, density, label=label)
        if noise_bounds is not None:
            bound = noise_bounds[0] if i < 3 else noise_bounds[1]
            if bound > 0:
                grid, density = uniform_pdf(bound)
                ax.plot(grid, density, "r--", linewidth=1.0, label="initial noise")
        ax.set_title(f"{name} errors")
        ax.set_xlabel("m" if i < 3 else "rad")
    axes[0][0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
