"""Sample-quality metrics for 2-D generators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_JITTER = 1e-9


@dataclass(frozen=True)
class MetricReport:
    frechet_gaussian: float
    mode_coverage: int
    high_quality_fraction: float


def sqrtm_2x2_psd(a: np.ndarray) -> np.ndarray:
    """Principal square root of a 2x2 matrix with non-negative eigenvalues.

    Uses the closed form ``(A + sqrt(det A) I) / sqrt(tr A + 2 sqrt(det A))``.
    """
    det = max(float(np.linalg.det(a)), 0.0)
    s = np.sqrt(det)
    t = np.sqrt(max(float(np.trace(a)) + 2.0 * s, 0.0))
    if t == 0.0:
        return np.zeros((2, 2))
    return (a + s * np.eye(2)) / t


def _moments(x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != 2 or x.shape[0] < 3:
        raise ValueError(f"need at least 3 two-dimensional points, got shape {x.shape}")
    return x.mean(axis=0), np.cov(x, rowvar=False)


def frechet_from_moments(mu_a, cov_a, mu_b, cov_b) -> float:
    cov_a = cov_a + _JITTER * np.eye(2)
    cov_b = cov_b + _JITTER * np.eye(2)
    # sqrt(A B) has the same trace as sqrt(sqrt(A) B sqrt(A)), which is symmetric PSD
    ra = sqrtm_2x2_psd(cov_a)
    cross = sqrtm_2x2_psd(ra @ cov_b @ ra)
    diff = np.asarray(mu_a) - np.asarray(mu_b)
    d = float(diff @ diff + np.trace(cov_a) + np.trace(cov_b) - 2.0 * np.trace(cross))
    if d < 0.0 and d > -1e-9:
        d = 0.0
    return d


def frechet_gaussian_distance(a, b) -> float:
    """Squared Frechet distance between Gaussians fitted to two 2-D sample sets."""
    mu_a, cov_a = _moments(a)
    mu_b, cov_b = _moments(b)
    return frechet_from_moments(mu_a, cov_a, mu_b, cov_b)


def mode_coverage(samples, modes, radius: float) -> tuple[int, float]:
    """Return ``(modes hit by >= 1 sample, fraction of samples near any mode)``."""
    if not radius > 0:
        raise ValueError("radius must be > 0")
    samples = np.asarray(samples, dtype=np.float64).reshape(-1, 2)
    if len(samples) == 0:
        return 0, 0.0
    modes = np.asarray(modes, dtype=np.float64).reshape(-1, 2)
    dist = np.linalg.norm(samples[:, None, :] - modes[None, :, :], axis=2)
    near = dist <= radius
    covered = int(near.any(axis=0).sum())
    fraction = float((dist.min(axis=1) <= radius).mean())
    return covered, fraction


def evaluate(samples, real, modes, radius: float) -> MetricReport:
    covered, frac = mode_coverage(samples, modes, radius)
    return MetricReport(frechet_gaussian_distance(samples, real), covered, frac)
