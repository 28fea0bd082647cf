"""Full-reference quality metrics and histogram summaries.

PSNR reports an infinite sentinel for identical inputs instead of a large
fake number.  SSIM follows the canonical construction: 11x11 Gaussian
window with sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic range 1, statistics
taken over the valid (fully overlapping) windows.  Color inputs are scored
per channel and averaged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["MetricReport", "psnr", "ssim", "histogram", "compare"]

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class MetricReport:
    psnr_db: float
    ssim: float
    per_channel: tuple | None = None

    def lines(self) -> list[str]:
        return [f"PSNR: {self.psnr_db:.4f} dB", f"SSIM: {self.ssim:.4f}"]


def _check_pair(test: np.ndarray, reference: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    test = np.asarray(test, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if test.shape != reference.shape:
        raise ValueError(f"shape mismatch: {test.shape} vs {reference.shape}")
    return test, reference


def psnr(test: np.ndarray, reference: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical inputs."""
    if peak <= 0:
        raise ValueError("peak must be positive")
    test, reference = _check_pair(test, reference)
    mse = float(((test - reference) ** 2).mean())
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size, dtype=float) - (size - 1) / 2.0
    w = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return w / w.sum()


def _windowed_mean(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    # separable valid-mode correlation with the outer-product window
    win = w.size
    rows = np.lib.stride_tricks.sliding_window_view(a, win, axis=0) @ w
    return np.lib.stride_tricks.sliding_window_view(rows, win, axis=1) @ w


def ssim(test: np.ndarray, reference: np.ndarray) -> float:
    """Mean structural similarity over the valid window positions."""
    test, reference = _check_pair(test, reference)
    if test.ndim != 2:
        raise ValueError("ssim expects 2-D images; score color per channel")
    if min(test.shape) < SSIM_WINDOW:
        raise ValueError(
            f"image {test.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )
    w = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    mu_x = _windowed_mean(test, w)
    mu_y = _windowed_mean(reference, w)
    var_x = _windowed_mean(test * test, w) - mu_x ** 2
    var_y = _windowed_mean(reference * reference, w) - mu_y ** 2
    cov = _windowed_mean(test * reference, w) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
    return float((num / den).mean())


def histogram(u: np.ndarray, bins: int) -> np.ndarray:
    """Counts over equal-width bins of [0, 1]; half-open bins with the last
    closed, so the total always equals the pixel count."""
    if bins < 1:
        raise ValueError("bins must be at least 1")
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    counts, _ = np.histogram(u, bins=bins, range=(0.0, 1.0))
    return counts


def compare(test: np.ndarray, reference: np.ndarray, peak: float = 1.0) -> MetricReport:
    """PSNR and SSIM of a pair; color inputs are averaged over channels."""
    test, reference = _check_pair(test, reference)
    if test.ndim == 2:
        return MetricReport(psnr(test, reference, peak), ssim(test, reference))
    if test.ndim != 3:
        raise ValueError("expected 2-D or 3-D image arrays")
    per = tuple(
        (psnr(test[..., c], reference[..., c], peak), ssim(test[..., c], reference[..., c]))
        for c in range(test.shape[2])
    )
    mean_psnr = sum(p for p, _ in per) / len(per)
    mean_ssim = sum(s for _, s in per) / len(per)
    return MetricReport(mean_psnr, mean_ssim, per_channel=per)
