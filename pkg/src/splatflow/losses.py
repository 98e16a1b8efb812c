"""Training losses with exact analytic gradients: mean-absolute photometric,
structural dissimilarity (11x11 Gaussian window), and the splat-flow residual.

Every loss returns (value, gradient w.r.t. its first argument) so the training
module can chain gradients through the renderer without an autodiff framework.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2  # (0.01 * R)^2 for unit-range images
SSIM_C2 = 0.03 ** 2


@dataclass(frozen=True)
class LossConfig:
    lam: float = 0.8   # photometric vs D-SSIM mixing weight
    beta: float = 0.5  # flow-loss weight

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must be in [0, 1]")
        if self.beta < 0.0:
            raise ValueError("beta must be >= 0")


def total_loss(cfg: LossConfig, l_rgb: float, l_dssim: float, l_flow: float) -> float:
    return cfg.lam * l_rgb + (1.0 - cfg.lam) * l_dssim + cfg.beta * l_flow


def photometric_loss(rendered: np.ndarray, target: np.ndarray):
    """Mean absolute error over pixels and channels; gradient w.r.t. rendered."""
    if rendered.shape != target.shape:
        raise ValueError(f"image shapes differ: {rendered.shape} vs {target.shape}")
    diff = rendered - target
    grad = np.sign(diff) / diff.size
    return float(np.abs(diff).mean()), grad


def psnr(rendered: np.ndarray, target: np.ndarray) -> float:
    mse = float(np.mean((rendered - target) ** 2))
    if mse == 0:
        return float("inf")
    return float(10.0 * np.log10(1.0 / mse))


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-(x ** 2) / (2.0 * sigma ** 2))
    return k / k.sum()


_WIN = _gaussian_window()
_PAD = SSIM_WINDOW // 2


def _filter_valid(img: np.ndarray) -> np.ndarray:
    """Separable Gaussian filtering restricted to fully-supported windows."""
    out = correlate1d(img, _WIN, axis=0, mode="constant")
    out = correlate1d(out, _WIN, axis=1, mode="constant")
    return out[_PAD:-_PAD, _PAD:-_PAD]


def _filter_adjoint(grad: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Adjoint of _filter_valid: zero-embed then filter (kernel is symmetric)."""
    full = np.zeros(shape, dtype=np.float64)
    full[_PAD:-_PAD, _PAD:-_PAD] = grad
    out = correlate1d(full, _WIN, axis=0, mode="constant")
    return correlate1d(out, _WIN, axis=1, mode="constant")


def ssim(rendered: np.ndarray, target: np.ndarray):
    """Mean SSIM over valid windows and channels, with gradient w.r.t. rendered."""
    if rendered.shape != target.shape:
        raise ValueError(f"image shapes differ: {rendered.shape} vs {target.shape}")
    if rendered.ndim == 2:
        rendered = rendered[:, :, None]
        target = target[:, :, None]
    h, w, nc = rendered.shape
    if min(h, w) < SSIM_WINDOW:
        raise ValueError(f"image smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    grad = np.zeros((h, w, nc))
    total = 0.0
    n_map = (h - 2 * _PAD) * (w - 2 * _PAD) * nc
    for c in range(nc):
        x = rendered[:, :, c]
        y = target[:, :, c]
        mu_x = _filter_valid(x)
        mu_y = _filter_valid(y)
        x2 = _filter_valid(x * x)
        xy = _filter_valid(x * y)
        y2 = _filter_valid(y * y)
        var_x = x2 - mu_x ** 2
        var_y = y2 - mu_y ** 2
        cov = xy - mu_x * mu_y
        a1 = 2 * mu_x * mu_y + SSIM_C1
        a2 = 2 * cov + SSIM_C2
        b1 = mu_x ** 2 + mu_y ** 2 + SSIM_C1
        b2 = var_x + var_y + SSIM_C2
        s = (a1 * a2) / (b1 * b2)
        total += float(s.sum())

        up = 1.0 / n_map  # d(mean)/d(s) per window
        g_a1 = up * a2 / (b1 * b2)
        g_a2 = up * a1 / (b1 * b2)
        g_b1 = -up * s / b1
        g_b2 = -up * s / b2
        # Primitives P = E[x], Q = E[x^2], R = E[xy].
        g_p = 2 * mu_y * g_a1 + 2 * mu_x * g_b1 - 2 * mu_y * g_a2 - 2 * mu_x * g_b2
        g_q = g_b2
        g_r = 2 * g_a2
        grad[:, :, c] = (_filter_adjoint(g_p, (h, w))
                         + 2 * x * _filter_adjoint(g_q, (h, w))
                         + y * _filter_adjoint(g_r, (h, w)))
    return total / n_map, grad


def dssim_loss(rendered: np.ndarray, target: np.ndarray):
    """(1 - SSIM) / 2 and its gradient w.r.t. rendered."""
    value, grad = ssim(rendered, target)
    return (1.0 - value) / 2.0, -0.5 * grad


def flow_loss(pred_flow: np.ndarray, flow_target: np.ndarray, valid: np.ndarray):
    """Mean squared residual between the rendered splat-flow channel and the
    camera-compensated measured flow, over valid pixels.

    pred_flow and flow_target are (H, W, 2) in matching units; flow_target is
    the measured flow minus the camera-induced flow (data, not differentiated).
    """
    if pred_flow.shape != flow_target.shape:
        raise ValueError(f"flow shapes differ: {pred_flow.shape} vs {flow_target.shape}")
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise ValueError("flow loss has no valid pixels")
    resid = np.where(valid[:, :, None], flow_target - pred_flow, 0.0)
    value = float((resid ** 2).sum() / n_valid)
    grad = -2.0 * resid / n_valid
    return value, grad


def endpoint_error(pred_flow: np.ndarray, flow_target: np.ndarray, valid: np.ndarray) -> float:
    """Mean Euclidean distance between predicted and target flow over valid pixels."""
    d = np.linalg.norm(pred_flow - flow_target, axis=-1)
    n_valid = int(valid.sum())
    if n_valid == 0:
        return 0.0
    return float(d[valid].sum() / n_valid)
