"""Training objectives and evaluation metrics.

The differentiable losses operate on torch tensors and preserve dtype, so
gradient checks can run in float64. `pixel_loss` and `ssim` are evaluation
metrics on numpy arrays.
"""

from __future__ import annotations

import numpy as np
import torch
from scipy.signal import convolve2d

# Probabilities inside the adversarial losses are clamped this far from {0, 1};
# the log terms are undefined at the boundaries.
PROB_EPS = 1e-7


def _check_same_shape(a, b, name_a: str, name_b: str) -> None:
    if tuple(a.shape) != tuple(b.shape):
        raise ValueError(f"shape mismatch: {name_a} {tuple(a.shape)} vs {name_b} {tuple(b.shape)}")


def recon_loss(x_hat: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
    """Mean squared error over batch and pixels."""
    _check_same_shape(x_hat, x, "x_hat", "x")
    return torch.mean((x_hat - x) ** 2)


def kl_standard(mu: torch.Tensor, log_var: torch.Tensor) -> torch.Tensor:
    """KL divergence of N(mu, diag(exp(log_var))) from N(0, I).

    Summed over latent dimensions, averaged over the batch.
    """
    _check_same_shape(mu, log_var, "mu", "log_var")
    if not (torch.isfinite(mu).all() and torch.isfinite(log_var).all()):
        raise ValueError("kl_standard requires finite inputs")
    per_dim = -0.5 * (1.0 + log_var - mu.pow(2) - log_var.exp())
    return per_dim.sum(dim=-1).mean()


def kl_gaussians(
    mu_a: torch.Tensor, log_var_a: torch.Tensor, mu_b: torch.Tensor, log_var_b: torch.Tensor
) -> torch.Tensor:
    """KL divergence between diagonal Gaussians, KL[N_a || N_b].

    Averaged over latent dimensions (and over the batch), the convention
    used for content-consistency training and latent-divergence reporting.
    """
    for t, name in ((mu_a, "mu_a"), (log_var_a, "log_var_a"), (mu_b, "mu_b"), (log_var_b, "log_var_b")):
        if tuple(t.shape) != tuple(mu_a.shape):
            raise ValueError(f"shape mismatch: {name} {tuple(t.shape)} vs mu_a {tuple(mu_a.shape)}")
        if not torch.isfinite(t).all():
            raise ValueError("kl_gaussians requires finite inputs")
    per_dim = 0.5 * (log_var_b - log_var_a) + (log_var_a.exp() + (mu_a - mu_b).pow(2)) / (
        2.0 * log_var_b.exp()
    ) - 0.5
    return per_dim.mean()


def _clamp_prob(p: torch.Tensor) -> torch.Tensor:
    return torch.clamp(p, PROB_EPS, 1.0 - PROB_EPS)


def adv_disc_loss(p_real: torch.Tensor, p_fake: torch.Tensor) -> torch.Tensor:
    """Discriminator objective: -E[log p_real] - E[log(1 - p_fake)]."""
    p_real = _clamp_prob(p_real)
    p_fake = _clamp_prob(p_fake)
    return -(torch.log(p_real).mean() + torch.log(1.0 - p_fake).mean())


def adv_gen_loss(p_fake: torch.Tensor) -> torch.Tensor:
    """Non-saturating generator objective: -E[log p_fake]."""
    return -torch.log(_clamp_prob(p_fake)).mean()


def pixel_loss(m: np.ndarray, m_hat: np.ndarray) -> float:
    """Sum of squared differences divided by the pixel count."""
    m = np.asarray(m, dtype=np.float64)
    m_hat = np.asarray(m_hat, dtype=np.float64)
    _check_same_shape(m, m_hat, "m", "m_hat")
    return float(np.sum((m - m_hat) ** 2) / m.size)


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-0.5 * (r / sigma) ** 2)
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def ssim(
    a: np.ndarray,
    b: np.ndarray,
    window: int = 11,
    sigma: float = 1.5,
    k1: float = 0.01,
    k2: float = 0.03,
    data_range: float = 1.0,
) -> float:
    """Mean local structural similarity with a Gaussian window.

    Standard construction: 11x11 Gaussian window (sigma 1.5), stability
    constants C1 = (k1 * L)^2 and C2 = (k2 * L)^2, local statistics taken
    over valid window positions only.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_same_shape(a, b, "a", "b")
    if a.ndim != 2 or min(a.shape) < window:
        raise ValueError(f"images must be 2-D and at least {window}x{window}, got {a.shape}")

    kernel = _gaussian_kernel(window, sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2

    def smooth(img):
        return convolve2d(img, kernel, mode="valid")

    mu_a = smooth(a)
    mu_b = smooth(b)
    var_a = smooth(a * a) - mu_a * mu_a
    var_b = smooth(b * b) - mu_b * mu_b
    cov = smooth(a * b) - mu_a * mu_b

    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))
