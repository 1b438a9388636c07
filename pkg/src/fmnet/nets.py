"""Encoder, decoder and latent discriminator networks.

The encoder maps a 48x80 single-channel spectrogram through three 5x5
stride-2 convolutions (32/64/128 channels, each Conv -> BatchNorm -> ReLU)
to a 7680-vector, a 1024 hidden layer, and two 2048-wide heads (mean and
log-variance of a diagonal Gaussian). The decoder mirrors it with three 5x5
stride-2 transposed convolutions (64/32/16) and a sigmoid output. The
discriminator is a 2048-1000-500-215-1 MLP with a sigmoid output.

All 5x5 stride-2 (de)convolutions use padding 2 (output padding 1 on the
transposed ones), the unique standard choice that reproduces the declared
intermediate shapes 48x80 -> 24x40 -> 12x20 -> 6x10 and back.
"""

from __future__ import annotations

import hashlib
import json
from collections import OrderedDict

import torch
from torch import nn

LATENT_DIM = 2048
INPUT_SHAPE = (1, 48, 80)
N_PIXELS = 48 * 80
FLAT_DIM = 128 * 6 * 10  # 7680


def _check_image_input(x: torch.Tensor) -> None:
    if x.dim() != 4 or tuple(x.shape[1:]) != INPUT_SHAPE:
        raise ValueError(f"expected input of shape (N, 1, 48, 80), got {tuple(x.shape)}")


def _check_latent_input(z: torch.Tensor, name: str = "z") -> None:
    if z.dim() != 2 or z.shape[1] != LATENT_DIM:
        raise ValueError(f"expected {name} of shape (N, {LATENT_DIM}), got {tuple(z.shape)}")


class _EncoderTrunk(nn.Module):
    """Shared convolutional trunk: spectrogram -> 1024-vector."""

    def __init__(self):
        super().__init__()
        self.ec1 = nn.Sequential(nn.Conv2d(1, 32, 5, stride=2, padding=2), nn.BatchNorm2d(32), nn.ReLU())
        self.ec2 = nn.Sequential(nn.Conv2d(32, 64, 5, stride=2, padding=2), nn.BatchNorm2d(64), nn.ReLU())
        self.ec3 = nn.Sequential(nn.Conv2d(64, 128, 5, stride=2, padding=2), nn.BatchNorm2d(128), nn.ReLU())
        self.flatten = nn.Flatten()
        self.el1 = nn.Sequential(nn.Linear(FLAT_DIM, 1024), nn.BatchNorm1d(1024), nn.ReLU())

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        _check_image_input(x)
        h = self.ec3(self.ec2(self.ec1(x)))
        return self.el1(self.flatten(h))


class SpectrogramEncoder(nn.Module):
    """Variational encoder producing (mu, log_var), each of width 2048."""

    def __init__(self):
        super().__init__()
        self.trunk = _EncoderTrunk()
        self.head_mu = nn.Linear(1024, LATENT_DIM)
        self.head_log_var = nn.Linear(1024, LATENT_DIM)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        h = self.trunk(x)
        return self.head_mu(h), self.head_log_var(h)


class DeterministicEncoder(nn.Module):
    """Encoder variant with a single deterministic 2048-wide head."""

    def __init__(self):
        super().__init__()
        self.trunk = _EncoderTrunk()
        self.head = nn.Linear(1024, LATENT_DIM)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.trunk(x))


class SpectrogramDecoder(nn.Module):
    """Decoder: 2048-vector -> 48x80 spectrogram in (0, 1)."""

    def __init__(self):
        super().__init__()
        self.dl1 = nn.Sequential(nn.Linear(LATENT_DIM, FLAT_DIM), nn.BatchNorm1d(FLAT_DIM))
        self.unflatten = nn.Unflatten(1, (128, 6, 10))
        self.dct1 = nn.Sequential(
            nn.ConvTranspose2d(128, 64, 5, stride=2, padding=2, output_padding=1), nn.BatchNorm2d(64), nn.ReLU()
        )
        self.dct2 = nn.Sequential(
            nn.ConvTranspose2d(64, 32, 5, stride=2, padding=2, output_padding=1), nn.BatchNorm2d(32), nn.ReLU()
        )
        self.dct3 = nn.Sequential(
            nn.ConvTranspose2d(32, 16, 5, stride=2, padding=2, output_padding=1), nn.BatchNorm2d(16), nn.ReLU()
        )
        self.dc1 = nn.Sequential(nn.Conv2d(16, 1, 5, stride=1, padding=2), nn.Sigmoid())

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        _check_latent_input(z)
        h = self.unflatten(self.dl1(z))
        h = self.dct3(self.dct2(self.dct1(h)))
        return self.dc1(h)


class LatentDiscriminator(nn.Module):
    """MLP scoring latent vectors with a probability of being 'real' (simulated)."""

    def __init__(self):
        super().__init__()
        self.dsl1 = nn.Sequential(nn.Linear(LATENT_DIM, 1000), nn.ReLU())
        self.dsl2 = nn.Sequential(nn.Linear(1000, 500), nn.ReLU())
        self.dsl3 = nn.Sequential(nn.Linear(500, 215), nn.ReLU())
        self.dsl4 = nn.Linear(215, 1)

    def logits(self, z: torch.Tensor) -> torch.Tensor:
        _check_latent_input(z)
        return self.dsl4(self.dsl3(self.dsl2(self.dsl1(z))))

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.logits(z))


def reparameterize(mu: torch.Tensor, log_var: torch.Tensor, eps: torch.Tensor) -> torch.Tensor:
    """Gaussian sample z = mu + eps * sigma with sigma = exp(0.5 * log_var)."""
    if mu.shape != log_var.shape or mu.shape != eps.shape:
        raise ValueError(f"shape mismatch: mu {tuple(mu.shape)}, log_var {tuple(log_var.shape)}, eps {tuple(eps.shape)}")
    return mu + eps * torch.exp(0.5 * log_var)


def module_shape_walk(module: nn.Module, x: torch.Tensor) -> "OrderedDict[str, tuple[int, ...]]":
    """Run a forward pass and record the output shape of every named child block."""
    shapes: "OrderedDict[str, tuple[int, ...]]" = OrderedDict()
    hooks = []

    def _capture(name):
        def hook(_mod, _inp, out):
            tensor = out[0] if isinstance(out, tuple) else out
            shapes[name] = tuple(tensor.shape)

        return hook

    for name, child in module.named_modules():
        if name and "." not in name:
            hooks.append(child.register_forward_hook(_capture(name)))
        elif name.count(".") == 1 and name.startswith("trunk."):
            hooks.append(child.register_forward_hook(_capture(name.split(".", 1)[1])))
    was_training = module.training
    try:
        module.eval()
        with torch.no_grad():
            module(x)
    finally:
        for h in hooks:
            h.remove()
        module.train(was_training)
    return shapes


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def architecture_fingerprint(module: nn.Module) -> str:
    """Digest of the layer structure: leaf class names and parameter shapes."""
    layers = []
    for name, child in module.named_modules():
        if len(list(child.children())) == 0:
            params = {k: list(v.shape) for k, v in child.named_parameters(recurse=False)}
            layers.append([name, type(child).__name__, params])
    blob = json.dumps(layers, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def state_digest(module: nn.Module) -> str:
    """Digest of all parameters and buffers; detects any state mutation."""
    h = hashlib.sha256()
    for key, tensor in sorted(module.state_dict().items()):
        h.update(key.encode())
        h.update(tensor.detach().cpu().numpy().tobytes())
    return h.hexdigest()
