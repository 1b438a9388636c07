"""Spectrogram enhancer estimators with a sklearn fit/transform surface.

Three models share the encoder/decoder architecture:

* FMNetEnhancer: three-phase training. Phase 1 learns a variational
  autoencoder on simulated spectrograms. Phase 2 freezes the decoder and
  adversarially maps measured-data latent features onto the simulated-data
  latent distribution. Phase 3 feeds enhanced outputs back through the
  encoder and minimises the latent divergence between input and output
  (content consistency).
* SMNetEnhancer: supervised baseline mapping measured inputs directly to
  their simulated targets in a single phase.
* NonRFMNetEnhancer: ablation with a deterministic (unregularised) latent
  code; same three-phase schedule with latent mean-squared distance in
  place of the KL terms.

`fit(X, y)` takes matched batches (X measured, y simulated);
`transform(X)` returns enhanced spectrograms.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from itertools import chain
from pathlib import Path

import numpy as np
import torch
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import losses
from .checkpointing import CheckpointError, load_checkpoint, peek_meta, save_checkpoint
from .datagen import derive_seed
from .nets import (
    LATENT_DIM,
    N_PIXELS,
    DeterministicEncoder,
    LatentDiscriminator,
    SpectrogramDecoder,
    SpectrogramEncoder,
    architecture_fingerprint,
    count_parameters,
    reparameterize,
)
from .validation import as_spectrogram_batch, check_matched

_INIT_STREAM = 0x11A7
_PHASE_STREAM = 0x301
_EPS_STREAM = 0x302
_ENHANCE_STREAM = 0x303

_TUPLE_PARAMS = ("epochs_per_phase", "adam_betas")


class TrainingDiverged(RuntimeError):
    """A training loss became non-finite."""


class PhaseOrderError(CheckpointError):
    """A training phase was requested out of order."""


@dataclass
class PhaseReport:
    """Per-epoch loss curves and timing for one completed training phase."""

    phase: str
    losses: dict[str, list[float]]
    epochs: int
    wall_seconds: float
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "losses": self.losses,
            "epochs": self.epochs,
            "wall_seconds": self.wall_seconds,
            "extras": self.extras,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseReport":
        return cls(d["phase"], d["losses"], d["epochs"], d["wall_seconds"], d.get("extras", {}))


def _params_from_json(params: dict) -> dict:
    out = dict(params)
    for key in _TUPLE_PARAMS:
        if key in out and isinstance(out[key], list):
            out[key] = tuple(out[key])
    return out


class _EnhancerBase(BaseEstimator, TransformerMixin):
    """Shared torch plumbing: seeding, batching, inference, checkpoints."""

    model_name = ""
    _variational = True

    # -- seeding -----------------------------------------------------------

    def _np_rng(self, tag: int) -> np.random.Generator:
        return np.random.default_rng(derive_seed(self.master_seed, tag, _PHASE_STREAM))

    def _torch_gen(self, tag: int) -> torch.Generator:
        gen = torch.Generator()
        gen.manual_seed(derive_seed(self.master_seed, tag, _EPS_STREAM) % (2**63))
        return gen

    # -- network lifecycle ---------------------------------------------------

    def _make_encoder(self):
        return SpectrogramEncoder() if self._variational else DeterministicEncoder()

    def _uses_discriminator(self) -> bool:
        return False

    def _init_networks(self) -> None:
        torch.manual_seed(derive_seed(self.master_seed, 0, _INIT_STREAM) % (2**63))
        self.encoder_ = self._make_encoder()
        self.decoder_ = SpectrogramDecoder()
        self.discriminator_ = LatentDiscriminator() if self._uses_discriminator() else None
        self.arch_hash_ = self._fingerprints()
        self.n_params_ = sum(count_parameters(m) for m in self._modules_dict().values())
        self.phase_completed_ = 0
        self.history_ = []

    def _modules_dict(self) -> dict:
        mods = {"encoder": self.encoder_, "decoder": self.decoder_}
        if self.discriminator_ is not None:
            mods["discriminator"] = self.discriminator_
        return mods

    def _fingerprints(self) -> dict:
        return {name: architecture_fingerprint(m) for name, m in self._modules_dict().items()}

    def _check_fitted(self) -> None:
        if getattr(self, "phase_completed_", 0) < 1:
            raise NotFittedError(f"{type(self).__name__} has not been fitted yet")

    # -- batching ------------------------------------------------------------

    def _validate_config(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def _epoch_batches(self, n: int, rng: np.random.Generator):
        order = rng.permutation(n)
        for start in range(0, n, self.batch_size):
            idx = order[start : start + self.batch_size]
            if idx.size >= 2:  # batch statistics need more than one sample
                yield torch.as_tensor(idx, dtype=torch.long)

    @staticmethod
    def _to_tensor(X: np.ndarray) -> torch.Tensor:
        return torch.from_numpy(np.ascontiguousarray(X)).unsqueeze(1)

    @staticmethod
    def _guard_finite(loss: torch.Tensor, context: str) -> None:
        if not torch.isfinite(loss):
            raise TrainingDiverged(f"non-finite training loss during {context}: {loss.item()!r}")

    # -- inference -------------------------------------------------------------

    def _eval_mode(self) -> None:
        for m in self._modules_dict().values():
            m.eval()

    def _latents(self, X: np.ndarray, batch: int = 64):
        """(mu, log_var) arrays in eval mode; log_var is None for deterministic models."""
        self._check_fitted()
        X = as_spectrogram_batch(X)
        self._eval_mode()
        mus, lvs = [], []
        with torch.no_grad():
            for start in range(0, X.shape[0], batch):
                xb = self._to_tensor(X[start : start + batch])
                out = self.encoder_(xb)
                if self._variational:
                    mus.append(out[0].numpy())
                    lvs.append(out[1].numpy())
                else:
                    mus.append(out.numpy())
        mu = np.concatenate(mus)
        return (mu, np.concatenate(lvs)) if self._variational else (mu, None)

    def encode(self, X) -> tuple[np.ndarray, np.ndarray | None]:
        return self._latents(X)

    def transform(self, X) -> np.ndarray:
        """Enhance measured spectrograms; output shape matches input batch."""
        self._check_fitted()
        X = as_spectrogram_batch(X)
        self._eval_mode()
        deterministic = getattr(self, "deterministic_latent", True) or not self._variational
        gen = None if deterministic else self._torch_gen(_ENHANCE_STREAM)
        outs = []
        with torch.no_grad():
            for start in range(0, X.shape[0], 64):
                xb = self._to_tensor(X[start : start + 64])
                if self._variational:
                    mu, log_var = self.encoder_(xb)
                    if deterministic:
                        z = mu
                    else:
                        eps = torch.randn(mu.shape, generator=gen)
                        z = reparameterize(mu, log_var, eps)
                else:
                    z = self.encoder_(xb)
                outs.append(self.decoder_(z).squeeze(1).numpy())
        return np.concatenate(outs).astype(np.float32)

    def content_consistency(self, X) -> float:
        """Mean latent divergence between inputs and their enhanced outputs.

        KL for variational models, mean squared latent distance otherwise.
        """
        mu, log_var = self._latents(X)
        enhanced = self.transform(X)
        mu_p, log_var_p = self._latents(enhanced)
        if self._variational:
            value = losses.kl_gaussians(
                torch.from_numpy(mu), torch.from_numpy(log_var),
                torch.from_numpy(mu_p), torch.from_numpy(log_var_p),
            )
            return float(value)
        return float(np.mean((mu - mu_p) ** 2))

    # -- checkpointing -----------------------------------------------------------

    def save_checkpoint(self, prefix: Path | str, metrics: dict | None = None) -> dict:
        self._check_fitted()
        state = {name: m.state_dict() for name, m in self._modules_dict().items()}
        meta = {
            "model": self.model_name,
            "arch_hash": self.arch_hash_,
            "phase_completed": self.phase_completed_,
            "epoch": sum(r.epochs for r in self.history_),
            "master_seed": self.master_seed,
            "n_params": self.n_params_,
            "params": self.get_params(),
            "metrics": metrics or {},
            "history": [r.to_dict() for r in self.history_],
        }
        return save_checkpoint(prefix, state, meta)

    @classmethod
    def from_checkpoint(cls, prefix: Path | str) -> "_EnhancerBase":
        meta = peek_meta(prefix)
        if meta.get("model") != cls.model_name:
            raise CheckpointError(
                f"checkpoint at {prefix} holds a {meta.get('model')!r} model, expected {cls.model_name!r}"
            )
        est = cls(**_params_from_json(meta["params"]))
        est._init_networks()
        state, meta = load_checkpoint(prefix, expected_arch_hash=est.arch_hash_)
        for name, module in est._modules_dict().items():
            module.load_state_dict(state[name])
        est.phase_completed_ = meta["phase_completed"]
        est.history_ = [PhaseReport.from_dict(d) for d in meta.get("history", [])]
        return est


def load_enhancer(prefix: Path | str) -> _EnhancerBase:
    """Load whichever enhancer model a checkpoint holds."""
    meta = peek_meta(prefix)
    for cls in (FMNetEnhancer, SMNetEnhancer, NonRFMNetEnhancer):
        if meta.get("model") == cls.model_name:
            return cls.from_checkpoint(prefix)
    raise CheckpointError(f"unknown model {meta.get('model')!r} in checkpoint {prefix}")


class FMNetEnhancer(_EnhancerBase):
    """Three-phase adversarially regularised variational enhancer."""

    model_name = "fmnet"
    _variational = True

    def __init__(
        self,
        epochs_per_phase=(200, 100, 50),
        batch_size=16,
        lr_phase1=1e-3,
        lr_phase2=1e-4,
        lr_phase3=1e-4,
        adam_betas=(0.9, 0.999),
        beta_kl=1.0,
        lambda_anchor=0.5,
        disc_steps_per_gen_step=1,
        master_seed=0,
        deterministic_latent=True,
    ):
        self.epochs_per_phase = epochs_per_phase
        self.batch_size = batch_size
        self.lr_phase1 = lr_phase1
        self.lr_phase2 = lr_phase2
        self.lr_phase3 = lr_phase3
        self.adam_betas = adam_betas
        self.beta_kl = beta_kl
        self.lambda_anchor = lambda_anchor
        self.disc_steps_per_gen_step = disc_steps_per_gen_step
        self.master_seed = master_seed
        self.deterministic_latent = deterministic_latent

    def _uses_discriminator(self) -> bool:
        return True

    def _validate_config(self) -> None:
        super()._validate_config()
        if len(self.epochs_per_phase) != 3 or any(e < 1 for e in self.epochs_per_phase):
            raise ValueError(f"epochs_per_phase must be three integers >= 1, got {self.epochs_per_phase}")
        for name in ("lr_phase1", "lr_phase2", "lr_phase3"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.disc_steps_per_gen_step < 1:
            raise ValueError("disc_steps_per_gen_step must be >= 1")

    def fit(self, X, y, validation=None):
        """Run phases 1-3 on matched (measured X, simulated y) batches."""
        X = as_spectrogram_batch(X, "X (measured)")
        y = as_spectrogram_batch(y, "y (simulated)")
        check_matched(X, y)
        self._validate_config()
        self._init_networks()
        for phase in (1, 2, 3):
            self.fit_phase(phase, X, y, validation=validation)
        return self

    def fit_phase(self, phase: int, X=None, y=None, validation=None):
        """Run a single phase; phases must be run in order 1 -> 2 -> 3."""
        if phase not in (1, 2, 3):
            raise ValueError(f"phase must be 1, 2 or 3, got {phase}")
        self._validate_config()
        completed = getattr(self, "phase_completed_", None)
        if completed is None:
            if phase != 1:
                raise PhaseOrderError(f"phase {phase} requires a completed phase {phase - 1} checkpoint")
            self._init_networks()
            completed = 0
        if phase != completed + 1:
            raise PhaseOrderError(
                f"phase {phase} requires a completed phase {phase - 1} checkpoint "
                f"(checkpoint metadata says phase_completed={completed})"
            )

        X = as_spectrogram_batch(X, "X (measured)") if X is not None else None
        y = as_spectrogram_batch(y, "y (simulated)") if y is not None else None
        if phase == 1:
            if y is None:
                raise ValueError("phase 1 trains on simulated data: y is required")
            report = self._run_phase1(y)
        elif phase == 2:
            if X is None or y is None:
                raise ValueError("phase 2 trains on matched pairs: X and y are required")
            check_matched(X, y)
            report = self._run_phase2(X, y, validation)
        else:
            if X is None or y is None:
                raise ValueError("phase 3 trains on measured data with a simulated anchor: X and y are required")
            report = self._run_phase3(X, y, validation)

        self.phase_completed_ = phase
        self.history_.append(report)
        return self

    # -- phase loops ---------------------------------------------------------

    def _run_phase1(self, sim: np.ndarray) -> PhaseReport:
        epochs = self.epochs_per_phase[0]
        enc, dec = self.encoder_, self.decoder_
        enc.train()
        dec.train()
        opt = torch.optim.Adam(
            chain(enc.parameters(), dec.parameters()), lr=self.lr_phase1, betas=self.adam_betas
        )
        rng = self._np_rng(1)
        gen = self._torch_gen(1)
        S = self._to_tensor(sim)
        series = {"total": [], "recon_mse": [], "kl": []}
        t0 = time.perf_counter()
        for epoch in range(epochs):
            sums = {k: 0.0 for k in series}
            count = 0
            for idx in self._epoch_batches(S.shape[0], rng):
                xb = S[idx]
                mu, log_var = enc(xb)
                eps = torch.randn(mu.shape, generator=gen)
                xh = dec(reparameterize(mu, log_var, eps))
                rec = losses.recon_loss(xh, xb)
                kl = losses.kl_standard(mu, log_var)
                loss = N_PIXELS * rec + self.beta_kl * kl
                self._guard_finite(loss, f"phase 1 epoch {epoch}")
                opt.zero_grad()
                loss.backward()
                opt.step()
                n = idx.numel()
                sums["total"] += float(loss) * n
                sums["recon_mse"] += float(rec) * n
                sums["kl"] += float(kl) * n
                count += n
            for k in series:
                series[k].append(sums[k] / count)
        return PhaseReport("phase1", series, epochs, time.perf_counter() - t0)

    def _run_phase2(self, meas: np.ndarray, sim: np.ndarray, validation=None) -> PhaseReport:
        epochs = self.epochs_per_phase[1]
        enc, dec, disc = self.encoder_, self.decoder_, self.discriminator_
        enc.train()
        disc.train()
        # Decoder frozen for the whole phase: parameters excluded from the
        # optimiser and eval mode so batch-norm buffers stay untouched.
        dec.eval()
        for p in dec.parameters():
            p.requires_grad_(False)
        opt_d = torch.optim.Adam(disc.parameters(), lr=self.lr_phase2, betas=self.adam_betas)
        opt_e = torch.optim.Adam(enc.parameters(), lr=self.lr_phase2, betas=self.adam_betas)
        rng = self._np_rng(2)
        gen = self._torch_gen(2)
        M = self._to_tensor(meas)
        S = self._to_tensor(sim)
        series = {"disc_loss": [], "gen_adv": [], "anchor": [], "disc_acc": []}
        if validation is not None:
            series["val_disc_acc"] = []
        t0 = time.perf_counter()
        try:
            for epoch in range(epochs):
                sums = {k: 0.0 for k in ("disc_loss", "gen_adv", "anchor", "disc_acc")}
                count = 0
                for idx in self._epoch_batches(M.shape[0], rng):
                    mb, sb = M[idx], S[idx]
                    for _ in range(self.disc_steps_per_gen_step):
                        with torch.no_grad():
                            mu_real = enc(sb)[0]
                            mu_fake = enc(mb)[0]
                        p_real = disc(mu_real)
                        p_fake = disc(mu_fake)
                        d_loss = losses.adv_disc_loss(p_real, p_fake)
                        self._guard_finite(d_loss, f"phase 2 epoch {epoch} (discriminator)")
                        opt_d.zero_grad()
                        d_loss.backward()
                        opt_d.step()
                    acc = 0.5 * (
                        float((p_real > 0.5).float().mean()) + float((p_fake <= 0.5).float().mean())
                    )

                    mu_m = enc(mb)[0]
                    g_adv = losses.adv_gen_loss(disc(mu_m))
                    mu_s, log_var_s = enc(sb)
                    eps = torch.randn(mu_s.shape, generator=gen)
                    sh = dec(reparameterize(mu_s, log_var_s, eps))
                    anchor = N_PIXELS * losses.recon_loss(sh, sb) + losses.kl_standard(mu_s, log_var_s)
                    e_loss = g_adv + self.lambda_anchor * anchor
                    self._guard_finite(e_loss, f"phase 2 epoch {epoch} (encoder)")
                    opt_e.zero_grad()
                    e_loss.backward()
                    opt_e.step()

                    n = idx.numel()
                    sums["disc_loss"] += float(d_loss) * n
                    sums["gen_adv"] += float(g_adv) * n
                    sums["anchor"] += float(anchor) * n
                    sums["disc_acc"] += acc * n
                    count += n
                for k in sums:
                    series[k].append(sums[k] / count)
                if validation is not None:
                    series["val_disc_acc"].append(self._disc_accuracy(*validation))
        finally:
            for p in dec.parameters():
                p.requires_grad_(True)
        return PhaseReport("phase2", series, epochs, time.perf_counter() - t0)

    def _disc_accuracy(self, meas: np.ndarray, sim: np.ndarray) -> float:
        """Discriminator accuracy on held-out pairs, in eval mode."""
        mu_m, _ = self._latents(as_spectrogram_batch(meas))
        mu_s, _ = self._latents(as_spectrogram_batch(sim))
        self.discriminator_.eval()
        with torch.no_grad():
            p_real = self.discriminator_(torch.from_numpy(mu_s))
            p_fake = self.discriminator_(torch.from_numpy(mu_m))
        self.discriminator_.train()
        self.encoder_.train()
        return 0.5 * (float((p_real > 0.5).float().mean()) + float((p_fake <= 0.5).float().mean()))

    def _run_phase3(self, meas: np.ndarray, sim: np.ndarray, validation=None) -> PhaseReport:
        epochs = self.epochs_per_phase[2]
        enc, dec = self.encoder_, self.decoder_
        opt = torch.optim.Adam(
            chain(enc.parameters(), dec.parameters()), lr=self.lr_phase3, betas=self.adam_betas
        )
        rng = self._np_rng(3)
        gen = self._torch_gen(3)
        M = self._to_tensor(meas)
        S = self._to_tensor(sim)
        series = {"content": [], "anchor_mse": []}
        extras = {}
        val_meas = validation[0] if isinstance(validation, tuple) else validation
        if val_meas is not None:
            extras["val_content_start"] = self.content_consistency(val_meas)
            series["val_content"] = []
        t0 = time.perf_counter()
        for epoch in range(epochs):
            enc.train()
            dec.train()
            sums = {"content": 0.0, "anchor_mse": 0.0}
            count = 0
            for idx in self._epoch_batches(M.shape[0], rng):
                mb = M[idx]
                sb = S[idx % S.shape[0]]
                with torch.no_grad():  # target distribution: gradients blocked
                    mu_t, log_var_t = enc(mb)
                    eps_t = torch.randn(mu_t.shape, generator=gen)
                    z_t = reparameterize(mu_t, log_var_t, eps_t)
                m_prime = dec(z_t)
                mu_p, log_var_p = enc(m_prime)
                content = losses.kl_gaussians(mu_t, log_var_t, mu_p, log_var_p)

                mu_s, log_var_s = enc(sb)
                eps_s = torch.randn(mu_s.shape, generator=gen)
                sh = dec(reparameterize(mu_s, log_var_s, eps_s))
                anchor_mse = losses.recon_loss(sh, sb)
                loss = content + self.lambda_anchor * N_PIXELS * anchor_mse
                self._guard_finite(loss, f"phase 3 epoch {epoch}")
                opt.zero_grad()
                loss.backward()
                opt.step()
                n = idx.numel()
                sums["content"] += float(content) * n
                sums["anchor_mse"] += float(anchor_mse) * n
                count += n
            series["content"].append(sums["content"] / count)
            series["anchor_mse"].append(sums["anchor_mse"] / count)
            if val_meas is not None:
                series["val_content"].append(self.content_consistency(val_meas))
        return PhaseReport("phase3", series, epochs, time.perf_counter() - t0, extras)


class SMNetEnhancer(_EnhancerBase):
    """Supervised mapping baseline: one phase of measured -> simulated regression."""

    model_name = "smnet"
    _variational = True

    def __init__(
        self,
        epochs=200,
        batch_size=16,
        lr=1e-3,
        adam_betas=(0.9, 0.999),
        beta_kl=1.0,
        master_seed=0,
        deterministic_latent=True,
    ):
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.adam_betas = adam_betas
        self.beta_kl = beta_kl
        self.master_seed = master_seed
        self.deterministic_latent = deterministic_latent

    def _validate_config(self) -> None:
        super()._validate_config()
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")

    def fit(self, X, y, validation=None):
        X = as_spectrogram_batch(X, "X (measured)")
        y = as_spectrogram_batch(y, "y (simulated)")
        check_matched(X, y)
        self._validate_config()
        self._init_networks()
        enc, dec = self.encoder_, self.decoder_
        enc.train()
        dec.train()
        opt = torch.optim.Adam(chain(enc.parameters(), dec.parameters()), lr=self.lr, betas=self.adam_betas)
        rng = self._np_rng(1)
        gen = self._torch_gen(1)
        M = self._to_tensor(X)
        S = self._to_tensor(y)
        series = {"total": [], "recon_mse": [], "kl": []}
        t0 = time.perf_counter()
        for epoch in range(self.epochs):
            sums = {k: 0.0 for k in series}
            count = 0
            for idx in self._epoch_batches(M.shape[0], rng):
                mb, sb = M[idx], S[idx]
                mu, log_var = enc(mb)
                eps = torch.randn(mu.shape, generator=gen)
                sh = dec(reparameterize(mu, log_var, eps))
                rec = losses.recon_loss(sh, sb)
                kl = losses.kl_standard(mu, log_var)
                loss = N_PIXELS * rec + self.beta_kl * kl
                self._guard_finite(loss, f"supervised epoch {epoch}")
                opt.zero_grad()
                loss.backward()
                opt.step()
                n = idx.numel()
                sums["total"] += float(loss) * n
                sums["recon_mse"] += float(rec) * n
                sums["kl"] += float(kl) * n
                count += n
            for k in series:
                series[k].append(sums[k] / count)
        self.phase_completed_ = 1
        self.history_.append(PhaseReport("supervised", series, self.epochs, time.perf_counter() - t0))
        return self


class NonRFMNetEnhancer(FMNetEnhancer):
    """FMNet ablation: deterministic 2048-wide latent, no regularisation.

    Phase 1 is plain reconstruction, phase 2 the same adversarial mapping on
    deterministic latent vectors, phase 3 a mean-squared latent distance in
    place of the KL content check (deterministic codes carry no variance).
    """

    model_name = "nonr_fmnet"
    _variational = False

    def _run_phase1(self, sim: np.ndarray) -> PhaseReport:
        epochs = self.epochs_per_phase[0]
        enc, dec = self.encoder_, self.decoder_
        enc.train()
        dec.train()
        opt = torch.optim.Adam(
            chain(enc.parameters(), dec.parameters()), lr=self.lr_phase1, betas=self.adam_betas
        )
        rng = self._np_rng(1)
        S = self._to_tensor(sim)
        series = {"total": [], "recon_mse": []}
        t0 = time.perf_counter()
        for epoch in range(epochs):
            sums = {k: 0.0 for k in series}
            count = 0
            for idx in self._epoch_batches(S.shape[0], rng):
                xb = S[idx]
                xh = dec(enc(xb))
                rec = losses.recon_loss(xh, xb)
                loss = N_PIXELS * rec
                self._guard_finite(loss, f"phase 1 epoch {epoch}")
                opt.zero_grad()
                loss.backward()
                opt.step()
                n = idx.numel()
                sums["total"] += float(loss) * n
                sums["recon_mse"] += float(rec) * n
                count += n
            for k in series:
                series[k].append(sums[k] / count)
        return PhaseReport("phase1", series, epochs, time.perf_counter() - t0)

    def _run_phase2(self, meas: np.ndarray, sim: np.ndarray, validation=None) -> PhaseReport:
        epochs = self.epochs_per_phase[1]
        enc, dec, disc = self.encoder_, self.decoder_, self.discriminator_
        enc.train()
        disc.train()
        dec.eval()
        for p in dec.parameters():
            p.requires_grad_(False)
        opt_d = torch.optim.Adam(disc.parameters(), lr=self.lr_phase2, betas=self.adam_betas)
        opt_e = torch.optim.Adam(enc.parameters(), lr=self.lr_phase2, betas=self.adam_betas)
        rng = self._np_rng(2)
        M = self._to_tensor(meas)
        S = self._to_tensor(sim)
        series = {"disc_loss": [], "gen_adv": [], "anchor": [], "disc_acc": []}
        t0 = time.perf_counter()
        try:
            for epoch in range(epochs):
                sums = {k: 0.0 for k in series}
                count = 0
                for idx in self._epoch_batches(M.shape[0], rng):
                    mb, sb = M[idx], S[idx]
                    for _ in range(self.disc_steps_per_gen_step):
                        with torch.no_grad():
                            z_real = enc(sb)
                            z_fake = enc(mb)
                        p_real = disc(z_real)
                        p_fake = disc(z_fake)
                        d_loss = losses.adv_disc_loss(p_real, p_fake)
                        self._guard_finite(d_loss, f"phase 2 epoch {epoch} (discriminator)")
                        opt_d.zero_grad()
                        d_loss.backward()
                        opt_d.step()
                    acc = 0.5 * (
                        float((p_real > 0.5).float().mean()) + float((p_fake <= 0.5).float().mean())
                    )

                    g_adv = losses.adv_gen_loss(disc(enc(mb)))
                    anchor = N_PIXELS * losses.recon_loss(dec(enc(sb)), sb)
                    e_loss = g_adv + self.lambda_anchor * anchor
                    self._guard_finite(e_loss, f"phase 2 epoch {epoch} (encoder)")
                    opt_e.zero_grad()
                    e_loss.backward()
                    opt_e.step()

                    n = idx.numel()
                    sums["disc_loss"] += float(d_loss) * n
                    sums["gen_adv"] += float(g_adv) * n
                    sums["anchor"] += float(anchor) * n
                    sums["disc_acc"] += acc * n
                    count += n
                for k in series:
                    series[k].append(sums[k] / count)
        finally:
            for p in dec.parameters():
                p.requires_grad_(True)
        return PhaseReport("phase2", series, epochs, time.perf_counter() - t0)

    def _run_phase3(self, meas: np.ndarray, sim: np.ndarray, validation=None) -> PhaseReport:
        epochs = self.epochs_per_phase[2]
        enc, dec = self.encoder_, self.decoder_
        opt = torch.optim.Adam(
            chain(enc.parameters(), dec.parameters()), lr=self.lr_phase3, betas=self.adam_betas
        )
        rng = self._np_rng(3)
        M = self._to_tensor(meas)
        S = self._to_tensor(sim)
        series = {"content": [], "anchor_mse": []}
        extras = {}
        val_meas = validation[0] if isinstance(validation, tuple) else validation
        if val_meas is not None:
            extras["val_content_start"] = self.content_consistency(val_meas)
            series["val_content"] = []
        t0 = time.perf_counter()
        for epoch in range(epochs):
            enc.train()
            dec.train()
            sums = {"content": 0.0, "anchor_mse": 0.0}
            count = 0
            for idx in self._epoch_batches(M.shape[0], rng):
                mb = M[idx]
                sb = S[idx % S.shape[0]]
                with torch.no_grad():
                    z_t = enc(mb)
                m_prime = dec(z_t)
                z_p = enc(m_prime)
                content = torch.mean((z_t - z_p) ** 2)

                anchor_mse = losses.recon_loss(dec(enc(sb)), sb)
                loss = content + self.lambda_anchor * N_PIXELS * anchor_mse
                self._guard_finite(loss, f"phase 3 epoch {epoch}")
                opt.zero_grad()
                loss.backward()
                opt.step()
                n = idx.numel()
                sums["content"] += float(content) * n
                sums["anchor_mse"] += float(anchor_mse) * n
                count += n
            series["content"].append(sums["content"] / count)
            series["anchor_mse"].append(sums["anchor_mse"] / count)
            if val_meas is not None:
                series["val_content"].append(self.content_consistency(val_meas))
        return PhaseReport("phase3", series, epochs, time.perf_counter() - t0, extras)
