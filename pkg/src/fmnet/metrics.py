"""Quantitative evaluation: enhancement quality, latent divergence tables,
latent exports with a 2-D principal-component projection, and the
domain-shift check on a through-the-wall corpus.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from sklearn.decomposition import PCA

from .datagen import Dataset
from .enhancers import _EnhancerBase
from .losses import kl_gaussians, pixel_loss, ssim

ENHANCEMENT_FIELDS = (
    "pixel_loss_meas_vs_sim",
    "pixel_loss_enh_vs_sim",
    "ssim_meas_vs_sim",
    "ssim_enh_vs_sim",
)


@dataclass
class MetricsReport:
    """Per-activity metric means plus exact-sum overall aggregates."""

    kind: str
    model_id: str
    corpus_id: str
    split: str
    per_activity: dict[str, dict[str, float]]
    overall: dict[str, float]
    counts: dict[str, int]
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "model_id": self.model_id,
            "corpus_id": self.corpus_id,
            "split": self.split,
            "per_activity": self.per_activity,
            "overall": self.overall,
            "counts": self.counts,
            "extras": self.extras,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(
            d["kind"], d["model_id"], d["corpus_id"], d["split"],
            d["per_activity"], d["overall"], d["counts"], d.get("extras", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls.from_dict(json.loads(text))


def _aggregate(per_sample: dict[str, list[tuple[str, float]]]) -> tuple[dict, dict, dict]:
    """Aggregate (activity, value) observations exactly: overall = sum/total."""
    per_activity: dict[str, dict[str, float]] = {}
    overall: dict[str, float] = {}
    counts: dict[str, int] = {}
    for metric, obs in per_sample.items():
        sums: dict[str, float] = {}
        ns: dict[str, int] = {}
        for activity, value in obs:
            sums[activity] = sums.get(activity, 0.0) + value
            ns[activity] = ns.get(activity, 0) + 1
        for activity in sums:
            per_activity.setdefault(activity, {})[metric] = sums[activity] / ns[activity]
        overall[metric] = sum(sums.values()) / sum(ns.values())
        counts.update(ns)
    return per_activity, overall, counts


def eval_enhancement(
    dataset: Dataset, enhancer: _EnhancerBase, split: str = "test", model_id: str | None = None
) -> MetricsReport:
    """Pixel loss and SSIM of measured and enhanced data against clean targets."""
    records = dataset.select(split=split)
    if not records:
        raise ValueError(f"no records in split {split!r}")
    meas = dataset.meas_batch(records)
    sim = dataset.sim_batch(records)
    enhanced = enhancer.transform(meas)

    per_sample = {metric: [] for metric in ENHANCEMENT_FIELDS}
    for i, rec in enumerate(records):
        per_sample["pixel_loss_meas_vs_sim"].append((rec.activity, pixel_loss(meas[i], sim[i])))
        per_sample["pixel_loss_enh_vs_sim"].append((rec.activity, pixel_loss(enhanced[i], sim[i])))
        per_sample["ssim_meas_vs_sim"].append((rec.activity, ssim(meas[i], sim[i])))
        per_sample["ssim_enh_vs_sim"].append((rec.activity, ssim(enhanced[i], sim[i])))
    per_activity, overall, counts = _aggregate(per_sample)
    return MetricsReport(
        kind="enhancement_eval",
        model_id=model_id or enhancer.model_name,
        corpus_id=str(dataset.root),
        split=split,
        per_activity=per_activity,
        overall=overall,
        counts=counts,
    )


def matched_pair_kld(dataset: Dataset, enhancer: _EnhancerBase, split: str = "test") -> MetricsReport:
    """Latent divergence between matched measured/simulated encodings.

    For variational models this is the per-dimension-averaged KL divergence;
    deterministic models fall back to mean squared latent distance, flagged
    as a surrogate metric.
    """
    records = dataset.select(split=split)
    if not records:
        raise ValueError(f"no records in split {split!r}")
    meas = dataset.meas_batch(records)
    sim = dataset.sim_batch(records)
    mu_m, lv_m = enhancer.encode(meas)
    mu_s, lv_s = enhancer.encode(sim)

    surrogate = lv_m is None
    values = []
    for i, rec in enumerate(records):
        if surrogate:
            value = float(np.mean((mu_m[i] - mu_s[i]) ** 2))
        else:
            value = float(
                kl_gaussians(
                    torch.from_numpy(mu_m[i]), torch.from_numpy(lv_m[i]),
                    torch.from_numpy(mu_s[i]), torch.from_numpy(lv_s[i]),
                )
            )
        values.append((rec.activity, value))
    metric = "latent_mse" if surrogate else "latent_kld"
    per_activity, overall, counts = _aggregate({metric: values})
    return MetricsReport(
        kind="latent_kld",
        model_id=enhancer.model_name,
        corpus_id=str(dataset.root),
        split=split,
        per_activity=per_activity,
        overall=overall,
        counts=counts,
        extras={"surrogate": surrogate, "metric": metric},
    )


def export_latents(
    dataset: Dataset,
    enhancer: _EnhancerBase,
    out_path: Path | str,
    split: str | None = None,
) -> int:
    """Write latent means to CSV and a 2-D principal-component projection.

    The full file has columns id, activity, source and the 2048 latent
    means; the companion `<name>_pc2.csv` holds the projection (pc1, pc2).
    Returns the number of data rows written to the full file.
    """
    records = dataset.select(split=split)
    if not records:
        raise ValueError("no records selected for latent export")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)

    meas_mu, _ = enhancer.encode(dataset.meas_batch(records))
    sim_mu, _ = enhancer.encode(dataset.sim_batch(records))
    latent_dim = meas_mu.shape[1]

    rows = []
    for i, rec in enumerate(records):
        rows.append((rec.id, rec.activity, "meas", meas_mu[i]))
        rows.append((rec.id, rec.activity, "sim", sim_mu[i]))

    with out_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "activity", "source", *(f"mu_{j}" for j in range(latent_dim))])
        for rid, activity, source, mu in rows:
            writer.writerow([rid, activity, source, *(repr(float(v)) for v in mu)])

    matrix = np.concatenate([meas_mu, sim_mu]).astype(np.float64)
    pcs = PCA(n_components=2, svd_solver="full").fit_transform(matrix)
    pc_path = out_path.with_name(out_path.stem + "_pc2.csv")
    with pc_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "activity", "source", "pc1", "pc2"])
        order = [(rec.id, rec.activity, "meas") for rec in records] + [
            (rec.id, rec.activity, "sim") for rec in records
        ]
        for (rid, activity, source), pc in zip(order, pcs):
            writer.writerow([rid, activity, source, repr(float(pc[0])), repr(float(pc[1]))])
    return len(rows)


def pc_cluster_separation(pc_points: np.ndarray, labels: np.ndarray) -> float:
    """Mean inter-class centroid distance over mean intra-class spread."""
    classes = np.unique(labels)
    centroids = {c: pc_points[labels == c].mean(axis=0) for c in classes}
    spreads = [
        float(np.mean(np.linalg.norm(pc_points[labels == c] - centroids[c], axis=1)))
        for c in classes
    ]
    inter = [
        float(np.linalg.norm(centroids[a] - centroids[b]))
        for i, a in enumerate(classes)
        for b in classes[i + 1 :]
    ]
    return float(np.mean(inter) / np.mean(spreads))


def paired_pc_distances(pc_meas: np.ndarray, pc_sim: np.ndarray) -> tuple[float, float]:
    """Mean distance between matched rows vs between all unmatched rows."""
    n = pc_meas.shape[0]
    paired = float(np.mean(np.linalg.norm(pc_meas - pc_sim, axis=1)))
    diffs = np.linalg.norm(pc_meas[:, None, :] - pc_sim[None, :, :], axis=2)
    off_diag = diffs[~np.eye(n, dtype=bool)]
    return paired, float(np.mean(off_diag))


def eval_domain_shift(enhancer: _EnhancerBase, ttw_dataset: Dataset, model_id: str | None = None) -> MetricsReport:
    """Generalisation check on a through-the-wall corpus without retraining.

    Reports SSIM between enhanced output and the measured input (the only
    reference available to fielded systems) and, since the generator also
    provides ground truth, SSIM against the clean spectrogram.
    """
    if ttw_dataset.profile != "ttw":
        raise ValueError(f"domain-shift evaluation expects a 'ttw' corpus, got {ttw_dataset.profile!r}")
    records = ttw_dataset.select()
    meas = ttw_dataset.meas_batch(records)
    sim = ttw_dataset.sim_batch(records)
    enhanced = enhancer.transform(meas)

    per_sample = {
        "ssim_enh_vs_meas": [],
        "ssim_enh_vs_sim": [],
        "ssim_meas_vs_sim": [],
        "pixel_loss_enh_vs_sim": [],
        "pixel_loss_meas_vs_sim": [],
    }
    for i, rec in enumerate(records):
        per_sample["ssim_enh_vs_meas"].append((rec.activity, ssim(enhanced[i], meas[i])))
        per_sample["ssim_enh_vs_sim"].append((rec.activity, ssim(enhanced[i], sim[i])))
        per_sample["ssim_meas_vs_sim"].append((rec.activity, ssim(meas[i], sim[i])))
        per_sample["pixel_loss_enh_vs_sim"].append((rec.activity, pixel_loss(enhanced[i], sim[i])))
        per_sample["pixel_loss_meas_vs_sim"].append((rec.activity, pixel_loss(meas[i], sim[i])))
    per_activity, overall, counts = _aggregate(per_sample)
    return MetricsReport(
        kind="domain_shift",
        model_id=model_id or enhancer.model_name,
        corpus_id=str(ttw_dataset.root),
        split="all",
        per_activity=per_activity,
        overall=overall,
        counts=counts,
    )


def read_pc_csv(path: Path | str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Load a projection CSV back into (points, labels, sources)."""
    points, labels, sources = [], [], []
    with Path(path).open() as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            labels.append(row[1])
            sources.append(row[2])
            points.append([float(row[3]), float(row[4])])
    return np.asarray(points), np.asarray(labels), np.asarray(sources)
