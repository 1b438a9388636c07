"""Deterministic generation and on-disk layout of matched spectrogram pairs.

A dataset directory holds `manifest.jsonl` (one record per pair), a resolved
`dataset_config.json` snapshot, and one little-endian float32 file per
spectrogram (row-major 48x80, extension `.f32`). Per-sample seeds are derived
from the master seed with a splitmix64 counter stream, so regenerating with
the same config yields byte-identical files.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corruption import PROFILES, CorruptionProfile, corrupt, get_profile
from .motion import ACTIVITIES, Activity, synth_tracks
from .render import DEFAULT_RENDER, RenderParams, Spectrogram, render_clean

_GOLDEN = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1
# Stream tags separating the per-sample consumers of the seed stream.
_TRACK_STREAM = 0x51A3
_CORRUPT_STREAM = 0xC0FE
_DURATION_STREAM = 0xD17A


def splitmix64(x: int) -> int:
    """One step of the splitmix64 mixing function (counter-based, stateless)."""
    x = (x + _GOLDEN) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(master_seed: int, index: int, stream: int = 0) -> int:
    """Per-sample seed: mix the master seed with a sample counter and stream tag."""
    return splitmix64((master_seed & _MASK64) ^ splitmix64(((index + 1) * _GOLDEN ^ stream) & _MASK64))


def allocate_counts(total: int, n_groups: int) -> list[int]:
    """Split `total` into `n_groups` near-equal counts, round-robin remainder."""
    base, rem = divmod(total, n_groups)
    return [base + (1 if i < rem else 0) for i in range(n_groups)]


def allocate_test_counts(counts: list[int], test_fraction: float) -> list[int]:
    """Per-group test counts whose sum is round(total * test_fraction).

    Largest-remainder allocation: each group gets floor(n * fraction), then
    the global shortfall is assigned in order of descending fractional part
    (ties broken by group order).
    """
    total_test = int(round(sum(counts) * test_fraction))
    exact = [n * test_fraction for n in counts]
    base = [int(np.floor(e)) for e in exact]
    shortfall = total_test - sum(base)
    order = sorted(range(len(counts)), key=lambda i: (-(exact[i] - base[i]), i))
    for i in order[:shortfall]:
        base[i] += 1
    return base


@dataclass(frozen=True)
class DatasetConfig:
    """Resolved configuration of one generated corpus."""

    total_pairs: int = 304
    pairs_per_activity: int | None = None
    activities: tuple[str, ...] = ACTIVITIES
    subjects: tuple[int, ...] = (1, 2, 3)
    train_fraction: float = 0.8
    profile: str = "los"
    master_seed: int = 0
    duration_range_s: tuple[float, float] = (4.5, 7.5)
    previews: bool = False
    render: RenderParams = DEFAULT_RENDER

    def counts_per_activity(self) -> dict[str, int]:
        if self.pairs_per_activity is not None:
            return {a: self.pairs_per_activity for a in self.activities}
        return dict(zip(self.activities, allocate_counts(self.total_pairs, len(self.activities))))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["render"] = self.render.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetConfig":
        d = dict(d)
        if "render" in d and isinstance(d["render"], dict):
            d["render"] = RenderParams(**d["render"])
        for key in ("activities", "subjects", "duration_range_s"):
            if key in d and isinstance(d[key], list):
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class PairRecord:
    """One matched (simulated, measured) pair with its provenance."""

    id: str
    activity: str
    subject: int
    split: str
    profile: str
    seed: int
    duration_s: float
    sim_path: str
    meas_path: str

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "activity": self.activity,
            "subject": self.subject,
            "split": self.split,
            "profile": self.profile,
            "seed": self.seed,
            "duration_s": self.duration_s,
            "sim": self.sim_path,
            "meas": self.meas_path,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PairRecord":
        return cls(
            id=d["id"],
            activity=d["activity"],
            subject=d["subject"],
            split=d["split"],
            profile=d["profile"],
            seed=d["seed"],
            duration_s=d["duration_s"],
            sim_path=d["sim"],
            meas_path=d["meas"],
        )


def write_f32(path: Path, values: np.ndarray) -> None:
    arr = np.ascontiguousarray(values, dtype="<f4")
    path.write_bytes(arr.tobytes())


def read_f32(path: Path, shape: tuple[int, int] = (48, 80)) -> np.ndarray:
    data = np.frombuffer(Path(path).read_bytes(), dtype="<f4")
    if data.size != shape[0] * shape[1]:
        raise ValueError(f"{path}: expected {shape[0] * shape[1]} float32 values, got {data.size}")
    return data.reshape(shape).copy()


def _write_preview(path: Path, values: np.ndarray) -> None:
    from PIL import Image

    img = np.flipud(values)  # positive Doppler on top
    Image.fromarray(np.round(img * 255.0).astype(np.uint8), mode="L").save(path)


def synthesize_pair(
    activity: str,
    subject: int,
    sample_seed: int,
    profile: CorruptionProfile,
    duration_range_s: tuple[float, float] = (4.5, 7.5),
    render: RenderParams = DEFAULT_RENDER,
) -> tuple[Spectrogram, Spectrogram, float]:
    """Regenerate the (sim, meas) pair determined by one per-sample seed."""
    dur_rng = np.random.default_rng(derive_seed(sample_seed, 0, _DURATION_STREAM))
    duration_s = float(dur_rng.uniform(*duration_range_s))
    tracks = synth_tracks(
        activity,
        duration_s,
        derive_seed(sample_seed, 0, _TRACK_STREAM),
        sample_rate_hz=render.sample_rate_hz,
        subject=subject,
    )
    sim = render_clean(tracks, render)
    meas = corrupt(sim, profile, derive_seed(sample_seed, 0, _CORRUPT_STREAM))
    return sim, meas, duration_s


def generate_dataset(config: DatasetConfig, out_dir: Path | str) -> dict:
    """Generate a full corpus under `out_dir` and return a count summary."""
    counts = config.counts_per_activity()
    total = sum(counts.values())
    if total <= 0:
        raise ValueError("requested dataset is empty")
    profile = get_profile(config.profile)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if (out_dir / "manifest.jsonl").exists():
        raise FileExistsError(f"{out_dir} already contains a dataset manifest")
    if config.previews:
        (out_dir / "previews").mkdir(exist_ok=True)

    test_counts = allocate_test_counts(
        [counts[a] for a in config.activities], 1.0 - config.train_fraction
    )

    records: list[PairRecord] = []
    by_split = {"train": 0, "test": 0}
    index = 0
    for activity, n_test in zip(config.activities, test_counts):
        n_act = counts[activity]
        order_rng = np.random.default_rng(
            derive_seed(config.master_seed, _activity_tag(activity), stream=0x5711)
        )
        test_positions = set(order_rng.permutation(n_act)[:n_test].tolist())
        for j in range(n_act):
            sample_seed = derive_seed(config.master_seed, index)
            subject = config.subjects[j % len(config.subjects)]
            split = "test" if j in test_positions else "train"
            sim, meas, duration_s = synthesize_pair(
                activity, subject, sample_seed, profile, config.duration_range_s, config.render
            )
            rid = f"{activity}-s{subject}-{j:03d}"
            sim_path = f"{rid}_sim.f32"
            meas_path = f"{rid}_meas.f32"
            write_f32(out_dir / sim_path, sim.values)
            write_f32(out_dir / meas_path, meas.values)
            if config.previews:
                _write_preview(out_dir / "previews" / f"{rid}_sim.png", sim.values)
                _write_preview(out_dir / "previews" / f"{rid}_meas.png", meas.values)
            records.append(
                PairRecord(rid, activity, subject, split, profile.name, sample_seed, duration_s, sim_path, meas_path)
            )
            by_split[split] += 1
            index += 1

    with (out_dir / "manifest.jsonl").open("w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
    (out_dir / "dataset_config.json").write_text(json.dumps(config.to_dict(), sort_keys=True, indent=2) + "\n")

    return {
        "out_dir": str(out_dir),
        "total": total,
        "profile": profile.name,
        "by_activity": counts,
        "by_split": by_split,
        "digest": dataset_digest(out_dir),
    }


def _activity_tag(activity: str) -> int:
    return int.from_bytes(hashlib.sha256(activity.encode()).digest()[:4], "little")


class Dataset:
    """Loaded corpus with access counters for source-isolation audits."""

    def __init__(self, root: Path, records: list[PairRecord], config: dict):
        self.root = Path(root)
        self.records = records
        self.config = config
        self.read_counts = {"sim": 0, "meas": 0}

    @property
    def profile(self) -> str:
        return self.config.get("profile", "los")

    def select(self, split: str | None = None, activities=None) -> list[PairRecord]:
        out = self.records
        if split is not None:
            out = [r for r in out if r.split == split]
        if activities is not None:
            wanted = {Activity(a).value for a in activities}
            out = [r for r in out if r.activity in wanted]
        return out

    def sim_values(self, record: PairRecord) -> np.ndarray:
        self.read_counts["sim"] += 1
        return read_f32(self.root / record.sim_path)

    def meas_values(self, record: PairRecord) -> np.ndarray:
        self.read_counts["meas"] += 1
        return read_f32(self.root / record.meas_path)

    def sim_batch(self, records: list[PairRecord]) -> np.ndarray:
        return np.stack([self.sim_values(r) for r in records])

    def meas_batch(self, records: list[PairRecord]) -> np.ndarray:
        return np.stack([self.meas_values(r) for r in records])

    def labels(self, records: list[PairRecord]) -> np.ndarray:
        return np.array([r.activity for r in records])


def load_dataset(root: Path | str) -> Dataset:
    root = Path(root)
    manifest = root / "manifest.jsonl"
    if not manifest.exists():
        raise FileNotFoundError(f"no manifest.jsonl under {root}")
    records = [PairRecord.from_dict(json.loads(line)) for line in manifest.read_text().splitlines() if line]
    config_path = root / "dataset_config.json"
    config = json.loads(config_path.read_text()) if config_path.exists() else {}
    return Dataset(root, records, config)


def dataset_digest(root: Path | str) -> str:
    """SHA-256 over the manifest and every array file, in sorted name order."""
    root = Path(root)
    h = hashlib.sha256()
    for path in sorted([root / "manifest.jsonl", *root.glob("*.f32")]):
        h.update(path.name.encode())
        h.update(path.read_bytes())
    return h.hexdigest()
