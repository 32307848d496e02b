"""Synthetic variable-length sequences with a planted class signal.

Each class owns a unit prototype direction. Background frames are rectified
Gaussian noise (post-activation backbone outputs are nonnegative); a short
window of frames gets signal_amp times the prototype added,
plus cue_amp times a class-independent cue direction (the analogue of a
generic "something is happening" signature that lets content-driven
attention localize windows of classes it never trained on). A sprinkling
of background frames carries the same cue at lower amplitude, standing in
for the mildly salient non-essential scenes of real videos. In
fixed_position mode the window sits at one fixed fraction of every video;
in instance_shifted mode it lands
uniformly at random per video, which is the regime where shared temporal
filters break down.

Splits partition the classes disjointly (meta-learning discipline).
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .attention import FrameSequence
from .errors import ConfigError

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")


@dataclass
class SynthConfig:
    num_classes: int = 30
    videos_per_class: int = 30
    d: int = 32
    t_min: int = 12
    t_max: int = 40
    window_len: int = 6
    signal_amp: float = 0.3
    cue_amp: float = 0.3
    distractor_rate: float = 0.25
    distractor_amp: float = 0.15
    noise_std: float = 0.12
    mode: str = "instance_shifted"   # instance_shifted | fixed_position
    train_frac: float = 20 / 30
    val_frac: float = 5 / 30
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("instance_shifted", "fixed_position"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if not (self.t_min >= self.window_len >= 1):
            raise ConfigError(
                f"need t_min >= window_len >= 1, got {self.t_min}/{self.window_len}")
        if self.t_max < self.t_min:
            raise ConfigError(f"t_max {self.t_max} < t_min {self.t_min}")
        if self.num_classes < 3:
            raise ConfigError("need at least 3 classes (one per split)")
        n_train, n_val, n_test = self.split_counts()
        if min(n_train, n_val, n_test) < 0 or n_train + n_val + n_test != self.num_classes:
            raise ConfigError("split fractions do not partition the classes")

    def split_counts(self):
        n_train = int(round(self.train_frac * self.num_classes))
        n_val = int(round(self.val_frac * self.num_classes))
        return n_train, n_val, self.num_classes - n_train - n_val


@dataclass
class Dataset:
    sequences: list[FrameSequence]
    split_of: dict[str, str]          # video_id -> train/val/test
    prototypes: np.ndarray            # (num_classes, d)
    config: SynthConfig

    def split(self, name: str) -> list[FrameSequence]:
        return [s for s in self.sequences if self.split_of[s.video_id] == name]


# Every prototype shares this much energy along the all-positive direction;
# it is the content cue that lets a trained detector fire on unseen classes.
_SHARED_FRAC = 0.05


def _prototypes(rng: np.random.Generator, num: int, d: int) -> np.ndarray:
    """Unit vectors with pairwise cosine < 0.3, enforced by rejection.

    Each prototype mixes a common nonnegative component with a class-specific
    signed residual orthogonal to it.
    """
    u = np.full(d, 1.0 / np.sqrt(d))
    protos: list[np.ndarray] = []
    attempts = 0
    while len(protos) < num:
        attempts += 1
        if attempts > 10 * num:
            raise ConfigError(
                f"could not draw {num} prototypes with cosine < 0.3 in d={d}; "
                f"increase d")
        q = rng.standard_normal(d)
        q -= (q @ u) * u
        q /= np.linalg.norm(q)
        p = np.sqrt(_SHARED_FRAC) * u + np.sqrt(1.0 - _SHARED_FRAC) * q
        if all(float(p @ r) < 0.3 for r in protos):
            protos.append(p)
    return np.stack(protos)


def generate(cfg: SynthConfig) -> Dataset:
    """Build the full labelled dataset, deterministic from cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    protos = _prototypes(rng, cfg.num_classes, cfg.d)
    cue = np.full(cfg.d, 1.0 / np.sqrt(cfg.d))
    n_train, n_val, _ = cfg.split_counts()

    class_split = {}
    for c in range(cfg.num_classes):
        class_split[c] = "train" if c < n_train else ("val" if c < n_train + n_val else "test")
    # fixed_position plants every window at one dataset-level fraction so that
    # a filter bank shared across classes can align to it; per-class fractions
    # would leave nothing for shared filters to lock onto once the per-filter
    # summaries are fused
    fixed_frac = float(rng.uniform(0.0, 1.0))

    sequences: list[FrameSequence] = []
    split_of: dict[str, str] = {}
    for c in range(cfg.num_classes):
        label = f"class{c:03d}"
        for v in range(cfg.videos_per_class):
            T = int(rng.integers(cfg.t_min, cfg.t_max + 1))
            # pin the dataset max length into the training split so Z covers
            # every split
            if c == 0 and v == 0:
                T = cfg.t_max
            F = rng.normal(0.0, cfg.noise_std, size=(T, cfg.d))
            room = T - cfg.window_len
            if cfg.mode == "fixed_position":
                start = int(round(fixed_frac * room))
            else:
                start = int(rng.integers(0, room + 1))
            # weak distractor cues on scattered background frames: soft
            # position estimates get dragged toward them, hard ones do not
            hit = rng.random(T) < cfg.distractor_rate
            hit[start:start + cfg.window_len] = False
            F[hit] += cfg.distractor_amp * cue
            F[start:start + cfg.window_len] += (cfg.signal_amp * protos[c]
                                               + cfg.cue_amp * cue)
            # features model post-activation backbone outputs, so they are
            # nonnegative; this is what lets the attention width detector
            # push frame scores negative and sharpen the Gaussians
            F = np.maximum(F, 0.0)
            vid = f"{label}_v{v:03d}"
            sequences.append(FrameSequence(features=F, label=label, video_id=vid))
            split_of[vid] = class_split[c]
    return Dataset(sequences=sequences, split_of=split_of, prototypes=protos, config=cfg)


@dataclass
class SplitSummary:
    num_classes: int
    num_videos: int
    max_length: int


@dataclass
class DatasetSummary:
    splits: dict[str, SplitSummary] = field(default_factory=dict)
    length_histogram: dict[int, int] = field(default_factory=dict)
    Z: int = 0


def describe(dataset: Dataset) -> DatasetSummary:
    """Per-split counts plus the max training length Z the model will freeze."""
    if not dataset.sequences:
        raise ConfigError("empty dataset")
    summary = DatasetSummary()
    for name in SPLITS:
        seqs = dataset.split(name)
        if not seqs:
            log.warning("split %r is empty", name)
            summary.splits[name] = SplitSummary(0, 0, 0)
            continue
        summary.splits[name] = SplitSummary(
            num_classes=len({s.label for s in seqs}),
            num_videos=len(seqs),
            max_length=max(s.T for s in seqs))
    for s in dataset.sequences:
        summary.length_histogram[s.T] = summary.length_histogram.get(s.T, 0) + 1
    summary.Z = summary.splits["train"].max_length
    return summary
