"""Synthetic grounding corpora and ingestion of precomputed feature files.

A grounding example is (video feature array [K, d_v], query token features
[N, d_q], normalized target span). The synthetic generator plants a random
pattern code inside a uniformly placed target span and encodes the same code
in the query tokens, so localizing the span from (video, query) alone is
information-theoretically possible; everything else is background drawn from
a different subspace, plus isotropic noise.

On-disk format (shared by synthetic and real corpora):
  - manifest: JSON lines, one record per example with keys
    {id, feature_file, K, d, start_sec, end_sec, duration_sec,
     query_file, N, dq}
  - payloads: raw little-endian float32, row-major, no header.

Generation is a pure function of (config, seed); per-example substreams are
spawned from the corpus seed, so examples are independent and reproducible.
Loaders are read-only and thread-safe.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .spans import clamp_span


class DataError(Exception):
    """Base class for corpus ingestion failures."""


class ShapeMismatchError(DataError):
    """Payload size disagrees with the manifest record."""


class NonFiniteFeatureError(DataError):
    """Feature payload contains NaN or infinity."""


@dataclass(frozen=True)
class SynthConfig:
    k: int = 32
    d_v: int = 32
    d_q: int = 32
    n_range: tuple[int, int] = (4, 12)
    width_range: tuple[float, float] = (0.1, 0.5)
    noise_sigma: float = 0.5
    pattern_dim: int = 8
    seed: int = 0

    def __post_init__(self):
        w_min = 1.0 / self.k
        lo, hi = self.width_range
        if not (w_min <= lo <= hi <= 1.0):
            raise ValueError(f"width_range must lie inside [{w_min}, 1], got {self.width_range}")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not (1 <= self.n_range[0] <= self.n_range[1]):
            raise ValueError(f"invalid token-count range {self.n_range}")


@dataclass(frozen=True)
class GroundingExample:
    id: str
    video: np.ndarray   # [K, d_v] float32
    query: np.ndarray   # [N, d_q] float32
    target: tuple[float, float]


@dataclass(frozen=True)
class CorpusSplits:
    train: list[GroundingExample]
    val: list[GroundingExample]
    test: list[GroundingExample]


def mixing_maps(cfg: SynthConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Corpus-level mixing maps with orthonormal columns, fixed by the seed.

    Returns (in-span video map A, background video map B, query map C), each
    [d, pattern_dim].
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed), 0x6D6170]))

    def ortho(d: int) -> np.ndarray:
        q, r = np.linalg.qr(rng.standard_normal((d, cfg.pattern_dim)))
        return q * np.sign(np.diag(r))  # deterministic sign convention

    return ortho(cfg.d_v), ortho(cfg.d_v), ortho(cfg.d_q)


def _draw_span(cfg: SynthConfig, rng: np.random.Generator) -> tuple[float, float]:
    # start uniform on [0, 1 - width_min]; width uniform within what still fits.
    w_lo, w_hi = cfg.width_range
    start = rng.uniform(0.0, 1.0 - w_lo)
    width = rng.uniform(w_lo, min(w_hi, 1.0 - start))
    return float(start), float(start + width)


def generate_example(cfg: SynthConfig, rng: np.random.Generator,
                     example_id: str = "synth-000000",
                     maps: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None) -> GroundingExample:
    """Draw one example; clips inside the target span carry the query pattern."""
    map_a, map_b, map_c = maps if maps is not None else mixing_maps(cfg)
    start, end = _draw_span(cfg, rng)
    pattern = rng.standard_normal(cfg.pattern_dim)
    background = rng.standard_normal(cfg.pattern_dim)
    centers = (np.arange(cfg.k) + 0.5) / cfg.k
    inside = (centers >= start) & (centers <= end)
    video = np.where(inside[:, None], map_a @ pattern, map_b @ background)
    video = video + cfg.noise_sigma * rng.standard_normal((cfg.k, cfg.d_v))
    n_tokens = int(rng.integers(cfg.n_range[0], cfg.n_range[1] + 1))
    query = np.tile(map_c @ pattern, (n_tokens, 1))
    query = query + cfg.noise_sigma * rng.standard_normal((n_tokens, cfg.d_q))
    return GroundingExample(
        id=example_id,
        video=video.astype(np.float32),
        query=query.astype(np.float32),
        target=(start, end),
    )


def generate_examples(cfg: SynthConfig, n: int, id_prefix: str = "synth") -> list[GroundingExample]:
    """``n`` independent examples from per-example substreams of the seed."""
    maps = mixing_maps(cfg)
    streams = np.random.SeedSequence([int(cfg.seed), 0x65780000]).spawn(n)
    return [
        generate_example(cfg, np.random.default_rng(stream), f"{id_prefix}-{i:06d}", maps)
        for i, stream in enumerate(streams)
    ]


def generate_corpus(cfg: SynthConfig, n: int) -> CorpusSplits:
    """Deterministic corpus with disjoint 70/15/15 train/val/test splits."""
    if n < 10:
        raise ValueError(f"corpus size must be >= 10, got {n}")
    examples = generate_examples(cfg, n)
    n_train = int(n * 0.70)
    n_val = int(n * 0.15)
    return CorpusSplits(
        train=examples[:n_train],
        val=examples[n_train:n_train + n_val],
        test=examples[n_train + n_val:],
    )


# -- manifest + binary payload IO -------------------------------------------

def _write_payload(path: Path, array: np.ndarray) -> None:
    path.write_bytes(np.ascontiguousarray(array, dtype="<f4").tobytes())


def save_split(examples: list[GroundingExample], out_dir: str | Path, split: str) -> Path:
    """Write one split as ``<split>.jsonl`` plus raw payloads under features/."""
    out_dir = Path(out_dir)
    feat_dir = out_dir / "features"
    feat_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / f"{split}.jsonl"
    with manifest.open("w") as fh:
        for ex in examples:
            video_file = feat_dir / f"{ex.id}.video.bin"
            query_file = feat_dir / f"{ex.id}.query.bin"
            _write_payload(video_file, ex.video)
            _write_payload(query_file, ex.query)
            record = {
                "id": ex.id,
                "feature_file": str(video_file.relative_to(out_dir)),
                "K": int(ex.video.shape[0]),
                "d": int(ex.video.shape[1]),
                "start_sec": float(ex.target[0]),
                "end_sec": float(ex.target[1]),
                "duration_sec": 1.0,
                "query_file": str(query_file.relative_to(out_dir)),
                "N": int(ex.query.shape[0]),
                "dq": int(ex.query.shape[1]),
            }
            fh.write(json.dumps(record) + "\n")
    return manifest


def save_corpus(splits: CorpusSplits, out_dir: str | Path) -> dict[str, Path]:
    return {
        split: save_split(getattr(splits, split), out_dir, split)
        for split in ("train", "val", "test")
    }


def _read_payload(path: Path, rows: int, cols: int, record_id: str) -> np.ndarray:
    if not path.exists():
        raise FileNotFoundError(f"feature payload missing for {record_id}: {path}")
    raw = path.read_bytes()
    expected = rows * cols * 4
    if len(raw) != expected:
        raise ShapeMismatchError(
            f"{record_id}: payload {path.name} has {len(raw)} bytes, expected {expected}"
        )
    array = np.frombuffer(raw, dtype="<f4").reshape(rows, cols)
    if not np.isfinite(array).all():
        raise NonFiniteFeatureError(f"{record_id}: payload {path.name} contains non-finite values")
    return array.copy()


def resample_time_axis(features: np.ndarray, k_target: int) -> np.ndarray:
    """Linear interpolation along the time axis to ``k_target`` rows."""
    k_in = features.shape[0]
    if k_in == k_target:
        return features
    src = (np.arange(k_in) + 0.5) / k_in
    dst = (np.arange(k_target) + 0.5) / k_target
    out = np.empty((k_target, features.shape[1]), dtype=features.dtype)
    for col in range(features.shape[1]):
        out[:, col] = np.interp(dst, src, features[:, col])
    return out


def load_feature_dataset(manifest_path: str | Path, k_target: int | None = None) -> list[GroundingExample]:
    """Load a manifest of precomputed features into grounding examples.

    Span annotations in seconds are normalized by the record's duration;
    out-of-range annotations are clamped with a warning. When ``k_target``
    is given, video features are resampled to that length.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise FileNotFoundError(f"manifest not found: {manifest_path}")
    base = manifest_path.parent
    examples: list[GroundingExample] = []
    for line_no, line in enumerate(manifest_path.read_text().splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as err:
            raise DataError(f"{manifest_path}:{line_no}: bad manifest record: {err}") from err
        video = _read_payload(base / rec["feature_file"], rec["K"], rec["d"], rec["id"])
        query = _read_payload(base / rec["query_file"], rec["N"], rec["dq"], rec["id"])
        if k_target is not None:
            video = resample_time_axis(video, k_target)
        duration = float(rec["duration_sec"])
        if duration <= 0:
            raise DataError(f"{rec['id']}: duration_sec must be positive")
        raw = (rec["start_sec"] / duration, rec["end_sec"] / duration)
        if not (0.0 <= raw[0] <= raw[1] <= 1.0):
            warnings.warn(f"{rec['id']}: span annotation {raw} outside [0, 1], clamping")
        start, end = clamp_span(raw, 1.0 / video.shape[0])
        examples.append(GroundingExample(rec["id"], video, query, (float(start), float(end))))
    return examples


def synth_config_to_dict(cfg: SynthConfig) -> dict:
    out = asdict(cfg)
    out["n_range"] = list(out["n_range"])
    out["width_range"] = list(out["width_range"])
    return out
