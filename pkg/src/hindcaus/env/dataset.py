"""JSON-lines dataset serialization and batch assembly.

File layout: line 1 is a header {"version": 1, "config": {...}, "gt_graph":
[[...]], "config_hash": "..."}; every further line is one episode with integer
fields o, a, tau, r, gt_h, gt_eps. Round-trips are bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from multiprocessing import Pool
from pathlib import Path

import numpy as np

from .config import EnvConfig, config_hash
from .modulo import Episode, ground_truth_graph, rollout

__all__ = ["Dataset", "TrainBatch", "generate_dataset", "save_dataset", "load_dataset", "stack_episodes"]

DATASET_VERSION = 1


@dataclass
class Dataset:
    config: EnvConfig
    episodes: list[Episode]
    gt_graph: np.ndarray

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    def __len__(self) -> int:
        return len(self.episodes)


@dataclass
class TrainBatch:
    """Learner-visible view of a batch: ground-truth fields are absent by
    construction, so training code cannot read them."""

    o: np.ndarray  # (B, T+1, d_o)
    a: np.ndarray  # (B, T, d_s)
    tau: np.ndarray  # (B,)
    r: np.ndarray  # (B, T)

    @property
    def size(self) -> int:
        return self.o.shape[0]

    @property
    def horizon(self) -> int:
        return self.a.shape[1]


def stack_episodes(episodes: list[Episode]) -> TrainBatch:
    return TrainBatch(
        o=np.stack([e.o for e in episodes]),
        a=np.stack([e.a for e in episodes]),
        tau=np.array([e.tau for e in episodes], dtype=np.int64),
        r=np.stack([e.r for e in episodes]),
    )


def _episode_to_record(e: Episode) -> dict:
    return {
        "o": e.o.tolist(),
        "a": e.a.tolist(),
        "tau": int(e.tau),
        "r": e.r.tolist(),
        "gt_h": e.gt_h.tolist(),
        "gt_eps": e.gt_eps.tolist(),
    }


def _episode_from_record(d: dict) -> Episode:
    return Episode(
        o=np.asarray(d["o"], dtype=np.int64),
        a=np.asarray(d["a"], dtype=np.int64),
        tau=int(d["tau"]),
        r=np.asarray(d["r"], dtype=np.int64),
        gt_h=np.asarray(d["gt_h"], dtype=np.int64),
        gt_eps=np.asarray(d["gt_eps"], dtype=np.int64),
    )


def _rollout_range(args) -> list[dict]:
    cfg_dict, seed, lo, hi = args
    cfg = EnvConfig.from_dict(cfg_dict)
    return [_episode_to_record(rollout(cfg, i, seed=seed)) for i in range(lo, hi)]


def generate_dataset(
    cfg: EnvConfig,
    n_episodes: int,
    path: str | Path | None = None,
    seed: int | None = None,
    workers: int = 1,
) -> Dataset:
    """Roll out `n_episodes` episodes; optionally write them as JSON-lines.

    Episode i always comes from stream (seed, "episode", i), so the result is
    identical for any worker count.
    """
    if n_episodes <= 0:
        raise ValueError(f"n_episodes must be positive, got {n_episodes}")
    seed = cfg.seed if seed is None else seed
    if workers > 1:
        bounds = np.linspace(0, n_episodes, workers + 1, dtype=int)
        jobs = [
            (cfg.to_dict(), seed, int(lo), int(hi))
            for lo, hi in zip(bounds[:-1], bounds[1:])
            if hi > lo
        ]
        with Pool(workers) as pool:
            chunks = pool.map(_rollout_range, jobs)
        episodes = [_episode_from_record(r) for chunk in chunks for r in chunk]
    else:
        episodes = [rollout(cfg, i, seed=seed) for i in range(n_episodes)]
    ds = Dataset(config=cfg, episodes=episodes, gt_graph=ground_truth_graph(cfg))
    if path is not None:
        save_dataset(ds, path)
    return ds


def save_dataset(ds: Dataset, path: str | Path) -> None:
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as fh:
            header = {
                "version": DATASET_VERSION,
                "config": ds.config.to_dict(),
                "gt_graph": ds.gt_graph.tolist(),
                "config_hash": ds.config_hash,
            }
            fh.write(json.dumps(header, separators=(",", ":")) + "\n")
            for e in ds.episodes:
                fh.write(json.dumps(_episode_to_record(e), separators=(",", ":")) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write dataset to {path}: {exc}") from exc


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("version") != DATASET_VERSION:
            raise ValueError(f"unsupported dataset version in {path}: {header.get('version')}")
        cfg = EnvConfig.from_dict(header["config"])
        if header.get("config_hash") != config_hash(cfg):
            raise ValueError(f"dataset header hash mismatch in {path}")
        episodes = [_episode_from_record(json.loads(line)) for line in fh if line.strip()]
    return Dataset(config=cfg, episodes=episodes, gt_graph=np.asarray(header["gt_graph"], dtype=np.int64))
