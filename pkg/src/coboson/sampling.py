"""Random Schmidt spectra.

Two measures are supported:

``induced``
    spectrum of G G^dagger / tr(G G^dagger) for an s x s matrix G of i.i.d.
    standard complex Gaussians, i.e. the reduced state of a Haar-random pure
    state on two s-dimensional subsystems;
``flat``
    uniform on the probability simplex (normalized unit exponentials).

Randomness comes from numpy's PCG64. Samples are produced in fixed-size
blocks; block ``b`` of stream ``stream_id`` is seeded with
``SeedSequence(seed, spawn_key=(stream_id, b))``. Output therefore depends only
on (seed, stream_id, measure, s) and never on how blocks are spread over
worker processes.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Literal

import numpy as np

from .errors import InvalidInput
from .schmidt import SchmidtDistribution

GENERATOR_NAME = "numpy.PCG64/SeedSequence"
BLOCK_SIZE = 1 << 16
MEASURES = ("induced", "flat")

Measure = Literal["induced", "flat"]


@dataclass(frozen=True)
class SamplerConfig:
    s: int
    measure: Measure = "induced"
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        if self.s < 1:
            raise InvalidInput("s must be >= 1")
        if self.measure not in MEASURES:
            raise InvalidInput(f"unknown measure {self.measure!r}")
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= v < 2**64:
                raise InvalidInput(f"{name} must be a 64-bit unsigned integer")

    def metadata(self) -> dict:
        return {
            "generator": GENERATOR_NAME,
            "block_size": BLOCK_SIZE,
            "seed": self.seed,
            "stream_id": self.stream_id,
            "measure": self.measure,
            "s": self.s,
        }


def block_rng(cfg: SamplerConfig, block: int) -> np.random.Generator:
    seq = np.random.SeedSequence(cfg.seed, spawn_key=(cfg.stream_id, block))
    return np.random.Generator(np.random.PCG64(seq))


def sample_block(cfg: SamplerConfig, block: int, size: int = BLOCK_SIZE) -> np.ndarray:
    """The first ``size`` spectra of block ``block``, shape (size, s).

    Rows are normalized and sorted in descending order. A shorter ``size``
    yields a prefix of the longer result.
    """
    if not 0 <= size <= BLOCK_SIZE:
        raise InvalidInput(f"block size must lie in [0, {BLOCK_SIZE}]")
    s = cfg.s
    rng = block_rng(cfg, block)
    if s == 1:
        return np.ones((size, 1))
    if cfg.measure == "induced":
        g = rng.standard_normal((size, s, s, 2))
        z = g[..., 0] + 1j * g[..., 1]
        w = np.linalg.eigvalsh(z @ np.conj(np.swapaxes(z, 1, 2)))
        w = np.clip(w[:, ::-1], 0.0, None)
    else:
        w = -np.sort(-rng.standard_exponential((size, s)), axis=1)
    return w / w.sum(axis=1, keepdims=True)


def block_layout(count: int) -> list[tuple[int, int]]:
    """(block index, size) pairs covering ``count`` samples."""
    full, rest = divmod(count, BLOCK_SIZE)
    out = [(b, BLOCK_SIZE) for b in range(full)]
    if rest:
        out.append((full, rest))
    return out


def _block_task(args: tuple[SamplerConfig, int, int]) -> np.ndarray:
    cfg, block, size = args
    return sample_block(cfg, block, size)


def iter_blocks(cfg: SamplerConfig, count: int, workers: int = 1) -> Iterator[np.ndarray]:
    """Spectra for ``count`` samples, one array per block, in block order."""
    jobs = [(cfg, b, size) for b, size in block_layout(count)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            yield from pool.map(_block_task, jobs)
    else:
        for job in jobs:
            yield _block_task(job)


def sample_array(cfg: SamplerConfig, count: int, workers: int = 1) -> np.ndarray:
    if count < 0:
        raise InvalidInput("count must be >= 0")
    parts = list(iter_blocks(cfg, count, workers))
    return np.concatenate(parts) if parts else np.empty((0, cfg.s))


def sample_spectrum(cfg: SamplerConfig) -> SchmidtDistribution:
    return SchmidtDistribution(sample_block(cfg, 0, 1)[0])


def sample_batch(cfg: SamplerConfig, count: int, workers: int = 1) -> list[SchmidtDistribution]:
    if count < 1:
        raise InvalidInput("count must be >= 1")
    return [SchmidtDistribution(row) for row in sample_array(cfg, count, workers)]
