"""Reproducible per-path random streams.

Paths are grouped into fixed blocks of ``BLOCK`` consecutive path ids. Each
block owns a Philox generator keyed by ``(seed, block, purpose)`` and every
call draws a full ``(BLOCK, d)`` array, so the numbers a path sees depend only
on the seed, its path id and how many draws were made, never on how many
other paths run or on thread scheduling.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

__all__ = ["BLOCK", "PathStreams", "thread_count"]

BLOCK = 4096

NOISE = 0
DONOR = 1
BRIDGE = 2


def thread_count() -> int:
    """Worker cap from ``QLYAP_THREADS`` (default 1)."""
    raw = os.environ.get("QLYAP_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"QLYAP_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


class PathStreams:
    """Standard-normal (or uniform) draws for path ids ``0 .. n_paths-1``."""

    def __init__(self, seed: int, dim: int, n_paths: int, purpose: int = NOISE,
                 threads: int | None = None):
        self.seed = int(seed)
        self.dim = int(dim)
        self.n_paths = int(n_paths)
        self.purpose = purpose
        self.n_blocks = -(-self.n_paths // BLOCK)
        self._gens = {}
        self.threads = thread_count() if threads is None else max(1, int(threads))
        self._buf = np.empty((self.n_blocks * BLOCK, self.dim))

    def _gen(self, block):
        g = self._gens.get(block)
        if g is None:
            ss = np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, block, self.purpose])
            g = np.random.Generator(np.random.Philox(ss))
            self._gens[block] = g
        return g

    def _fill(self, block):
        out = self._buf[block * BLOCK:(block + 1) * BLOCK]
        if self.purpose in (DONOR, BRIDGE):
            self._gen(block).random(out=out)
        else:
            self._gen(block).standard_normal(out=out)

    def draw(self, blocks=None) -> np.ndarray:
        """Advance the given blocks (default: all) by one draw.

        Returns the full buffer of shape ``(n_blocks * BLOCK, dim)``; rows of
        blocks not advanced hold stale values and must not be used.
        """
        if blocks is None:
            blocks = range(self.n_blocks)
        blocks = list(blocks)
        if self.threads > 1 and len(blocks) > 1:
            for b in blocks:
                self._gen(b)
            with ThreadPoolExecutor(min(self.threads, len(blocks))) as pool:
                list(pool.map(self._fill, blocks))
        else:
            for b in blocks:
                self._fill(b)
        return self._buf


def single_path_streams(seed, dim, path_id, purpose=NOISE):
    """Streams positioned so that ``row`` picks out ``path_id`` in each draw."""
    block, row = divmod(int(path_id), BLOCK)
    streams = PathStreams(seed, dim, (block + 1) * BLOCK, purpose, threads=1)
    return streams, block, block * BLOCK + row
