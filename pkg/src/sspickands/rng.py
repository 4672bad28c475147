"""Counter-based random streams.

Paths are grouped in fixed blocks of ``BLOCK_PATHS`` consecutive indices.
Block ``b`` of stream ``stream`` under ``seed`` reads a Philox generator with
key ``seed`` and counter ``(0, 0, stream, b)``, so the draws of path ``j``
depend on ``(seed, stream, j)`` only and never on how blocks are scheduled
across workers.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK_PATHS = 512

# stream identifiers
GAUSSIAN = 0
TILT = 1
PILOT = 2

_MASK64 = (1 << 64) - 1


def block_generator(seed, block, stream=GAUSSIAN):
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    key = seed & _MASK64
    bitgen = np.random.Philox(key=key, counter=[0, 0, int(stream), int(block)])
    return np.random.Generator(bitgen)


def block_ranges(n_paths, block=BLOCK_PATHS):
    """Yield ``(block_index, start, stop)`` covering ``range(n_paths)``."""
    for b, start in enumerate(range(0, n_paths, block)):
        yield b, start, min(start + block, n_paths)


def normals(seed, start_block, rows, width, stream=GAUSSIAN):
    """Standard normals for ``rows`` paths of block ``start_block``.

    Row ``r`` is the same for any ``rows > r``: the generator fills
    row-major from a fresh counter.
    """
    return block_generator(seed, start_block, stream).standard_normal((rows, width))


def uniforms(seed, start_block, rows, stream=TILT):
    return block_generator(seed, start_block, stream).random(rows)


def map_blocks(func, n_paths, workers=1):
    """Run ``func(block, start, stop)`` over all blocks.

    Results come back in block order whatever the worker count.
    """
    ranges = list(block_ranges(n_paths))
    if workers is None or workers <= 1 or len(ranges) <= 1:
        return [func(*r) for r in ranges]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda r: func(*r), ranges))
