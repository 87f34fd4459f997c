"""Counter-based random streams and block-partitioned replica execution.

Replicas are cut into fixed-size blocks; block ``b`` always draws from the
Philox stream keyed by ``(seed, salt, b)``.  Results are reduced in block
order, so the output depends only on (seed, replicas), never on how many
workers ran the blocks.
"""

from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK = 8192


def stream(seed, *key):
    """Independent generator for the sub-stream ``key`` of ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def blocks(replicas, block=BLOCK):
    out = []
    for b, start in enumerate(range(0, int(replicas), block)):
        out.append((b, start, min(block, replicas - start)))
    return out


def map_blocks(fn, replicas, seed, salt=0, workers=1, block=BLOCK):
    """Call ``fn(rng, start, count)`` on every block; results in block order."""
    jobs = blocks(replicas, block)

    def run(job):
        b, start, count = job
        return fn(stream(seed, salt, b), start, count)

    if workers is None or workers <= 1 or len(jobs) <= 1:
        return [run(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, jobs))
