# -*- coding: utf-8 -*-
import os
from concurrent.futures import ThreadPoolExecutor
from hashlib import md5

import numpy as np

from . import defaults


def make_md5(*arrays):
    """
    md5 over the little-endian float64 bytes of the given arrays
    """
    digest = md5()
    for array in arrays:
        digest.update(np.ascontiguousarray(array, dtype="<f8").tobytes())
    return digest.hexdigest()


def derive_seed(seed, *keys):
    """Derive an independent sub-seed from ``seed`` and a path of integer keys.

    The same ``(seed, keys)`` always gives the same sub-seed, so Monte Carlo
    draws can be reproduced from outside the function that made them.
    """
    entropy = [int(seed)] + [int(k) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint32)[0])


def rng(seed, *keys):
    return np.random.default_rng(derive_seed(seed, *keys))


def get_run_id(config):
    run_id = ''
    try:
        run_id = "%s-%s-seed%d" % (config.mode, config.prior_kind, config.seed)
    except Exception:
        pass
    return run_id


def get_threads():
    try:
        return max(0, int(os.environ.get(defaults.THREADS_ENV, "0")))
    except ValueError:
        return 0


def parallel_map(fn, items, threads=None):
    """Map ``fn`` over ``items``; results come back in input order.

    With ``threads`` (default: DDVI_THREADS) of 0 the map is sequential.
    """
    threads = get_threads() if threads is None else threads
    items = list(items)
    if threads <= 0 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
