import hashlib
import json
from concurrent.futures import ThreadPoolExecutor

import numpy as np

MASK64 = (1 << 64) - 1


def format_doc_string(**kwargs):
    def decorator(target):
        target.__doc__ = target.__doc__.format(**kwargs)
        return target

    return decorator


def stable_hash(*labels):
    "64-bit hash of the labels, identical across processes and platforms"
    data = "\x1f".join(str(label) for label in labels).encode()
    return int.from_bytes(hashlib.sha256(data).digest()[:8], "little")


def derive_seed(master_seed, *labels):
    "master seed XOR stable hash of the labels"
    return (int(master_seed) & MASK64) ^ stable_hash(*labels)


def member_rng(seed, i):
    """
    generator of ensemble member i, the same stream whichever worker builds it
    """
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))


def parallel_map(func, items, threads=1):
    "map preserving input order; runs inline when a single thread is requested"
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def format_float(value, digits=6):
    return f"{value:.{digits}f}"


def dump_json(obj):
    "deterministic json text, byte-identical for equal inputs"
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_json(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_json(obj))
