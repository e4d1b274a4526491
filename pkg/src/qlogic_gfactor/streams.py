from __future__ import annotations

import hashlib

import numpy as np

_MASK_64 = (1 << 64) - 1


def derive_seed(master_seed: int, path: str, index: int = 0) -> int:
    """Split ``master_seed`` into a 64-bit child seed for ``path``/``index``.

    The derivation is a hash, so substreams do not depend on the order in
    which parallel workers request them.
    """
    payload = f"{master_seed & _MASK_64}|{path}|{index}".encode()
    digest = hashlib.sha256(payload).hexdigest()
    return int(digest[:16], 16)


def substream(master_seed: int, path: str, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, path, index)))
