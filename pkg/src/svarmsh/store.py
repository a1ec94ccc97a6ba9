"""On-disk draw store.

Layout of a store directory::

    metadata.json          sampler config, scheme, prior, data digest, column layout
    data.csv               copy of the estimation data
    chain_000.bin          draws of chain 0, columnar little-endian float64
    chain_000_states.bin   T x M share of draws in each state (row-major float64)
    ...

Inside ``chain_XXX.bin`` every field listed in ``metadata["layout"]`` is written
as one contiguous block of ``n_draws * prod(shape)`` doubles (draw-major, then
row-major within a draw), in the listed order.  Reloading is bit-exact.
"""

from __future__ import annotations

import json
import os
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from .gibbs import FIELDS, ChainDraws, DrawStore

DTYPE = np.dtype("<f8")


@contextmanager
def exclusive_dir(path: Path):
    """Hold a lock file in ``path`` so only one writer touches it at a time."""
    path.mkdir(parents=True, exist_ok=True)
    lock = path / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError as exc:
        raise RuntimeError(f"{path} is being written by another process (remove {lock} if stale)") from exc
    try:
        yield
    finally:
        os.close(fd)
        lock.unlink(missing_ok=True)


def dump_json(obj, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def layout(chain: ChainDraws) -> list[dict]:
    return [{"field": name, "shape": list(getattr(chain, name).shape[1:])} for name in FIELDS]


def save_store(store: DrawStore, path, data_csv: str | None = None) -> Path:
    """Write ``store`` to directory ``path``; ``data_csv`` is the text of the data file to embed."""
    path = Path(path)
    with exclusive_dir(path):
        meta = dict(store.metadata)
        meta["n_chains"] = len(store.chains)
        meta["n_draws"] = [c.n_draws for c in store.chains]
        meta["layout"] = layout(store.chains[0])
        meta["state_probs_shape"] = list(store.chains[0].state_probs.shape)
        dump_json(meta, path / "metadata.json")
        if data_csv is not None:
            (path / "data.csv").write_text(data_csv, encoding="utf-8")
        for k, chain in enumerate(store.chains):
            with open(path / f"chain_{k:03d}.bin", "wb") as fh:
                for name in FIELDS:
                    fh.write(np.ascontiguousarray(getattr(chain, name), dtype=DTYPE).tobytes())
            with open(path / f"chain_{k:03d}_states.bin", "wb") as fh:
                fh.write(np.ascontiguousarray(chain.state_probs, dtype=DTYPE).tobytes())
    return path


def load_store(path) -> DrawStore:
    path = Path(path)
    meta_path = path / "metadata.json"
    if not meta_path.exists():
        raise FileNotFoundError(f"no draw store at {path} (missing metadata.json)")
    with open(meta_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    chains = []
    for k, S in enumerate(meta["n_draws"]):
        raw = np.fromfile(path / f"chain_{k:03d}.bin", dtype=DTYPE)
        arrays, offset = {}, 0
        for item in meta["layout"]:
            shape = (S, *item["shape"])
            size = int(np.prod(shape))
            arrays[item["field"]] = raw[offset : offset + size].reshape(shape)
            offset += size
        if offset != raw.size:
            raise ValueError(f"chain {k} file size does not match the recorded layout")
        sp = np.fromfile(path / f"chain_{k:03d}_states.bin", dtype=DTYPE).reshape(meta["state_probs_shape"])
        chains.append(ChainDraws(**arrays, state_probs=sp))
    for key in ("n_chains", "n_draws", "layout", "state_probs_shape"):
        meta.pop(key)
    return DrawStore(chains, meta)
