"""Per-task checkpoints: named tensors with shape headers in npz containers.

Each task index gets one reasoner file and (for generative-replay runs) one
denoiser file whose header also records the noise-schedule parameters.
Digests cover tensor names, shapes, dtypes, and bytes, so they identify the
parameter state independently of zip-container metadata.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .diffusion import DenoiserParams, NoiseSchedule
from .errors import ContractError, MissingArtifactError
from .reasoner import ReasonerParams


def digest_tensors(tensors: dict) -> str:
    h = hashlib.sha256()
    for key in sorted(tensors):
        arr = np.ascontiguousarray(tensors[key])
        h.update(key.encode())
        h.update(str(arr.shape).encode())
        h.update(str(arr.dtype).encode())
        h.update(arr.tobytes())
    return h.hexdigest()


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _save(path, tensors: dict, meta: dict):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, __meta__=np.array(json.dumps(meta, sort_keys=True)), **tensors)


def _load(path):
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(f"checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["__meta__"]))
        tensors = {k: z[k] for k in z.files if k != "__meta__"}
    return tensors, meta


def reasoner_path(out_dir, t: int) -> Path:
    return Path(out_dir) / f"reasoner_t{t:03d}.npz"


def denoiser_path(out_dir, t: int) -> Path:
    return Path(out_dir) / f"denoiser_t{t:03d}.npz"


def save_reasoner(out_dir, t: int, params: ReasonerParams, extra_meta=None) -> Path:
    meta = {"kind": "reasoner", "task": t,
            "num_entities": params.num_entities, "dim": params.dim,
            "n_layers": params.n_layers, "num_relations_aug": params.rel.shape[0]}
    meta.update(extra_meta or {})
    path = reasoner_path(out_dir, t)
    _save(path, params.tensors(), meta)
    return path


def load_reasoner(path, vocab=None) -> ReasonerParams:
    tensors, meta = _load(path)
    params = ReasonerParams(**tensors)
    if vocab is not None:
        if params.num_entities != vocab.num_entities:
            raise ContractError(
                f"checkpoint has {params.num_entities} entities, vocabulary {vocab.num_entities}"
            )
        if params.rel.shape[0] != vocab.num_relations_aug:
            raise ContractError(
                f"checkpoint has {params.rel.shape[0]} relations, vocabulary {vocab.num_relations_aug}"
            )
    return params


def save_denoiser(out_dir, t: int, dm: DenoiserParams, schedule: NoiseSchedule,
                  extra_meta=None) -> Path:
    meta = {"kind": "denoiser", "task": t, "dim": dm.dim, "n_steps": dm.n_steps,
            "n_layers": dm.n_layers, "n_heads": dm.n_heads, "d_ff": dm.d_ff}
    meta.update(extra_meta or {})
    tensors = dict(dm.tensors)
    tensors["__betas__"] = schedule.betas
    path = denoiser_path(out_dir, t)
    _save(path, tensors, meta)
    return path


def load_denoiser(path):
    tensors, meta = _load(path)
    betas = tensors.pop("__betas__")
    dm = DenoiserParams(meta["dim"], meta["n_steps"], meta["n_layers"],
                        meta["n_heads"], meta["d_ff"], tensors)
    return dm, NoiseSchedule(betas)
